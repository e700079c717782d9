use kinetic_selfsim::grid::*;
use kinetic_selfsim::landau::{LandauOperator, LandauParams};
use kinetic_selfsim::profile::{ProfileDecomposition, SeparableTerm, YProfile};
use kinetic_selfsim::selfsim::*;
use kinetic_selfsim::stencil::hessian;
use proptest::prelude::*;

fn separable(grid: GridSpec) -> ProfileDecomposition {
    let m = ScalarField::sample(grid, &Gaussian::maxwellian());
    ProfileDecomposition::new(grid, None, vec![SeparableTerm { a: YProfile::gaussian(1.0, 1.0), b: m }]).unwrap()
}

fn accepted(gamma: f64, theta: f64, mode: Mode) -> bool {
    check_theta_admissible(&SelfSimParams::new(gamma, theta, -1.0), mode).accepted
}

#[test]
fn admissibility_examples() {
    let a = check_theta_admissible(&SelfSimParams::new(-2.5, 0.6, -1.0), Mode::LandauInhom);
    assert!(!a.accepted);
    assert_eq!(a.violations, vec!["θ < 1/2".to_string()]);
    assert!(accepted(-3.0, -0.5, Mode::LandauInhom));
    let a = check_theta_admissible(&SelfSimParams::new(-2.5, 0.3, -1.0), Mode::LandauHom);
    assert_eq!(a.violations, vec!["θ ≥ 1/|γ|".to_string()]);
    assert!(accepted(-2.5, 0.45, Mode::LandauHom));
    assert!(!accepted(-2.5, -1.0, Mode::LandauInhom));
    assert!(accepted(-3.0, -1.0 / 3.0, Mode::Vpl));
    assert!(!accepted(-3.0, 0.0, Mode::Vpl));
    assert!(!accepted(-2.5, 0.0, Mode::Vpl));
}

#[test]
fn boltzmann_modes_need_s() {
    let mut p = SelfSimParams::new(-2.2, 0.2, -1.0);
    assert!(!check_theta_admissible(&p, Mode::BoltzmannInhom).accepted);
    p.s_exp = Some(0.4);
    assert!(check_theta_admissible(&p, Mode::BoltzmannInhom).accepted);
    p.theta = 1.3;
    assert!(!check_theta_admissible(&p, Mode::BoltzmannInhom).accepted);
    p.theta = 0.6;
    assert!(check_theta_admissible(&p, Mode::BoltzmannHom).accepted);
    p.s_exp = Some(1.5);
    assert!(!check_theta_admissible(&p, Mode::BoltzmannHom).accepted);
}

#[test]
fn coordinate_map_examples() {
    let x = [0.3, -1.0, 2.0];
    let v = [1.0, 0.5, -0.25];
    let (y, w) = to_selfsim(x, v, &SelfSimParams::new(-2.5, 0.2, -1.0)).unwrap();
    assert_eq!((y, w), (x, v));
    let (y, w) = to_selfsim(x, v, &SelfSimParams::new(-2.5, 0.0, -0.25)).unwrap();
    assert_eq!(y, x.map(|c| 4.0 * c));
    assert_eq!(w, v);
    assert!(to_selfsim(x, v, &SelfSimParams::new(-2.5, 0.2, 0.0)).is_err());
    assert!(from_selfsim(x, v, &SelfSimParams::new(-2.5, 0.2, 1.0)).is_err());
}

#[test]
fn rescaling_identity_and_mass() {
    let f = |_t: f64, x: [f64; 3], v: [f64; 3]| (-0.5 * dot(x, x) - 0.5 * dot(v, v)).exp();
    let mut p = SelfSimParams::new(-2.5, 0.2, -1.0);
    let id = rescale_solution(&f, &p).unwrap();
    assert_eq!(id.eval(-0.3, [0.1, 0.2, 0.3], [1.0, 0.0, -1.0]), f(-0.3, [0.1, 0.2, 0.3], [1.0, 0.0, -1.0]));
    p.lambda = 2.0;
    p.alpha = 1.0;
    let r = rescale_solution(&f, &p).unwrap();
    let m0 = phase_space_integral(&f, -1.0, 8.0, 8.0, 14);
    let m1 = phase_space_integral(&r, -1.0, 2.0, 4.0, 14);
    let (l, a, g) = (p.lambda, p.alpha, p.gamma);
    let want = l.powf(a + 3.0 + g) * l.powf(-3.0 * (1.0 + a)) * l.powf(-3.0) * m0;
    assert!((m1 - want).abs() <= 1e-3 * want, "{m1} {want}");
    p.lambda = 0.0;
    assert!(rescale_solution(&f, &p).is_err());
}

#[test]
fn snapshot_rescaling_at_unit_lambda_is_identity() {
    let g = GridSpec::new(16, 6.0).unwrap();
    let f = ScalarField::sample(g, &Gaussian::maxwellian());
    let r = rescale_snapshot(&f, 1.0, 1.0, -2.5, g).unwrap();
    assert_eq!(r.out_of_domain, 0);
    for i in 0..g.len() {
        assert!((r.field.data[i] - f.data[i]).abs() <= 1e-15);
    }
    let r = rescale_snapshot(&f, 2.0, 1.0, -2.5, g).unwrap();
    assert!(r.out_of_domain > 0);
    assert_eq!(r.time_factor, 0.5);
}

#[test]
fn coefficient_identities() {
    let grid = GridSpec::new(24, 8.0).unwrap();
    let g = separable(grid);
    let params = LandauParams::new(-2.5).unwrap();
    let phi = PhiModel::default();
    let r = rescaled_coeff_identities(&g, &phi, params, &SelfSimParams::new(-2.5, 0.2, -0.5), [0.5, 0.0, 0.0]).unwrap();
    assert!(r.a_mismatch <= 1e-3 && r.c_mismatch <= 1e-3, "{r:?}");
    let r = rescaled_coeff_identities(&g, &phi, params, &SelfSimParams::new(-2.5, 0.2, -1.0), [0.5, 0.0, 0.0]).unwrap();
    assert!(r.a_mismatch <= 1e-10 && r.c_mismatch <= 1e-10, "{r:?}");
    let r = rescaled_coeff_identities(&ProfileDecomposition::zero(grid), &phi, params, &SelfSimParams::new(-2.5, 0.2, -0.3), [0.0; 3]).unwrap();
    assert_eq!((r.a_mismatch, r.c_mismatch), (0.0, 0.0));
}

#[test]
fn zero_background_gives_zero_errors() {
    let grid = GridSpec::new(16, 8.0).unwrap();
    let g = separable(grid);
    let phi = PhiModel::zero();
    let s = ErrorSampler::new(&g, &phi, LandauParams::new(-2.5).unwrap(), 1.0, 3.0).unwrap();
    let (e1, e2) = s.evaluate(&phi, 0.2, -0.01).unwrap();
    assert_eq!(e1.total, 0.0);
    assert_eq!(e2.total, 0.0);
    let rep = verify_error_decay(&s, &phi, 0.2, &[-0.1, -0.01, -0.001]).unwrap();
    assert!(rep.pass);
}

#[test]
fn e1_at_unit_time_is_direct_substitution() {
    let grid = GridSpec::new(32, 8.0).unwrap();
    let g = separable(grid);
    let phi = PhiModel::default();
    let params = LandauParams::new(-2.5).unwrap();
    let s = ErrorSampler::new(&g, &phi, params, 0.0, 3.0).unwrap();
    let e = error_e1_field(&s, &phi, 0.0, -1.0, 0).unwrap();
    let op = LandauOperator::new(grid, params).unwrap();
    let gy = g.at_y([0.0; 3]);
    let amp = phi.amplitude(-1.0, [0.0; 3]);
    let n = ScalarField::sample(grid, &Gaussian::isotropic(1.0, phi.sigma_v));
    let cphi = op.coefficients(&n).unwrap();
    let cg = op.coefficients(&gy).unwrap();
    let hs = hessian(&gy);
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let w = grid.point(i);
        if grid.is_ghost(i) || norm(w) > 3.0 {
            assert_eq!(e.data[i], 0.0);
            continue;
        }
        let a = cphi.a.data[i];
        let tr = a[0] * hs[0][i] + a[3] * hs[3][i] + a[5] * hs[5][i] + 2.0 * (a[1] * hs[1][i] + a[2] * hs[2][i] + a[4] * hs[4][i]);
        let want = -amp * tr - amp * cphi.c.data[i] * gy.data[i] - cg.c.data[i] * phi.eval(-1.0, [0.0; 3], w);
        worst = worst.max((e.data[i] - want).abs());
    }
    assert!(worst <= 1e-10 * e.max_abs(), "{worst}");
}

#[test]
fn decay_detector_separates_rates() {
    let grid = GridSpec::new(24, 8.0).unwrap();
    let g = separable(grid);
    let params = LandauParams::new(-2.5).unwrap();
    let times = [-0.1, -0.01, -0.001];
    let theta = 0.2;
    let crit = PhiModel::critical_rate(theta, -2.5);
    for beta in [0.0, 0.5 * crit] {
        let phi = PhiModel::with_beta(beta);
        assert!(phi.satisfies_decay(theta, -2.5));
        assert!(phi.decay_margin(theta, -2.5) > 0.0);
        let s = ErrorSampler::new(&g, &phi, params, 1.0, 3.0).unwrap();
        let rep = verify_error_decay(&s, &phi, theta, &times).unwrap();
        assert!(rep.pass, "β = {beta}: {:?}", rep.offending);
        let (e1, _) = error_exponents(theta, -2.5, beta);
        let want = e1.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rep.e1.slope.unwrap() >= 0.9 * want, "{:?}", rep.e1);
    }
    let phi = PhiModel::with_beta(0.8);
    assert!(!phi.satisfies_decay(theta, -2.5));
    let s = ErrorSampler::new(&g, &phi, params, 1.0, 3.0).unwrap();
    let rep = verify_error_decay(&s, &phi, theta, &times).unwrap();
    assert!(!rep.pass);
    assert!(!rep.offending.is_empty());
}

#[test]
fn decay_rejects_bad_times() {
    let grid = GridSpec::new(16, 8.0).unwrap();
    let g = separable(grid);
    let phi = PhiModel::default();
    let s = ErrorSampler::new(&g, &phi, LandauParams::new(-2.5).unwrap(), 1.0, 3.0).unwrap();
    assert!(verify_error_decay(&s, &phi, 0.2, &[-0.1]).is_err());
    assert!(verify_error_decay(&s, &phi, 0.2, &[-0.01, -0.1]).is_err());
    assert!(verify_error_decay(&s, &phi, 0.2, &[-0.1, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip_is_exact(
        theta in -0.9f64..0.49,
        t in -10.0f64..-1e-3,
        x in prop::array::uniform3(-5.0f64..5.0),
        v in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let p = SelfSimParams::new(-2.5, theta, t);
        let (y, w) = to_selfsim(x, v, &p).unwrap();
        let (x2, v2) = from_selfsim(y, w, &p).unwrap();
        for k in 0..3 {
            prop_assert!((x2[k] - x[k]).abs() <= 1e-14 * x[k].abs().max(1.0));
            prop_assert!((v2[k] - v[k]).abs() <= 1e-14 * v[k].abs().max(1.0));
        }
    }

    #[test]
    fn exponent_table_matches(theta in -0.9f64..0.49, gamma in -3.0f64..=-2.0) {
        prop_assume!(accepted(gamma, theta, Mode::LandauInhom));
        let e = expansion_exponents(theta, gamma);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        prop_assert!(close(e.a_phi_g, 1.0 - 2.0 * theta));
        prop_assert!(close(e.c_phi_g, 1.0));
        prop_assert!(close(e.c_g_phi, 1.0 + theta * (3.0 + gamma)));
        prop_assert!(close(e.a_g_phi, 1.0 + theta * (5.0 + gamma)));
        prop_assert!(close(e.phi_phi, 2.0 + theta * (3.0 + gamma)));
    }

    #[test]
    fn below_critical_rate_has_positive_margin(theta in -0.9f64..0.49, gamma in -3.0f64..=-2.0, frac in 0.0f64..0.99) {
        prop_assume!(accepted(gamma, theta, Mode::LandauInhom));
        let crit = PhiModel::critical_rate(theta, gamma);
        prop_assume!(crit > 1e-3);
        prop_assert!(PhiModel::with_beta(frac * crit).decay_margin(theta, gamma) > 0.0);
        prop_assert!(PhiModel::with_beta(crit + 0.01).decay_margin(theta, gamma) < 0.0);
    }
}
