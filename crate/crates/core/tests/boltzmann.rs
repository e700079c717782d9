use kinetic_selfsim::boltzmann::*;
use kinetic_selfsim::grid::*;
use kinetic_selfsim::profile::{ProfileDecomposition, TestWeight};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> CollisionParams {
    CollisionParams::new(-2.2, 0.4).unwrap()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    v.map(|x| x / n)
}

fn energy(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().chain(b.iter()).map(|x| x * x).sum()
}

#[test]
fn params_validate() {
    assert!(CollisionParams::new(-2.2, 0.4).is_ok());
    assert!(CollisionParams::new(-0.5, 0.4).is_err());
    assert!(CollisionParams::new(-3.0, 0.4).is_err());
    assert!(CollisionParams::new(-2.2, 1.0).is_err());
    assert!(CollisionParams::new(-2.2, 0.0).is_err());
    let c = params().cancellation_constant();
    assert!(c.is_finite() && c > 0.0);
    assert_eq!(params().q2_const(), c);
    assert_eq!(params().with_q2_constant(1.0).q2_const(), 1.0);
}

#[test]
fn grazing_collision_is_identity() {
    let v = [1.0, -0.5, 2.0];
    let vs = [-0.3, 0.7, 0.1];
    let u = unit([v[0] - vs[0], v[1] - vs[1], v[2] - vs[2]]);
    let (vp, vsp, eta) = collide(v, vs, u).unwrap();
    for d in 0..3 {
        assert!((vp[d] - v[d]).abs() < 1e-14 && (vsp[d] - vs[d]).abs() < 1e-14);
    }
    assert!(eta.abs() < 1e-7);
    assert!(collide(v, vs, [1.0, 1.0, 0.0]).is_err());
}

#[test]
fn collisions_conserve_momentum_and_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let mut draw = || [0, 1, 2].map(|_| rng.random_range(-5.0..5.0));
        let (v, vs, s) = (draw(), draw(), draw());
        let (vp, vsp, _) = collide(v, vs, unit(s)).unwrap();
        let scale = energy(v, vs).max(1.0);
        for d in 0..3 {
            worst = worst.max((vp[d] + vsp[d] - v[d] - vs[d]).abs() / scale.sqrt());
        }
        worst = worst.max((energy(vp, vsp) - energy(v, vs)).abs() / scale);
    }
    assert!(worst < 1e-13, "{worst}");
}

#[test]
fn q2_examples() {
    let g = GridSpec::new(16, 4.0).unwrap();
    let f2 = ScalarField::sample(g, &Gaussian::maxwellian());
    assert_eq!(q2(&ScalarField::zeros(g), &f2, &params()).unwrap().max_abs(), 0.0);
    let g = GridSpec::new(48, 3.0).unwrap();
    let ball = ScalarField::from_fn(g, |v| if norm(v) <= 1.0 { 1.0 } else { 0.0 });
    let ball = ball.scaled(1.0 / ball.integral());
    let f2 = ScalarField::sample(g, &Gaussian::maxwellian());
    let p = CollisionParams::new(-2.0, 0.4).unwrap().with_q2_constant(1.0);
    let out = q2(&ball, &f2, &p).unwrap();
    let c = g.center_index();
    let want = 3.0 * f2.data[c];
    assert!((out.data[c] - want).abs() <= 0.05 * want, "{} {want}", out.data[c]);
}

#[test]
fn q2_matches_monte_carlo() {
    let p = params();
    let f1 = Gaussian::maxwellian();
    let g = GridSpec::new(16, 5.0).unwrap();
    let a = ScalarField::sample(g, &f1);
    let ones = ScalarField::from_fn(g, |_| 1.0);
    let conv = q2(&a, &ones, &p).unwrap();
    for v in [[0.0; 3], [1.25, 0.0, 0.0]] {
        let mc = mc_q2_integral(&f1, v, &p, 1_000_000, 7);
        let i = (0..g.len()).find(|&i| g.point(i) == v).unwrap();
        let rel = (conv.data[i] - mc.mean).abs() / mc.mean.abs();
        assert!(rel <= 0.05, "{v:?} grid {} mc {} ± {}", conv.data[i], mc.mean, mc.std_error);
    }
}

#[test]
fn q1_kernel_examples() {
    let p = params();
    let zero = |_: [f64; 3]| 0.0;
    assert_eq!(q1_kernel(&zero, [0.3, 0.0, 0.0], [0.5, 0.1, 0.0], 6.0, &p).unwrap(), 0.0);
    let m = Gaussian::maxwellian();
    assert!(q1_kernel(&m, [0.0; 3], [0.0; 3], 6.0, &p).is_err());
    let v = [0.4, -0.2, 0.1];
    let h = [0.3, 0.5, -0.2];
    let a = q1_kernel(&m, v, h, 6.0, &p).unwrap();
    let b = q1_kernel(&m, v, h.map(|x| -x), 6.0, &p).unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} {b}");
    assert!(a > 0.0);
}

#[test]
fn annulus_bound_has_stable_constant() {
    let p = params();
    for f in [Gaussian::maxwellian(), Gaussian { center: [0.5, 0.0, -0.3], sigma: [0.8, 1.2, 1.0], mass: 2.0 }] {
        let v = [0.3, 0.2, -0.1];
        let factor = annulus_convolution_factor(&f, v, 6.0, &p);
        let cs: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&r| annulus_integral(&f, v, r, 6.0, &p) / (factor * r.powf(-2.0 * p.s_exp))).collect();
        let (lo, hi) = cs.iter().fold((f64::MAX, 0.0f64), |a, c| (a.0.min(*c), a.1.max(*c)));
        assert!(lo > 0.0 && hi / lo <= 10.0, "{cs:?}");
    }
}

#[test]
fn q1_of_constant_vanishes() {
    let p = params();
    let g = GridSpec::new(8, 3.0).unwrap();
    let m = Gaussian::maxwellian();
    let one = |_: [f64; 3]| 1.0;
    let out = q1(&m, &one, g, &p).unwrap();
    assert!(out.max_abs() <= 1e-12, "{}", out.max_abs());
}

#[test]
fn weak_form_vanishes_on_collision_invariants() {
    let p = params();
    let g = ScalarField::sample(GridSpec::new(12, 5.0).unwrap(), &Gaussian { center: [0.3, 0.0, 0.0], sigma: [1.0, 0.8, 1.2], mass: 1.0 });
    let scale = pair_scale(&g, p.gamma);
    let one = |_: [f64; 3]| 1.0;
    let r = weak_form(&g, &TestFunction { f: &one, hessian_bound: 0.0 }, &p).unwrap();
    assert!(r.value.abs() <= 1e-12 * scale, "{}", r.value);
    for d in 0..3 {
        let lin = move |w: [f64; 3]| w[d];
        let r = weak_form(&g, &TestFunction { f: &lin, hessian_bound: 0.0 }, &p).unwrap();
        assert!(r.value.abs() <= 1e-3 * scale, "w_{d}: {}", r.value);
    }
    let sq = |w: [f64; 3]| w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let r = weak_form(&g, &TestFunction { f: &sq, hessian_bound: 2.0 }, &p).unwrap();
    assert!(r.value.abs() <= 1e-3 * scale, "|w|^2: {} of {scale}", r.value);
}

#[test]
fn weak_form_matches_monte_carlo() {
    let p = params();
    let gauss = Gaussian { center: [0.0; 3], sigma: [1.0, 0.6, 0.8], mass: 1.0 };
    let g = ScalarField::sample(GridSpec::new(14, 5.0).unwrap(), &gauss);
    let quartic = |w: [f64; 3]| (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).powi(2);
    let grid = weak_form(&g, &TestFunction { f: &quartic, hessian_bound: 400.0 }, &p).unwrap();
    let mc = mc_weak_form(&gauss, &quartic, &p, 1_000_000, 3);
    assert!((grid.value - mc.mean).abs() <= 0.05 * mc.mean.abs(), "grid {} mc {} ± {}", grid.value, mc.mean, mc.std_error);
}

#[test]
fn cutoff_limits_vanish() {
    let p = params();
    let g = ScalarField::sample(GridSpec::new(14, 6.0).unwrap(), &Gaussian { center: [0.2, 0.0, 0.0], sigma: [1.0, 0.8, 0.9], mass: 1.0 });
    let rep = cutoff_limit_boltzmann(&g, &p, &[2.5, 3.5, 4.5], TestWeight::One, 1e-3).unwrap();
    assert!(rep.pass, "{rep:?}");
    let rep = cutoff_limit_boltzmann(&g, &p, &[2.5, 3.5, 4.5], TestWeight::SpeedSq, 1e-2).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn zero_profile_residual_vanishes() {
    let g = GridSpec::new(8, 4.0).unwrap();
    let r = boltzmann_profile_residual(&ProfileDecomposition::zero(g), &params(), 0.2).unwrap();
    assert_eq!(r.max_abs(), 0.0);
}

#[test]
fn exponent_table() {
    let e = expansion_exponents(0.3, -2.2, 0.4);
    assert!((e.q1_phi_g - (1.0 - 0.24)).abs() < 1e-14);
    assert!((e.q1_g_phi - (1.0 + 0.3 * (-2.2 + 0.8 + 3.0))).abs() < 1e-14);
    assert!((e.c_phi_g - 1.0).abs() < 1e-14);
    assert!((e.c_g_phi - (1.0 + 0.3 * 0.8)).abs() < 1e-14);
    assert!((e.phi_phi - (2.0 + 0.3 * 0.8)).abs() < 1e-14);
    let near = expansion_exponents(0.3, -2.2, 1.0 - 1e-9);
    assert!((near.q1_phi_g - (1.0 - 0.6)).abs() < 1e-8);
    assert!((near.q1_g_phi - (1.0 + 0.3 * 2.8)).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn collide_preserves_invariants(v in prop::array::uniform3(-10.0f64..10.0), vs in prop::array::uniform3(-10.0f64..10.0), s in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(norm(s) > 1e-3);
        let (vp, vsp, eta) = collide(v, vs, unit(s)).unwrap();
        let scale = energy(v, vs).max(1.0);
        for d in 0..3 {
            prop_assert!((vp[d] + vsp[d] - v[d] - vs[d]).abs() <= 1e-13 * scale.sqrt());
        }
        prop_assert!((energy(vp, vsp) - energy(v, vs)).abs() <= 1e-13 * scale);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&eta));
    }

    #[test]
    fn exponents_relation(theta in -0.5f64..0.45, gamma in -2.99f64..-1.0, s in 0.01f64..0.49) {
        let e = expansion_exponents(theta, gamma, s);
        prop_assert!((e.q1_g_phi - e.q1_phi_g - theta * (gamma + 4.0 * s + 3.0)).abs() < 1e-12);
        prop_assert!((e.phi_phi - e.c_g_phi - 1.0).abs() < 1e-12);
    }
}
