use kinetic_selfsim::bounds::*;
use kinetic_selfsim::grid::*;
use kinetic_selfsim::landau::LandauParams;
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(24, 6.0).unwrap()
}

fn gauss(g: GridSpec, sigma: f64) -> ScalarField {
    ScalarField::sample(g, &Gaussian::isotropic(1.0, sigma))
}

type Verify = fn(&[ScalarField], f64, LandauParams) -> kinetic_selfsim::Result<BoundReport>;

fn all_bounds() -> [(BoundKind, Verify); 4] {
    [
        (BoundKind::A1Hi, verify_bound_a1hi),
        (BoundKind::ALoInf, verify_bound_aloinf),
        (BoundKind::AGrad, verify_bound_agrad),
        (BoundKind::C, verify_bound_c),
    ]
}

fn mid(kind: BoundKind, gamma: f64) -> f64 {
    let (lo, hi) = exponent_window(kind, gamma).unwrap();
    lo + 0.5 * (hi.min(lo + 2.0) - lo)
}

#[test]
fn windows_match_closed_forms() {
    assert_eq!(exponent_window(BoundKind::A1Hi, -2.5).unwrap(), (1.0, 6.0));
    assert_eq!(exponent_window(BoundKind::A1Hi, -2.0).unwrap().1, f64::INFINITY);
    assert_eq!(exponent_window(BoundKind::ALoInf, -2.0).unwrap(), (1.0, 1.0));
    let f = vec![gauss(grid(), 1.0)];
    let p = LandauParams::new(-2.0).unwrap();
    assert!(verify_bound_aloinf(&f, 1.0, p).is_ok());
    assert!(verify_bound_aloinf(&f, 1.01, p).is_err());
    assert_eq!(exponent_window(BoundKind::AGrad, -2.5).unwrap(), (1.0, 2.0));
    assert_eq!(exponent_window(BoundKind::C, -2.5).unwrap(), (1.0, 1.2));
    assert!(exponent_window(BoundKind::C, -3.0).is_err());
}

#[test]
fn boundary_exponents_are_rejected() {
    let f = vec![gauss(grid(), 1.0)];
    let p = LandauParams::new(-2.5).unwrap();
    assert!(verify_bound_a1hi(&f, 6.0, p).is_err());
    assert!(verify_bound_a1hi(&f, 0.99, p).is_err());
    assert!(verify_bound_agrad(&f, 2.0, p).is_err());
    assert!(verify_bound_c(&f, 1.2, p).is_err());
    assert!(verify_bound_aloinf(&f, 3.0 / 2.5, p).is_err());
    assert!(verify_bound_aloinf(&f, 1.0, p).is_ok());
    assert!(splitting_window(-1.5, 2.0, f64::INFINITY).is_err());
    assert!(splitting_window(-1.5, 1.0, 2.0).is_err());
    assert!(splitting_window(0.5, 1.0, 4.0).is_err());
    assert!(splitting_window(-1.5, 1.0, 2.5).is_ok());
}

#[test]
fn fields_must_be_nonnegative_and_share_a_grid() {
    let p = LandauParams::new(-2.5).unwrap();
    let mut neg = gauss(grid(), 1.0);
    neg.data[10] = -1.0;
    assert!(verify_bound_aloinf(&[neg], 1.0, p).is_err());
    let other = gauss(GridSpec::new(16, 6.0).unwrap(), 1.0);
    assert!(verify_bound_aloinf(&[gauss(grid(), 1.0), other], 1.0, p).is_err());
    assert!(verify_bound_aloinf(&[], 1.0, p).is_err());
}

#[test]
fn ratios_are_invariant_under_amplitude() {
    let g = grid();
    let base = gauss(g, 1.0);
    let fields: Vec<ScalarField> = [0.1, 1.0, 10.0].iter().map(|&l| base.scaled(l)).collect();
    for gamma in [-3.0, -2.5, -2.0] {
        let p = LandauParams::new(gamma).unwrap();
        for (kind, verify) in all_bounds() {
            if kind == BoundKind::C && gamma == -3.0 {
                continue;
            }
            let rep = verify(&fields, mid(kind, gamma), p).unwrap();
            assert!(rep.spread - 1.0 < 1e-7, "{kind:?} {gamma} {}", rep.spread);
            assert!(rep.samples.iter().all(|s| s.ratio <= rep.fitted_constant));
        }
    }
}

#[test]
fn aloinf_stable_across_widths() {
    let g = GridSpec::new(64, 10.0).unwrap();
    let fields: Vec<ScalarField> = [0.5, 1.0, 2.0].iter().map(|&s| gauss(g, s)).collect();
    let rep = verify_bound_aloinf(&fields, 1.0, LandauParams::new(-2.0).unwrap()).unwrap();
    let mean = rep.samples.iter().map(|s| s.ratio).sum::<f64>() / 3.0;
    for s in &rep.samples {
        assert!((s.ratio / mean - 1.0).abs() <= 0.2, "{:?}", rep.samples);
    }
}

#[test]
fn random_sweep_has_bounded_constant() {
    let g = GridSpec::new(16, 6.0).unwrap();
    let fields = random_fields(g, 100, 3);
    for gamma in [-2.5, -2.0] {
        let p = LandauParams::new(gamma).unwrap();
        for (kind, verify) in all_bounds() {
            let rep = verify(&fields, mid(kind, gamma), p).unwrap();
            assert!(rep.pass, "{kind:?} {gamma} spread {}", rep.spread);
            assert!(rep.spread <= DEFAULT_SPREAD);
        }
    }
}

#[test]
fn random_fields_are_seeded() {
    let g = GridSpec::new(8, 4.0).unwrap();
    let a = random_fields(g, 3, 11);
    let b = random_fields(g, 3, 11);
    let c = random_fields(g, 3, 12);
    assert_eq!(a[2].data, b[2].data);
    assert_ne!(a[0].data, c[0].data);
    assert!(a.iter().all(|f| f.data.iter().all(|x| *x >= 0.0)));
}

#[test]
fn splitting_of_zero_is_zero() {
    let rep = verify_splitting(&ScalarField::zeros(grid()), -1.5, 1.0, f64::INFINITY, &[1.0, 2.0]).unwrap();
    assert!(rep.pass);
    assert!(rep.samples.iter().all(|s| s.lhs == 0.0 && s.rhs == 0.0));
}

#[test]
fn splitting_minimum_tracks_optimized_bound() {
    let g = GridSpec::new(32, 8.0).unwrap();
    let h = gauss(g, 1.0);
    let radii = [0.5, 1.0, 2.0, 4.0];
    let best = radii.iter().map(|&r| splitting_rhs(&h, -2.0, 1.0, f64::INFINITY, r)).fold(f64::INFINITY, f64::min);
    let opt = splitting_optimized(&h, -2.0, 1.0);
    assert!(best / opt <= 4.0 && opt / best <= 4.0, "{best} {opt}");
    let rep = verify_splitting(&h, -2.0, 1.0, f64::INFINITY, &radii).unwrap();
    assert!(rep.pass);
    assert!(rep.samples.iter().all(|s| s.lhs <= s.rhs * rep.fitted_constant));
}

#[test]
fn splitting_ratio_is_amplitude_invariant() {
    let g = GridSpec::new(24, 6.0).unwrap();
    let h = gauss(g, 1.0);
    let radii = [0.5, 1.0, 2.0];
    let a = verify_splitting(&h, -1.5, 1.0, 4.0, &radii).unwrap();
    let b = verify_splitting(&h.scaled(10.0), -1.5, 1.0, 4.0, &radii).unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((x.ratio - y.ratio).abs() <= 1e-12 * x.ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inadmissible_exponents_always_rejected(gamma in -3.0f64..=-2.0, excess in 0.001f64..3.0) {
        let f = vec![gauss(GridSpec::new(8, 4.0).unwrap(), 1.0)];
        let p = LandauParams::new(gamma).unwrap();
        for (kind, verify) in all_bounds() {
            let Ok((lo, hi)) = exponent_window(kind, gamma) else { continue };
            if hi.is_finite() {
                prop_assert!(verify(&f, hi + excess, p).is_err());
            }
            prop_assert!(verify(&f, lo - 0.01 - excess, p).is_err());
        }
    }

    #[test]
    fn splitting_rhs_is_homogeneous(lambda in 0.01f64..100.0, r in 0.1f64..5.0) {
        let h = gauss(GridSpec::new(8, 4.0).unwrap(), 1.0);
        let a = splitting_rhs(&h, -1.5, 1.0, 3.0, r);
        let b = splitting_rhs(&h.scaled(lambda), -1.5, 1.0, 3.0, r);
        prop_assert!((b - lambda * a).abs() <= 1e-12 * lambda * a);
    }
}
