use kinetic_selfsim::grid::*;
use kinetic_selfsim::report::observed_orders;
use kinetic_selfsim::stencil::diff1;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn grid_rejects_bad_sizes() {
    assert!(GridSpec::new(7, 8.0).is_err());
    assert!(GridSpec::new(6, 8.0).is_err());
    assert!(GridSpec::new(16, 0.0).is_err());
    assert!(GridSpec::new(16, f64::NAN).is_err());
    let g = GridSpec::new(16, 4.0).unwrap();
    assert_eq!(g.len(), 4096);
    assert_eq!(g.spacing(), 0.5);
    assert_eq!(g.point(g.center_index()), [0.0; 3]);
}

#[test]
fn cutoff_plateau_and_support() {
    let g = GridSpec::new(32, 8.0).unwrap();
    let c = make_cutoff(g, 1.0).unwrap();
    assert_eq!(c.data[g.center_index()], 1.0);
    let idx = g.index(16 + 6, 16, 16);
    assert_eq!(g.point(idx), [3.0, 0.0, 0.0]);
    assert_eq!(c.data[idx], 0.0);
    assert!(make_cutoff(g, -1.0).is_err());
}

#[test]
fn cutoff_gradient_scales_like_inverse_radius() {
    let g = GridSpec::new(128, 20.0).unwrap();
    let mut sups = Vec::new();
    for r in [2.0, 4.0, 8.0] {
        let c = make_cutoff(g, r).unwrap();
        let d = [diff1(&c, 0), diff1(&c, 1), diff1(&c, 2)];
        let sup = (0..g.len()).map(|i| (d[0].data[i].powi(2) + d[1].data[i].powi(2) + d[2].data[i].powi(2)).sqrt()).fold(0.0, f64::max);
        sups.push(sup * r);
    }
    let (lo, hi) = sups.iter().fold((f64::MAX, 0.0f64), |a, s| (a.0.min(*s), a.1.max(*s)));
    assert!(hi / lo < 1.1, "{sups:?}");
    assert!((hi - 1.875).abs() < 0.1, "{sups:?}");
}

#[test]
fn integrate_zero_and_moments() {
    let g = GridSpec::new(64, 8.0).unwrap();
    assert_eq!(integrate(&ScalarField::zeros(g), None), 0.0);
    let m = ScalarField::sample(g, &Gaussian::maxwellian());
    assert!((integrate(&m, None) - 1.0).abs() < 1e-10);
    assert!((integrate(&m, Some(&Weight::speed_sq())) - 3.0).abs() < 1e-4);
    let ball = ScalarField::from_fn(g, |v| if norm(v) <= 1.0 { 1.0 } else { 0.0 });
    let vol = integrate(&ball, None);
    assert!((vol - 4.0 * PI / 3.0).abs() < 0.05 * 4.0 * PI / 3.0, "{vol}");
}

#[test]
fn integrate_converges_at_second_order() {
    let l = 2.0;
    let exact = (4.0 * l / 3.0f64).powi(3);
    let ns = [16, 32, 64];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let g = GridSpec::new(n, l).unwrap();
            let f = ScalarField::from_fn(g, |v| v.iter().map(|x| 1.0 - x * x / (l * l)).product());
            (f.integral() - exact).abs()
        })
        .collect();
    for o in observed_orders(&ns, &errs) {
        assert!(o >= 1.8, "{errs:?}");
    }
}

#[test]
fn dyadic_shells_partition_and_scale() {
    let g = GridSpec::new(64, 8.0).unwrap();
    let shells = dyadic_annuli(g, 1.0, 0, 0).unwrap();
    assert_eq!((shells[0].inner, shells[0].outer), (1.0, 2.0));
    for &i in &shells[0].nodes {
        let r = norm(g.point(i));
        assert!((1.0..2.0).contains(&r));
    }
    let shells = dyadic_annuli(g, 0.5, 0, 2).unwrap();
    let mut seen = vec![0u8; g.len()];
    for s in &shells {
        for &i in &s.nodes {
            seen[i] += 1;
        }
    }
    for i in 0..g.len() {
        let r = norm(g.point(i));
        let inside = !g.is_ghost(i) && (0.5..4.0).contains(&r);
        assert_eq!(seen[i], inside as u8, "node {i} at r = {r}");
    }
    let x: Vec<f64> = shells.iter().map(|s| s.k as f64 * 2f64.ln()).collect();
    let y: Vec<f64> = shells.iter().map(|s| (s.nodes.len() as f64).ln()).collect();
    let (slope, _, _) = kinetic_selfsim::report::linear_fit(&x, &y);
    assert!((slope - 3.0).abs() <= 0.2, "{slope}");
    assert!(dyadic_annuli(g, 0.0, 0, 1).is_err());
    assert!(dyadic_annuli(g, 1.0, 2, 1).is_err());
}

#[test]
fn snapshot_round_trip() {
    let g = GridSpec::new(8, 2.0).unwrap();
    let f = ScalarField::from_fn(g, |v| v[0] - 2.0 * v[1] + v[2] * v[2]);
    let dir = std::env::temp_dir().join(format!("kss-snap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("f.bin");
    f.write_snapshot(&p).unwrap();
    let back = ScalarField::read_snapshot(&p).unwrap();
    assert_eq!(back.grid, g);
    assert_eq!(back.data, f.data);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn interpolation_reproduces_cubics() {
    let g = GridSpec::new(16, 4.0).unwrap();
    let poly = |v: [f64; 3]| 1.0 + v[0] - 0.5 * v[1] * v[2] + 0.1 * v[0].powi(3) - 0.2 * v[2] * v[2];
    let f = ScalarField::from_fn(g, poly);
    for v in [[0.1, 0.2, -0.3], [1.3, -0.7, 0.45], [-2.2, 1.1, 0.05]] {
        assert!((f.interpolate(v) - poly(v)).abs() < 1e-11);
    }
}

#[test]
fn matrix_eigen_and_norms() {
    let m = [2.0, 1.0, 0.0, 2.0, 0.0, 5.0];
    let mut e = sym_eigenvalues(&m);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12 && (e[2] - 5.0).abs() < 1e-12);
    assert!((spectral_norm_sym(&m) - 5.0).abs() < 1e-12);
    assert!((spectral_norm(&[[0.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]) - 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trip(n in (4usize..20).prop_map(|k| 2 * k), i in 0usize..40, j in 0usize..40, k in 0usize..40) {
        let g = GridSpec::new(n, 3.0).unwrap();
        let (i, j, k) = (i % n, j % n, k % n);
        prop_assert_eq!(g.unindex(g.index(i, j, k)), (i, j, k));
    }

    #[test]
    fn odd_fields_integrate_to_zero(sx in 0.5f64..2.0, sy in 0.5f64..2.0, sz in 0.5f64..2.0, axis in 0usize..3) {
        let g = GridSpec::new(16, 6.0).unwrap();
        let gauss = Gaussian { center: [0.0; 3], sigma: [sx, sy, sz], mass: 1.0 };
        let f = ScalarField::from_fn(g, |v| v[axis] * (1.0 + v[(axis + 1) % 3].powi(2)) * gauss.eval(v));
        prop_assert!(integrate(&f, None).abs() < 1e-14);
    }

    #[test]
    fn cutoffs_are_monotone_in_radius(r1 in 0.2f64..5.0, dr in 0.0f64..5.0, x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
        let a = Cutoff::new(r1).unwrap().value([x, y, z]);
        let b = Cutoff::new(r1 + dr).unwrap().value([x, y, z]);
        prop_assert!(a <= b + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
