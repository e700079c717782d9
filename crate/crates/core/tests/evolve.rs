use kinetic_selfsim::evolve::*;
use kinetic_selfsim::grid::*;
use kinetic_selfsim::landau::LandauParams;
use proptest::prelude::*;

fn two_gaussians(g: GridSpec) -> ScalarField {
    let a = Gaussian { center: [-1.0, 0.0, 0.0], sigma: [0.7, 0.7, 0.7], mass: 0.5 };
    let b = Gaussian { center: [1.0, 0.0, 0.0], sigma: [0.7, 0.7, 0.7], mass: 0.5 };
    ScalarField::from_fn(g, |v| a.eval(v) + b.eval(v))
}

fn times(n: usize, end: f64) -> Vec<f64> {
    (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn init_validates() {
    let g = GridSpec::new(16, 6.0).unwrap();
    let ev = Evolver::new(g, LandauParams::new(-3.0).unwrap()).unwrap();
    let m = ScalarField::sample(g, &Gaussian::maxwellian());
    let bound = ev.stability_bound(&m).unwrap();
    assert!(ev.init(m.clone(), Some(2.0 * bound)).is_err());
    assert!(ev.init(m.clone(), Some(-1.0)).is_err());
    assert!(ev.init(ScalarField::zeros(g), None).is_err());
    let mut neg = m.clone();
    neg.data[3] = -1.0;
    assert!(ev.init(neg, None).is_err());
    let other = ScalarField::sample(GridSpec::new(8, 6.0).unwrap(), &Gaussian::maxwellian());
    assert!(ev.init(other, None).is_err());
    assert!(Evolver::new(g, LandauParams::new(-3.0).unwrap()).unwrap().with_cfl(0.0).is_err());
}

#[test]
fn two_gaussian_run_conserves_and_dissipates() {
    let g = GridSpec::new(24, 6.0).unwrap();
    let ev = Evolver::new(g, LandauParams::new(-3.0).unwrap()).unwrap();
    let mut st = ev.init(two_gaussians(g), None).unwrap();
    ev.run(&mut st, 100).unwrap();
    let d = conservation_drift(&st.history);
    assert!(d.mass <= 1e-12, "{d:?}");
    assert!(d.energy <= 1e-4, "{d:?}");
    assert!(max_entropy_increase(&st.history) <= 1e-6);
    assert!(st.history.last().unwrap().entropy < st.history[0].entropy);
    let rep = blowup_indicator(&st.history, -3.0).unwrap();
    assert_eq!(rep.verdict, BlowupVerdict::NoBlowUpTrend);
}

#[test]
fn maxwellian_history_has_no_trend() {
    let g = GridSpec::new(24, 6.0).unwrap();
    let ev = Evolver::new(g, LandauParams::new(-2.5).unwrap()).unwrap();
    let mut st = ev.init(ScalarField::sample(g, &Gaussian::maxwellian()), None).unwrap();
    ev.run(&mut st, 12).unwrap();
    assert_eq!(blowup_indicator(&st.history, -2.5).unwrap().verdict, BlowupVerdict::NoBlowUpTrend);
    assert!(blowup_indicator(&st.history[..5], -2.5).is_err());
}

#[test]
fn manufactured_theta_is_recovered() {
    let gamma = -2.5;
    for theta in [-0.3, 0.3, 0.45] {
        let h = manufactured_history(theta, gamma, 1.0, &times(40, 0.95));
        let rep = blowup_indicator(&h, gamma).unwrap();
        assert_eq!(rep.verdict, BlowupVerdict::TypeI, "{theta} {rep:?}");
        assert!((rep.theta.unwrap() - theta).abs() <= 0.02, "{theta} {rep:?}");
        assert!((rep.blowup_time.unwrap() - 1.0).abs() <= 0.1, "{rep:?}");
    }
    let h = manufactured_history(0.0, gamma, 1.0, &times(40, 0.95));
    let rep = blowup_indicator(&h, gamma).unwrap();
    assert!(rep.theta.map(|t| t.abs() <= 0.02).unwrap_or(true), "{rep:?}");
}

#[test]
fn fitter_rejects_bad_series() {
    let t = times(12, 1.0);
    let good = NormSeries { q: f64::INFINITY, values: vec![1.0; 12] };
    assert!(fit_type_one(&t[..9], &[NormSeries { q: 2.0, values: vec![1.0; 9] }], -2.5).is_err());
    assert!(fit_type_one(&t, &[NormSeries { q: 2.0, values: vec![-1.0; 12] }], -2.5).is_err());
    let mut back = t.clone();
    back.swap(3, 4);
    assert!(fit_type_one(&back, &[good], -2.5).is_err());
}

#[test]
fn rescaled_residual_tracks_original() {
    let g = GridSpec::new(24, 6.0).unwrap();
    let ev = Evolver::new(g, LandauParams::new(-3.0).unwrap()).unwrap();
    let mut st = ev.init(two_gaussians(g), None).unwrap();
    ev.run(&mut st, 5).unwrap();
    let f0 = st.f.clone();
    ev.step(&mut st).unwrap();
    let rep = symmetry_check(&ev, &f0, &st.f, st.dt, 2.0, 1.0).unwrap();
    assert!(rep.ratio <= 3.0 && rep.ratio >= 1.0 / 3.0, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn manufactured_histories_recover_theta(theta in -0.3f64..0.45, t_end in 0.5f64..2.0) {
        let gamma = -2.5;
        let h = manufactured_history(theta, gamma, t_end, &times(40, 0.95 * t_end));
        let rep = blowup_indicator(&h, gamma).unwrap();
        if theta.abs() > 0.05 {
            prop_assert!((rep.theta.unwrap() - theta).abs() <= 0.1 * theta.abs().max(0.2), "{:?}", rep);
            prop_assert!((rep.blowup_time.unwrap() - t_end).abs() <= 0.1 * t_end, "{:?}", rep);
        }
    }
}
