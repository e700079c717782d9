use kinetic_selfsim::grid::*;
use kinetic_selfsim::profile::{ProfileDecomposition, SeparableTerm, YProfile};
use kinetic_selfsim::vpl::*;

fn profile(g: GridSpec) -> ProfileDecomposition {
    let b = ScalarField::sample(g, &Gaussian { center: [0.0; 3], sigma: [1.0, 0.7, 0.9], mass: 1.0 });
    ProfileDecomposition::new(g, None, vec![SeparableTerm { a: YProfile::gaussian(1.0, 1.0), b }]).unwrap()
}

#[test]
fn zero_density_has_zero_force() {
    let g = GridSpec::new(16, 4.0).unwrap();
    let f = compute_force(&ScalarField::zeros(g), 1.0).unwrap();
    assert!(f.components.iter().all(|c| c.max_abs() == 0.0));
    let mut neg = ScalarField::zeros(g);
    neg.data[5] = -1.0;
    assert!(compute_force(&neg, 1.0).is_err());
}

#[test]
fn narrow_bump_acts_like_point_mass() {
    let g = GridSpec::new(64, 4.0).unwrap();
    let h = g.spacing();
    let rho = ScalarField::sample(g, &Gaussian::isotropic(1.0, h));
    let rho = rho.scaled(1.0 / rho.integral());
    let f = compute_force(&rho, 1.0).unwrap();
    let i = (0..g.len()).find(|&i| g.point(i) == [2.0, 0.0, 0.0]).unwrap();
    let v = f.at_node(i);
    assert!((v[0] - 0.25).abs() <= 0.02 * 0.25, "{v:?}");
    assert!(v[1].abs() < 1e-10 && v[2].abs() < 1e-10);
}

#[test]
fn gauss_law_holds() {
    let g = GridSpec::new(64, 6.0).unwrap();
    for (rho, c) in [
        (ScalarField::sample(g, &Gaussian::isotropic(1.0, 0.8)), 1.0),
        (ScalarField::sample(g, &Gaussian { center: [0.3, -0.2, 0.1], sigma: [0.6, 0.9, 1.1], mass: 2.0 }), -4.0 * std::f64::consts::PI),
    ] {
        let f = compute_force(&rho, c).unwrap();
        let rep = gauss_law(&rho, &f, &[1.0, 2.0, 4.0], 0.02).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
    let rho = ScalarField::sample(g, &Gaussian::maxwellian());
    let f = compute_force(&rho, 1.0).unwrap();
    assert!(gauss_law(&rho, &f, &[5.9], 0.02).is_err());
    assert!(gauss_law(&rho, &compute_force(&rho, 0.0).unwrap(), &[1.0], 0.02).is_err());
}

#[test]
fn force_commutes_with_grid_translation() {
    let g = GridSpec::new(32, 8.0).unwrap();
    let rho = ScalarField::sample(g, &Gaussian::isotropic(1.0, 0.9));
    let n = g.n;
    let mut shifted = ScalarField::zeros(g);
    for i in 0..n - 2 {
        for j in 0..n {
            for k in 0..n {
                shifted.data[g.index(i + 2, j, k)] = rho.data[g.index(i, j, k)];
            }
        }
    }
    let a = compute_force(&rho, 1.0).unwrap();
    let b = compute_force(&shifted, 1.0).unwrap();
    let scale = a.components[0].max_abs();
    for i in 0..n - 2 {
        for j in 0..n {
            for k in 0..n {
                let (p, q) = (a.at_node(g.index(i, j, k)), b.at_node(g.index(i + 2, j, k)));
                for d in 0..3 {
                    assert!((p[d] - q[d]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}

#[test]
fn rescaled_force_identity_examples() {
    let g = GridSpec::new(32, 6.0).unwrap();
    let phi = Gaussian::isotropic(1.0, 1.0);
    let gd = Gaussian { center: [0.2, 0.0, -0.1], sigma: [0.7, 0.9, 0.8], mass: 0.5 };
    let zero = |_: [f64; 3]| 0.0;
    assert!(rescaled_force_identity(&phi, &zero, g, -0.5, 1.0).unwrap().relative <= 1e-12);
    let r = rescaled_force_identity(&phi, &gd, g, -1.0, 1.0).unwrap();
    assert!(r.relative <= 1e-10, "{r:?}");
    let r = rescaled_force_identity(&phi, &gd, g, -0.5, 1.0).unwrap();
    assert!(r.relative <= 1e-3, "{r:?}");
    assert!(rescaled_force_identity(&phi, &gd, g, 0.0, 1.0).is_err());
}

#[test]
fn profile_force_matches_grid_force() {
    let w = GridSpec::new(16, 6.0).unwrap();
    let g = profile(w);
    let mass = g.terms[0].b.integral();
    let y_grid = GridSpec::new(48, 6.0).unwrap();
    let rho = ScalarField::from_fn(y_grid, |y| mass * g.terms[0].a.eval(y));
    let f = compute_force(&rho, 1.0).unwrap();
    let scale = f.components[0].max_abs();
    for y in [[0.5, 0.0, 0.0], [1.0, -0.5, 0.25], [0.0, 2.0, 1.0]] {
        let exact = profile_force(&g, 1.0, y).unwrap();
        let grid = f.at(y);
        for d in 0..3 {
            assert!((exact[d] - grid[d]).abs() <= 1e-3 * scale, "{y:?} {exact:?} {grid:?}");
        }
    }
}

#[test]
fn residual_force_term() {
    let w = GridSpec::new(16, 6.0).unwrap();
    let g = profile(w);
    let z = vpl_profile_residual(&ProfileDecomposition::zero(w), 1.0, &[[0.0; 3]]).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    let y = [0.7, -0.3, 0.4];
    let with = vpl_profile_residual(&g, 2.0, &[y]).unwrap();
    let without = vpl_profile_residual(&g, 0.0, &[y]).unwrap();
    let f = profile_force(&g, 2.0, y).unwrap();
    let gy = g.at_y(y);
    let diffs = [0, 1, 2].map(|k| kinetic_selfsim::stencil::diff1(&gy, k));
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let want = (0..3).map(|k| f[k] * diffs[k].data[i]).sum::<f64>();
        worst = worst.max((with.fields[0].data[i] - without.fields[0].data[i] - want).abs());
    }
    assert!(worst <= 1e-12 * with.max_abs(), "{worst}");
    let mixed = ProfileDecomposition::new(w, Some(ScalarField::sample(w, &Gaussian::maxwellian())), g.terms.clone()).unwrap();
    assert!(vpl_profile_residual(&mixed, 1.0, &[y]).is_err());
}

#[test]
fn entropy_functional_refutes_positive_profile() {
    let w = GridSpec::new(28, 10.0).unwrap();
    let g = profile(w);
    let ent = vpl_entropy_functional(&g, 1.0, &[2.5, 3.25, 4.0], &[2.0, 4.0, 8.0], 1e-30).unwrap();
    let m = ent.mass.limit.unwrap();
    assert!((m - ent.total_mass).abs() <= 0.02 * ent.total_mass, "{m} {}", ent.total_mass);
    assert!(ent.dissipation >= 0.0, "{}", ent.dissipation);
    assert!(ent.gap > 0.0 && ent.refuted);
}
