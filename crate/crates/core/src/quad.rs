//! One-dimensional and spherical quadrature rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
    x.iter().zip(&w).map(|(xi, wi)| (c + r * xi, r * wi)).collect()
}

/// Composite rule: `order` Gauss nodes on each panel `[breaks[i], breaks[i+1]]`.
pub fn composite(breaks: &[f64], order: usize) -> Vec<(f64, f64)> {
    breaks.windows(2).flat_map(|w| gauss_on(order, w[0], w[1])).collect()
}

/// Product rule on the unit sphere: Gauss in `cos θ`, trapezoid in azimuth.
/// Weights sum to `4π`.
pub fn sphere_rule(n_polar: usize, n_azimuth: usize) -> Vec<([f64; 3], f64)> {
    let (x, w) = gauss_legendre(n_polar);
    let mut out = Vec::with_capacity(n_polar * n_azimuth);
    for (ct, wt) in x.iter().zip(&w) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for a in 0..n_azimuth {
            let phi = 2.0 * PI * (a as f64 + 0.5) / n_azimuth as f64;
            out.push(([st * phi.cos(), st * phi.sin(), *ct], wt * 2.0 * PI / n_azimuth as f64));
        }
    }
    out
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `e`.
pub fn orthonormal_frame(e: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = a[0] * e[0] + a[1] * e[1] + a[2] * e[2];
    let mut u = [a[0] - d * e[0], a[1] - d * e[1], a[2] - d * e[2]];
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    u.iter_mut().for_each(|x| *x /= nu);
    let w = [e[1] * u[2] - e[2] * u[1], e[2] * u[0] - e[0] * u[2], e[0] * u[1] - e[1] * u[0]];
    (u, w)
}

/// Radial-angular quadrature of a function over the ball `|v| <= r`.
pub fn ball_integral(r: f64, f: impl Fn([f64; 3]) -> f64) -> f64 {
    let radial = gauss_on(24, 0.0, r);
    let sphere = sphere_rule(16, 32);
    let mut acc = 0.0;
    for (rho, wr) in &radial {
        for (e, we) in &sphere {
            acc += wr * we * rho * rho * f([rho * e[0], rho * e[1], rho * e[2]]);
        }
    }
    acc
}
