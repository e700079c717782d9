//! Epstein zeta function of the simple cubic lattice,
//! `Z(s) = Σ'_{n ∈ Z^3} |n|^{-s}` continued analytically, via Ewald splitting.

use crate::error::{invalid, Result};
use statrs::function::gamma::{gamma, gamma_ur};
use std::f64::consts::PI;

const RANGE: i64 = 4;

fn upper_term(a: f64, x: f64) -> f64 {
    // Γ(a, x) / x^a
    gamma_ur(a, x) * gamma(a) / x.powf(a)
}

pub fn epstein_zeta(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return invalid("zeta argument must be finite");
    }
    if (s - 3.0).abs() < 1e-12 {
        return invalid("zeta has a pole at s = 3");
    }
    if s.abs() < 1e-14 {
        return Ok(-1.0);
    }
    let (a1, a2) = (s / 2.0, (3.0 - s) / 2.0);
    let mut sum = 0.0;
    for i in -RANGE..=RANGE {
        for j in -RANGE..=RANGE {
            for k in -RANGE..=RANGE {
                let r2 = (i * i + j * j + k * k) as f64;
                if r2 == 0.0 {
                    continue;
                }
                let x = PI * r2;
                let t1 = if a1 > 0.0 { upper_term(a1, x) } else { exp_integral_term(a1, x) };
                let t2 = if a2 > 0.0 { upper_term(a2, x) } else { exp_integral_term(a2, x) };
                sum += t1 + t2;
            }
        }
    }
    let pref = PI.powf(s / 2.0) / gamma(s / 2.0);
    Ok(pref * (sum + 2.0 / (s - 3.0) - 2.0 / s))
}

/// `Γ(a, x) / x^a` for `a <= 0` through the recurrence `Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a`.
fn exp_integral_term(a: f64, x: f64) -> f64 {
    if a.abs() < 1e-14 {
        return statrs_e1(x);
    }
    let up = gamma_ur(a + 1.0, x) * gamma(a + 1.0);
    (up - x.powf(a) * (-x).exp()) / a / x.powf(a)
}

fn statrs_e1(x: f64) -> f64 {
    // E1(x) by its continued fraction, adequate for x >= π
    let mut b = x + 1.0;
    let mut c = 1.0 / 1e-300;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}
