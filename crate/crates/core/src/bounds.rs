//! Empirical checks of the coefficient estimates in terms of Lebesgue norms.
//!
//! Each check evaluates `lhs / rhs` over a family of fields; a bounded, stable
//! ratio is the numerical signature of the estimate.

use crate::error::{invalid, Error, Result};
use crate::grid::{spectral_norm_sym, Density, Gaussian, GridSpec, ScalarField};
use crate::kernels::{MatrixKernelGradient, RadialConvolution};
use crate::landau::{LandauOperator, LandauParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// `|ā^h| ≤ C ‖h‖_1^{1+p(γ+2)/3} ‖h‖_{p'}^{-(γ+2)p/3}`
    A1Hi,
    /// `|ā^h| ≤ C ‖h‖_q^{q(γ+5)/3} ‖h‖_∞^{1-(γ+5)q/3}`
    ALoInf,
    /// `|∂ ā^h| ≤ C ‖h‖_1^{1+p(γ+1)/3} ‖h‖_{p'}^{-(γ+1)p/3}`
    AGrad,
    /// `|c̄^h| ≤ C ‖h‖_1^{1+pγ/3} ‖h‖_{p'}^{-γp/3}`
    C,
    /// `|∫ h(v - v_*) |v_*|^s| ≤ C (R^{s+3-3/p}‖h‖_p + R^{s+3-3/r}‖h‖_r)`
    Splitting,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundSample {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub exponent: f64,
    pub samples: Vec<BoundSample>,
    pub fitted_constant: f64,
    pub spread: f64,
    pub pass: bool,
}

/// Admissible exponent range `[1, hi)` for a bound at the given `γ`.
/// When `hi = 1` only the `L^1` endpoint is accepted.
pub fn exponent_window(kind: BoundKind, gamma: f64) -> Result<(f64, f64)> {
    let hi = match kind {
        BoundKind::A1Hi => {
            if gamma + 2.0 == 0.0 {
                f64::INFINITY
            } else {
                -3.0 / (gamma + 2.0)
            }
        }
        BoundKind::ALoInf => 3.0 / (gamma + 5.0),
        BoundKind::AGrad => -3.0 / (gamma + 1.0),
        BoundKind::C => {
            if !(gamma > -3.0 && gamma <= -2.0) {
                return invalid(format!("c̄ bound needs γ in (-3, -2], got {gamma}"));
            }
            -3.0 / gamma
        }
        BoundKind::Splitting => return invalid("splitting window depends on s; use splitting_window"),
    };
    Ok((1.0, hi))
}

fn check_window(kind: BoundKind, gamma: f64, p: f64) -> Result<()> {
    let (lo, hi) = exponent_window(kind, gamma)?;
    let degenerate = hi <= lo && p == lo;
    if !(p >= lo && p < hi) && !degenerate {
        return invalid(format!("exponent {p} outside [{lo}, {hi}) for {kind:?} at γ = {gamma}"));
    }
    Ok(())
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn check_fields(fields: &[ScalarField]) -> Result<()> {
    if fields.is_empty() {
        return invalid("no fields supplied");
    }
    let g = fields[0].grid;
    for f in fields {
        if f.grid != g {
            return Err(Error::GridMismatch("bound fields must share a grid".into()));
        }
        if f.data.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::OutOfRange("bound fields must be finite and non-negative".into()));
        }
        if f.max_abs() == 0.0 {
            return Err(Error::Degenerate("zero field".into()));
        }
    }
    Ok(())
}

fn finish(kind: BoundKind, exponent: f64, samples: Vec<BoundSample>, spread_limit: f64) -> BoundReport {
    let max = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let min = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let finite = samples.iter().all(|s| s.ratio.is_finite() && s.ratio > 0.0);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    BoundReport { kind, exponent, samples, fitted_constant: max, spread, pass: finite && spread <= spread_limit }
}

pub const DEFAULT_SPREAD: f64 = 50.0;

fn norm_rhs(h: &ScalarField, e1: f64, p2: f64, e2: f64) -> f64 {
    let n1 = h.lp_norm(1.0);
    let n2 = if e2 == 0.0 { 1.0 } else { h.lp_norm(p2) };
    n1.powf(e1) * n2.powf(e2)
}

pub fn verify_bound_a1hi(fields: &[ScalarField], p: f64, params: LandauParams) -> Result<BoundReport> {
    check_window(BoundKind::A1Hi, params.gamma, p)?;
    check_fields(fields)?;
    let op = LandauOperator::new(fields[0].grid, params)?;
    let e = params.gamma + 2.0;
    let mut samples = Vec::new();
    for (k, h) in fields.iter().enumerate() {
        let lhs = op.coeff_a(h)?.sup_spectral_norm();
        let rhs = norm_rhs(h, 1.0 + p * e / 3.0, conjugate(p), -e * p / 3.0);
        samples.push(BoundSample { label: format!("field{k}"), lhs, rhs, ratio: lhs / rhs });
    }
    Ok(finish(BoundKind::A1Hi, p, samples, DEFAULT_SPREAD))
}

pub fn verify_bound_aloinf(fields: &[ScalarField], q: f64, params: LandauParams) -> Result<BoundReport> {
    check_window(BoundKind::ALoInf, params.gamma, q)?;
    check_fields(fields)?;
    let op = LandauOperator::new(fields[0].grid, params)?;
    let k5 = params.gamma + 5.0;
    let mut samples = Vec::new();
    for (k, h) in fields.iter().enumerate() {
        let lhs = op.coeff_a(h)?.sup_spectral_norm();
        let rhs = h.lp_norm(q).powf(q * k5 / 3.0) * h.lp_norm(f64::INFINITY).powf(1.0 - k5 * q / 3.0);
        samples.push(BoundSample { label: format!("field{k}"), lhs, rhs, ratio: lhs / rhs });
    }
    Ok(finish(BoundKind::ALoInf, q, samples, DEFAULT_SPREAD))
}

pub fn verify_bound_agrad(fields: &[ScalarField], p: f64, params: LandauParams) -> Result<BoundReport> {
    check_window(BoundKind::AGrad, params.gamma, p)?;
    check_fields(fields)?;
    let kern = MatrixKernelGradient::new(fields[0].grid, params.gamma, params.a_const);
    let e = params.gamma + 1.0;
    let mut samples = Vec::new();
    for (k, h) in fields.iter().enumerate() {
        let grads = kern.apply(h);
        let g = h.grid;
        let lhs = grads
            .iter()
            .flat_map(|comp| comp.iter().enumerate().filter(|(i, _)| !g.is_ghost(*i)).map(|(_, m)| spectral_norm_sym(m)))
            .fold(0.0, f64::max);
        let rhs = norm_rhs(h, 1.0 + p * e / 3.0, conjugate(p), -e * p / 3.0);
        samples.push(BoundSample { label: format!("field{k}"), lhs, rhs, ratio: lhs / rhs });
    }
    Ok(finish(BoundKind::AGrad, p, samples, DEFAULT_SPREAD))
}

pub fn verify_bound_c(fields: &[ScalarField], p: f64, params: LandauParams) -> Result<BoundReport> {
    check_window(BoundKind::C, params.gamma, p)?;
    check_fields(fields)?;
    let op = LandauOperator::new(fields[0].grid, params)?;
    let g = params.gamma;
    let mut samples = Vec::new();
    for (k, h) in fields.iter().enumerate() {
        let lhs = op.coeff_c(h)?.lp_norm(f64::INFINITY);
        let rhs = norm_rhs(h, 1.0 + p * g / 3.0, conjugate(p), -g * p / 3.0);
        samples.push(BoundSample { label: format!("field{k}"), lhs, rhs, ratio: lhs / rhs });
    }
    Ok(finish(BoundKind::C, p, samples, DEFAULT_SPREAD))
}

/// `1 <= p < 3/(3+s) < r <= ∞` for `-3 < s < 0`.
pub fn splitting_window(s: f64, p: f64, r: f64) -> Result<()> {
    if !(s > -3.0 && s < 0.0) {
        return invalid(format!("splitting exponent s must lie in (-3, 0), got {s}"));
    }
    let crit = 3.0 / (3.0 + s);
    if !(p >= 1.0 && p < crit && r > crit) {
        return invalid(format!("need 1 <= p < {crit:.4} < r, got p = {p}, r = {r}"));
    }
    Ok(())
}

pub fn splitting_rhs(h: &ScalarField, s: f64, p: f64, r: f64, radius: f64) -> f64 {
    let term = |q: f64| {
        let e = if q.is_infinite() { s + 3.0 } else { s + 3.0 - 3.0 / q };
        radius.powf(e) * h.lp_norm(q)
    };
    term(p) + term(r)
}

/// Splitting estimate at each radius; samples are indexed by radius.
pub fn verify_splitting(h: &ScalarField, s: f64, p: f64, r: f64, radii: &[f64]) -> Result<BoundReport> {
    splitting_window(s, p, r)?;
    if radii.is_empty() || radii.iter().any(|x| !(*x > 0.0)) {
        return invalid("radii must be positive");
    }
    if h.max_abs() == 0.0 {
        let samples = radii.iter().map(|&rad| BoundSample { label: format!("R={rad}"), lhs: 0.0, rhs: 0.0, ratio: 0.0 }).collect();
        return Ok(BoundReport { kind: BoundKind::Splitting, exponent: p, samples, fitted_constant: 0.0, spread: 1.0, pass: true });
    }
    check_fields(std::slice::from_ref(h))?;
    let conv = RadialConvolution::new(h.grid, s, 1.0)?;
    let lhs = conv.apply(h).lp_norm(f64::INFINITY);
    let samples = radii
        .iter()
        .map(|&rad| {
            let rhs = splitting_rhs(h, s, p, r, rad);
            BoundSample { label: format!("R={rad}"), lhs, rhs, ratio: lhs / rhs }
        })
        .collect();
    let mut rep = finish(BoundKind::Splitting, p, samples, f64::INFINITY);
    rep.pass = rep.samples.iter().all(|x| x.ratio <= rep.fitted_constant && x.ratio.is_finite());
    Ok(rep)
}

/// Optimised form `‖h‖_p^{p(s+3)/3} ‖h‖_∞^{1-p(s+3)/3}` of the splitting estimate with `r = ∞`.
pub fn splitting_optimized(h: &ScalarField, s: f64, p: f64) -> f64 {
    let a = p * (s + 3.0) / 3.0;
    h.lp_norm(p).powf(a) * h.lp_norm(f64::INFINITY).powf(1.0 - a)
}

/// Seeded family of positive test fields: sums of one to three anisotropic
/// Gaussians with random centers, widths and masses.
pub fn random_fields(grid: GridSpec, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = grid.spacing();
    let reach = 0.2 * grid.extent;
    (0..count)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let parts: Vec<Gaussian> = (0..k)
                .map(|_| Gaussian {
                    center: [0; 3].map(|_| rng.random_range(-reach..reach)),
                    sigma: [0; 3].map(|_| rng.random_range(1.5 * h..1.5 * h + 0.1 * grid.extent)),
                    mass: 10f64.powf(rng.random_range(-1.0..1.0)),
                })
                .collect();
            ScalarField::from_fn(grid, |v| parts.iter().map(|g| g.eval(v)).sum())
        })
        .collect()
}
