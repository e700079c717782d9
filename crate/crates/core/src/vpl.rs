//! Vlasov-Poisson-Landau coupling for an isolated system (no neutralizing
//! background): the interaction force, its rescaling, the profile residual and
//! the entropy-weighted functional.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, norm, Cutoff, Density, GridSpec, ScalarField};
use crate::kernels::CoulombForce;
use crate::landau::{LandauOperator, LandauParams};
use crate::profile::{cauchy, transport_part_with, NormCheck, ProfileDecomposition, ResidualField, YProfile};
use crate::quad::{composite, gauss_on, sphere_rule};
use crate::report::{extrapolate, loglog_slope, LimitReport};
use crate::stencil::diff1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;
use std::f64::consts::PI;

pub const VPL_GAMMA: f64 = -3.0;
pub const VPL_THETA: f64 = -1.0 / 3.0;

/// `F = C ∫ (x − z)/|x − z|³ ρ(z) dz` on a grid.
#[derive(Clone, Debug)]
pub struct ForceField {
    pub constant: f64,
    pub components: [ScalarField; 3],
}

impl ForceField {
    pub fn grid(&self) -> GridSpec {
        self.components[0].grid
    }

    pub fn at(&self, x: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| self.components[k].interpolate(x))
    }

    pub fn at_node(&self, i: usize) -> [f64; 3] {
        [0, 1, 2].map(|k| self.components[k].data[i])
    }

    /// `(1/4π) ∮_{|x|=r} F·n dS` by sphere quadrature on interpolated values.
    pub fn flux_over_4pi(&self, radius: f64) -> f64 {
        let rule = sphere_rule(24, 48);
        let s: f64 = rule.iter().map(|(e, w)| w * dot(self.at(e.map(|c| c * radius)), *e)).sum();
        s * radius * radius / (4.0 * PI)
    }
}

pub fn compute_force(rho: &ScalarField, constant: f64) -> Result<ForceField> {
    if rho.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::OutOfRange("density must be finite".into()));
    }
    if rho.data.iter().any(|&x| x < 0.0) {
        return Err(Error::OutOfRange("density must be non-negative".into()));
    }
    Ok(ForceField { constant, components: CoulombForce::new(rho.grid, constant).apply(rho) })
}

/// `∫_{|x|<r} ρ` by ball quadrature on interpolated values.
pub fn enclosed_mass(rho: &ScalarField, radius: f64) -> f64 {
    crate::quad::ball_integral(radius, |x| rho.interpolate(x))
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussLawReport {
    pub radii: Vec<f64>,
    pub flux_over_4pi_c: Vec<f64>,
    pub enclosed: Vec<f64>,
    pub max_relative_error: f64,
    pub pass: bool,
}

/// Flux of `F` through spheres against `4π C` times the enclosed mass.
pub fn gauss_law(rho: &ScalarField, force: &ForceField, radii: &[f64], tol: f64) -> Result<GaussLawReport> {
    if force.constant == 0.0 {
        return invalid("Gauss law check needs a nonzero coupling");
    }
    let mut flux = Vec::new();
    let mut enc = Vec::new();
    let mut err: f64 = 0.0;
    for &r in radii {
        if !(r > 0.0) || r > rho.grid.extent - 3.0 * rho.grid.spacing() {
            return invalid(format!("sphere radius {r} must fit inside the grid"));
        }
        let f = force.flux_over_4pi(r) / force.constant;
        let m = enclosed_mass(rho, r);
        err = err.max((f - m).abs() / m.abs().max(1e-300));
        flux.push(f);
        enc.push(m);
    }
    Ok(GaussLawReport { radii: radii.to_vec(), flux_over_4pi_c: flux, enclosed: enc, max_relative_error: err, pass: err <= tol })
}

#[derive(Clone, Debug, Serialize)]
pub struct ForceIdentity {
    pub t: f64,
    pub max_mismatch: f64,
    pub scale: f64,
    pub relative: f64,
}

/// Compares `F[ρ_φ + (−t)^{−2} ρ_g(·/(−t)^{2/3})]((−t)^{2/3} y)` with
/// `F[ρ_φ]((−t)^{2/3} y) + (−t)^{−4/3} F[ρ_g](y)` at the nodes of `y_grid`.
///
/// The left side lives on the y-grid scaled by `(−t)^{2/3}`, so no interpolation enters.
pub fn rescaled_force_identity(rho_phi: &dyn Density, rho_g: &dyn Density, y_grid: GridSpec, t: f64, constant: f64) -> Result<ForceIdentity> {
    if !(t < 0.0) {
        return invalid("rescaling needs t < 0");
    }
    let tau = (-t).powf(2.0 / 3.0);
    let x_grid = y_grid.scaled(tau)?;
    let total = ScalarField::from_fn(x_grid, |x| rho_phi.eval(x) + (-t).powi(-2) * rho_g.eval(x.map(|c| c / tau)));
    let phi = ScalarField::from_fn(x_grid, |x| rho_phi.eval(x));
    let g = ScalarField::from_fn(y_grid, |y| rho_g.eval(y));
    let lhs = compute_force(&total, constant)?;
    let f_phi = compute_force(&phi, constant)?;
    let f_g = compute_force(&g, constant)?;
    let k = (-t).powf(-4.0 / 3.0);
    let mut mism: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..y_grid.len() {
        for d in 0..3 {
            let l = lhs.components[d].data[i];
            let r = f_phi.components[d].data[i] + k * f_g.components[d].data[i];
            mism = mism.max((l - r).abs());
            scale = scale.max(l.abs());
        }
    }
    Ok(ForceIdentity { t, max_mismatch: mism, scale, relative: if scale > 0.0 { mism / scale } else { mism } })
}

/// Mass of a y-profile inside the ball of radius `r` about its center.
fn enclosed_y_mass(a: &YProfile, r: f64) -> Result<f64> {
    match *a {
        YProfile::Gaussian { width, amplitude, .. } => {
            let x = r / width;
            Ok(amplitude * (2.0 * PI * width * width).powf(1.5) * (erf(x / 2f64.sqrt()) - (2.0 / PI).sqrt() * x * (-0.5 * x * x).exp()))
        }
        YProfile::PowerTail { width, amplitude, exponent } => {
            if exponent <= 3.0 {
                return invalid("power-tail y-profile is not integrable");
            }
            let s: f64 = gauss_on(24, 0.0, r).iter().map(|&(s, w)| w * s * s * (1.0 + s * s / (width * width)).powf(-exponent / 2.0)).sum();
            Ok(4.0 * PI * amplitude * s)
        }
    }
}

fn y_center(a: &YProfile) -> [f64; 3] {
    match *a {
        YProfile::Gaussian { center, .. } => center,
        YProfile::PowerTail { .. } => [0.0; 3],
    }
}

/// Total `y`-mass of a profile.
pub fn y_mass(a: &YProfile) -> Result<f64> {
    match *a {
        YProfile::Gaussian { width, amplitude, .. } => Ok(amplitude * (2.0 * PI * width * width).powf(1.5)),
        YProfile::PowerTail { width, amplitude, exponent } => {
            if exponent <= 3.0 {
                return invalid("power-tail y-profile is not integrable");
            }
            let k = exponent;
            let beta = statrs::function::beta::beta(1.5, (k - 3.0) / 2.0);
            Ok(2.0 * PI * amplitude * width.powi(3) * beta)
        }
    }
}

fn require_integrable(g: &ProfileDecomposition) -> Result<()> {
    if g.q.as_ref().map(|q| q.max_abs() > 0.0).unwrap_or(false) {
        return invalid("an isolated system needs g integrable in y; the y-independent part must vanish");
    }
    for t in &g.terms {
        y_mass(&t.a)?;
    }
    Ok(())
}

/// `F[g](y)` from `ρ_g(y) = Σ_k a_k(y) ∫ b_k`, using the radial symmetry of each `a_k`.
pub fn profile_force(g: &ProfileDecomposition, constant: f64, y: [f64; 3]) -> Result<[f64; 3]> {
    require_integrable(g)?;
    let masses: Vec<f64> = g.terms.iter().map(|t| t.b.integral()).collect();
    force_with_masses(g, &masses, constant, y)
}

fn force_with_masses(g: &ProfileDecomposition, masses: &[f64], constant: f64, y: [f64; 3]) -> Result<[f64; 3]> {
    let mut f = [0.0; 3];
    for (t, &m) in g.terms.iter().zip(masses) {
        let c = y_center(&t.a);
        let d = [y[0] - c[0], y[1] - c[1], y[2] - c[2]];
        let r = norm(d);
        if r == 0.0 {
            continue;
        }
        let s = constant * m * enclosed_y_mass(&t.a, r)? / (r * r * r);
        for k in 0..3 {
            f[k] += s * d[k];
        }
    }
    Ok(f)
}

fn coulomb_operator(grid: GridSpec) -> Result<LandauOperator> {
    LandauOperator::new(grid, LandauParams::new(VPL_GAMMA)?)
}

/// `g + ⅔ y·∇_y g − ⅓ w·∇_w g + w·∇_y g + F[g]·∇_w g − Q(g,g)` at each `y` point.
pub fn vpl_profile_residual(g: &ProfileDecomposition, constant: f64, y_points: &[[f64; 3]]) -> Result<ResidualField> {
    require_integrable(g)?;
    let op = coulomb_operator(g.w_grid)?;
    let mut fields = Vec::with_capacity(y_points.len());
    for &y in y_points {
        let mut r = transport_part_with(g, y, 1.0 + VPL_THETA, VPL_THETA);
        let gy = g.at_y(y);
        let force = profile_force(g, constant, y)?;
        for k in 0..3 {
            r.axpy(force[k], &diff1(&gy, k));
        }
        r.axpy(-1.0, &op.q_divergence(&gy)?);
        fields.push(r);
    }
    Ok(ResidualField { y_points: y_points.to_vec(), fields })
}

/// Radial-angular rule in `y` covering `|y| ≤ reach`.
fn y_rule(reach: f64) -> Vec<([f64; 3], f64)> {
    let mut breaks = vec![0.0];
    let mut b = 0.5;
    while b < reach.min(6.0) {
        breaks.push(b);
        b += 0.5;
    }
    let mut b = 6.0;
    while b < reach {
        b = (b * 1.5).min(reach);
        breaks.push(b);
    }
    if *breaks.last().unwrap() < reach {
        breaks.push(reach);
    }
    let radial = composite(&breaks, 6);
    let sphere = sphere_rule(8, 16);
    let mut out = Vec::with_capacity(radial.len() * sphere.len());
    for &(r, wr) in &radial {
        for (e, we) in &sphere {
            out.push((e.map(|c| c * r), wr * we * r * r));
        }
    }
    out
}

/// Per-`(R₁, R₂)` pieces of the log-weighted pairing.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyTable {
    pub w_radii: Vec<f64>,
    pub y_radii: Vec<f64>,
    /// `∫∫ χ_{R₁} χ_{R₂} log g · (transport + force)` with stencil derivatives
    pub pairing: Vec<Vec<f64>>,
    /// `∫∫ g χ_{R₁} χ_{R₂}`
    pub mass: Vec<Vec<f64>>,
    /// the four `(g ln g − g)` cutoff-derivative terms
    pub remainder: Vec<Vec<f64>>,
    /// `∫∫ χ_{R₁} χ_{R₂} log g Q(g,g)`
    pub collision: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyFunctional {
    pub table: EntropyTable,
    pub mass: LimitReport,
    pub pairing: LimitReport,
    pub collision: LimitReport,
    /// `∫ g dw dy` from the closed-form y-masses
    pub total_mass: f64,
    /// `−lim ∫∫ log g Q(g,g)`, non-negative
    pub dissipation: f64,
    /// remainder after the `R₁` limit, per `R₂`
    pub remainder_decay: Vec<f64>,
    pub remainder_slope: Option<f64>,
    /// `lim mass + lim remainder + dissipation`; zero for a solution
    pub gap: f64,
    pub refuted: bool,
}

fn limit_in_both(w_radii: &[f64], y_radii: &[f64], table: &[Vec<f64>], abs_tol: f64) -> Result<(LimitReport, Vec<f64>)> {
    let mut inner = Vec::with_capacity(y_radii.len());
    for row in table {
        let rep = extrapolate(w_radii, row, abs_tol)?;
        inner.push(rep.limit.ok_or_else(|| Error::NonConvergent(format!("R1 sequence: {}", rep.note)))?);
    }
    Ok((extrapolate(y_radii, &inner, abs_tol)?, inner))
}

/// Pairs the profile equation with `χ_{R₁}(w) χ_{R₂}(y) log g` and sends `R₁` then `R₂` to infinity.
pub fn vpl_entropy_functional(g: &ProfileDecomposition, constant: f64, w_radii: &[f64], y_radii: &[f64], floor: f64) -> Result<EntropyFunctional> {
    require_integrable(g)?;
    if g.terms.iter().any(|t| !t.a.is_nonnegative() || t.b.data.iter().any(|&x| x < 0.0)) {
        return invalid("entropy functional needs a non-negative profile");
    }
    if floor.is_nan() || floor < 0.0 {
        return invalid("floor must be non-negative");
    }
    let grid = g.w_grid;
    for &r in w_radii {
        if 2.0 * r > grid.extent {
            return invalid(format!("w cutoff {r} exceeds half the grid extent"));
        }
    }
    let zero = || vec![vec![0.0; w_radii.len()]; y_radii.len()];
    let total_mass: f64 = g.terms.iter().map(|t| Ok(y_mass(&t.a)? * t.b.integral())).sum::<Result<f64>>()?;
    if g.is_zero() {
        let rep = extrapolate(y_radii, &vec![0.0; y_radii.len()], 0.0)?;
        let table = EntropyTable { w_radii: w_radii.to_vec(), y_radii: y_radii.to_vec(), pairing: zero(), mass: zero(), remainder: zero(), collision: zero() };
        return Ok(EntropyFunctional {
            table,
            mass: rep.clone(),
            pairing: rep.clone(),
            collision: rep,
            total_mass: 0.0,
            dissipation: 0.0,
            remainder_decay: vec![0.0; y_radii.len()],
            remainder_slope: None,
            gap: 0.0,
            refuted: false,
        });
    }
    if !(floor > 0.0) {
        return invalid("a nonzero profile needs a positive floor inside the logarithm");
    }
    let r_terms = g.terms.len();
    let op = coulomb_operator(grid)?;
    let mut qkl = vec![vec![ScalarField::zeros(grid); r_terms]; r_terms];
    for k in 0..r_terms {
        for l in k..r_terms {
            let mut q = op.q_divergence_bilinear(&g.terms[k].b, &g.terms[l].b)?;
            if l != k {
                q.axpy(1.0, &op.q_divergence_bilinear(&g.terms[l].b, &g.terms[k].b)?);
            }
            qkl[k][l] = q;
        }
    }
    let grads: Vec<[Vec<f64>; 3]> = g.terms.iter().map(|t| [0, 1, 2].map(|d| diff1(&t.b, d).data)).collect();
    let w_cut: Vec<Vec<(f64, [f64; 3])>> = w_radii
        .iter()
        .map(|&r| {
            let c = Cutoff::new(r)?;
            Ok((0..grid.len()).map(|i| (c.value(grid.point(i)), c.gradient(grid.point(i)))).collect())
        })
        .collect::<Result<_>>()?;
    let y_cuts: Vec<Cutoff> = y_radii.iter().map(|&r| Cutoff::new(r)).collect::<Result<_>>()?;
    let reach = 2.0 * y_radii.iter().cloned().fold(0.0, f64::max);
    let rule = y_rule(reach);
    let amax = g.terms.iter().map(|t| t.a.eval(y_center(&t.a)).abs()).fold(0.0, f64::max);
    let nw = w_radii.len();
    let ny = y_radii.len();
    let masses: Vec<f64> = g.terms.iter().map(|t| t.b.integral()).collect();
    // [pairing, mass, remainder, collision] per (R₂, R₁)
    let acc = rule
        .par_iter()
        .filter(|(y, _)| g.terms.iter().any(|t| t.a.eval(*y).abs() > 1e-30 * amax))
        .map(|&(y, wy)| -> Result<Vec<f64>> {
            let mut out = vec![0.0; 4 * nw * ny];
            let a: Vec<f64> = g.terms.iter().map(|t| t.a.eval(y)).collect();
            let ga: Vec<[f64; 3]> = g.terms.iter().map(|t| t.a.grad(y)).collect();
            let force = force_with_masses(g, &masses, constant, y)?;
            let chi_y: Vec<(f64, [f64; 3])> = y_cuts.iter().map(|c| (c.value(y), c.gradient(y))).collect();
            for i in 0..grid.len() {
                let ww = grid.weight(i);
                if ww == 0.0 {
                    continue;
                }
                let w = grid.point(i);
                let mut gv = 0.0;
                let mut gy = [0.0; 3];
                let mut gw = [0.0; 3];
                for (k, t) in g.terms.iter().enumerate() {
                    let b = t.b.data[i];
                    gv += a[k] * b;
                    for d in 0..3 {
                        gy[d] += ga[k][d] * b;
                        gw[d] += a[k] * grads[k][d][i];
                    }
                }
                if gv <= 0.0 && floor == 0.0 {
                    continue;
                }
                let lg = gv.max(floor).ln();
                let ent = gv * lg - gv;
                let transport = gv + (1.0 + VPL_THETA) * dot(y, gy) + VPL_THETA * dot(w, gw) + dot(w, gy) + dot(force, gw);
                let mut coll = 0.0;
                for k in 0..r_terms {
                    for l in k..r_terms {
                        coll += a[k] * a[l] * qkl[k][l].data[i];
                    }
                }
                for (yi, &(cy, dcy)) in chi_y.iter().enumerate() {
                    if cy == 0.0 && dcy == [0.0; 3] {
                        continue;
                    }
                    for (wi, wc) in w_cut.iter().enumerate() {
                        let (cw, dcw) = wc[i];
                        let base = 4 * (yi * nw + wi);
                        let wt = wy * ww;
                        out[base] += wt * cy * cw * lg * transport;
                        out[base + 1] += wt * cy * cw * gv;
                        out[base + 2] += wt
                            * ent
                            * (-(1.0 + VPL_THETA) * cw * dot(y, dcy) - VPL_THETA * cy * dot(w, dcw) - cw * dot(w, dcy) - cy * dot(force, dcw));
                        out[base + 3] += wt * cy * cw * lg * coll;
                    }
                }
            }
            Ok(out)
        })
        .try_reduce(
            || vec![0.0; 4 * nw * ny],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(&y) {
                    *a += b;
                }
                Ok(x)
            },
        )?;
    let pick = |j: usize| -> Vec<Vec<f64>> { (0..ny).map(|yi| (0..nw).map(|wi| acc[4 * (yi * nw + wi) + j]).collect()).collect() };
    let table = EntropyTable { w_radii: w_radii.to_vec(), y_radii: y_radii.to_vec(), pairing: pick(0), mass: pick(1), remainder: pick(2), collision: pick(3) };
    let tol = 1e-6 * total_mass.abs();
    let (mass, _) = limit_in_both(w_radii, y_radii, &table.mass, tol)?;
    let (pairing, _) = limit_in_both(w_radii, y_radii, &table.pairing, tol)?;
    let (collision, _) = limit_in_both(w_radii, y_radii, &table.collision, tol)?;
    let (rem, remainder_decay) = limit_in_both(w_radii, y_radii, &table.remainder, tol)?;
    let positive: Vec<(f64, f64)> = y_radii.iter().zip(&remainder_decay).filter(|(_, v)| v.abs() > 0.0).map(|(r, v)| (*r, v.abs())).collect();
    let remainder_slope = if positive.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        loglog_slope(&x, &y).ok()
    } else {
        None
    };
    let dissipation = -collision.limit.ok_or_else(|| Error::NonConvergent(format!("collision pairing: {}", collision.note)))?;
    let m = mass.limit.ok_or_else(|| Error::NonConvergent(format!("mass term: {}", mass.note)))?;
    let gap = m + rem.limit.unwrap_or(f64::NAN) + dissipation;
    Ok(EntropyFunctional {
        table,
        mass,
        pairing,
        collision,
        total_mass,
        dissipation,
        remainder_decay,
        remainder_slope,
        gap,
        refuted: gap > 0.0 && dissipation >= -1e-8 * m.abs(),
    })
}

/// Growing-radius check that `(1 + |w|)(g ln g − g)` is integrable over `y` and `w`.
pub fn entropy_moment_check(g: &ProfileDecomposition, y_radii: &[f64], floor: f64) -> Result<NormCheck> {
    require_integrable(g)?;
    let grid = g.w_grid;
    let mut values = Vec::with_capacity(y_radii.len());
    for &r in y_radii {
        let rule = y_rule(r);
        let v: f64 = rule
            .par_iter()
            .map(|&(y, wy)| {
                let gy = g.at_y(y);
                wy * (0..grid.len())
                    .map(|i| {
                        let x = gy.data[i];
                        if x <= 0.0 {
                            return 0.0;
                        }
                        grid.weight(i) * (1.0 + norm(grid.point(i))) * (x * x.max(floor).ln() - x).abs()
                    })
                    .sum::<f64>()
            })
            .sum();
        values.push(v);
    }
    let pass = cauchy(&values);
    Ok(NormCheck { name: "(1+|w|)(g ln g - g) in L1".into(), radii: y_radii.to_vec(), values, pass })
}
