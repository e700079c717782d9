//! Non-cutoff Boltzmann collisions: geometry, the `Q₁ + Q₂` splitting with the
//! Carleman kernel, the symmetrized weak form, and Monte-Carlo oracles.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, norm, Cutoff, Density, Gaussian, GridSpec, ScalarField};
use crate::kernels::RadialConvolution;
use crate::profile::{profile_residual, CollisionFunctional, ProfileDecomposition, ResidualField, TestWeight};
use crate::quad::{composite, gauss_on, orthonormal_frame, sphere_rule};
use crate::report::{extrapolate, LimitReport};
use crate::selfsim::{Mode, SelfSimParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    pub gamma: f64,
    pub s_exp: f64,
    /// Smallest deflection angle resolved by quadrature.
    pub eta_min: f64,
    /// Constant in `Q₂ = C f₂ (|z|^γ ∗ f₁)`; `None` uses [`CollisionParams::cancellation_constant`].
    pub q2_constant: Option<f64>,
}

impl CollisionParams {
    pub fn new(gamma: f64, s_exp: f64) -> Result<Self> {
        if !(gamma > -3.0 && gamma <= 1.0) {
            return invalid(format!("γ must lie in (-3, 1], got {gamma}"));
        }
        if !(s_exp > 0.0 && s_exp < 1.0) {
            return invalid(format!("s must lie in (0, 1), got {s_exp}"));
        }
        if !(gamma + 2.0 * s_exp < 0.0) {
            return invalid(format!("need γ + 2s < 0, got {}", gamma + 2.0 * s_exp));
        }
        Ok(Self { gamma, s_exp, eta_min: 1e-3, q2_constant: None })
    }

    pub fn with_q2_constant(mut self, c: f64) -> Self {
        self.q2_constant = Some(c);
        self
    }

    /// `b(cos η) = η^{−2−2s} (1 + cos η)/2`.
    pub fn angular(&self, eta: f64) -> f64 {
        eta.powf(-2.0 - 2.0 * self.s_exp) * 0.5 * (1.0 + eta.cos())
    }

    /// `B(z, σ) = |z|^γ b(cos η)`.
    pub fn cross_section(&self, r: f64, eta: f64) -> f64 {
        r.powf(self.gamma) * self.angular(eta)
    }

    /// `2π ∫_0^π sin η b(cos η) [cos^{−3−γ}(η/2) − 1] dη`.
    pub fn cancellation_constant(&self) -> f64 {
        let rule = eta_panels(1e-8, 6);
        let s: f64 = rule
            .iter()
            .map(|&(eta, w)| w * eta.sin() * self.angular(eta) * ((eta / 2.0).cos().powf(-3.0 - self.gamma) - 1.0))
            .sum();
        2.0 * PI * s
    }

    pub fn q2_const(&self) -> f64 {
        self.q2_constant.unwrap_or_else(|| self.cancellation_constant())
    }
}

/// Geometric panels in `η` from `eta_min` to `π`.
fn eta_panels(eta_min: f64, order: usize) -> Vec<(f64, f64)> {
    let mut breaks = vec![eta_min];
    let mut b = eta_min;
    while b * 2.0 < PI / 2.0 {
        b *= 2.0;
        breaks.push(b);
    }
    breaks.push(PI / 2.0);
    breaks.push(3.0 * PI / 4.0);
    breaks.push(PI);
    composite(&breaks, order)
}

/// Post-collisional velocities and deflection angle.
pub fn collide(v: [f64; 3], vs: [f64; 3], sigma: [f64; 3]) -> Result<([f64; 3], [f64; 3], f64)> {
    if (norm(sigma) - 1.0).abs() > 1e-12 {
        return invalid("σ must be a unit vector");
    }
    let u = [v[0] - vs[0], v[1] - vs[1], v[2] - vs[2]];
    let r = norm(u);
    let mut vp = [0.0; 3];
    let mut vsp = [0.0; 3];
    for d in 0..3 {
        let m = 0.5 * (v[d] + vs[d]);
        vp[d] = m + 0.5 * r * sigma[d];
        vsp[d] = m - 0.5 * r * sigma[d];
    }
    let eta = if r > 0.0 { (dot(u, sigma) / r).clamp(-1.0, 1.0).acos() } else { f64::NAN };
    Ok((vp, vsp, eta))
}

/// `Q₂(f₁, f₂) = C f₂ (|z|^γ ∗ f₁)`.
pub fn q2(f1: &ScalarField, f2: &ScalarField, p: &CollisionParams) -> Result<ScalarField> {
    f1.check_same_grid(f2)?;
    let conv = RadialConvolution::new(f1.grid, p.gamma, p.q2_const())?;
    Ok(conv.apply(f1).mul(f2))
}

/// Quadrature orders for the Carleman kernel and `Q₁`.
#[derive(Clone, Debug)]
pub struct Q1Quadrature {
    /// nodes on the plane orthogonal to `h`: radial `t` and angle `α`
    pub t_nodes: Vec<(f64, f64)>,
    pub n_alpha: usize,
    /// hemisphere of directions of `h`
    pub directions: Vec<([f64; 3], f64)>,
    /// radial nodes in `|h|` beyond the Taylor ball
    pub rho_nodes: Vec<(f64, f64)>,
    pub taylor_radius: f64,
    /// `(4/ρ) w_t t r^{γ−1} b(cos η)` for each `(ρ, t)` node pair, row-major in `ρ`
    table: Vec<f64>,
    /// `w_t t^{γ+2s+2}`
    moment: Vec<f64>,
}

impl Q1Quadrature {
    pub fn new(extent: f64, p: &CollisionParams) -> Self {
        Self::for_extent(extent).tabulate(p)
    }

    fn tabulate(mut self, p: &CollisionParams) -> Self {
        let nt = self.t_nodes.len();
        self.table = Vec::with_capacity(self.rho_nodes.len() * nt);
        for &(rho, _) in &self.rho_nodes {
            for &(t, wt) in &self.t_nodes {
                let r = (rho * rho + t * t).sqrt();
                self.table.push(4.0 / rho * wt * t * r.powf(p.gamma - 1.0) * p.angular(2.0 * (rho / t).atan()));
            }
        }
        self.moment = self.t_nodes.iter().map(|&(t, w)| w * t.powf(p.gamma + 2.0 * p.s_exp + 2.0)).collect();
        self
    }

    fn for_extent(extent: f64) -> Self {
        let reach = 2.0 * extent * 3f64.sqrt();
        let mut tb = vec![0.0];
        let mut b = 1.0 / 256.0;
        while b < 1.0 {
            tb.push(b);
            b *= 2.0;
        }
        let mut x = 1.0;
        while x < reach {
            tb.push(x);
            x += 0.5;
        }
        tb.push(reach);
        let taylor_radius = 0.05;
        let mut rb = vec![taylor_radius];
        let mut r: f64 = taylor_radius;
        while r < 1.0 {
            r *= 2.0;
            rb.push(r.min(1.0));
        }
        let mut r = 1.0;
        while r < reach {
            r += 0.5;
            rb.push(r);
        }
        let directions = sphere_rule(6, 12).into_iter().filter(|(e, _)| e[2] > 0.0).map(|(e, w)| (e, 2.0 * w)).collect();
        Self { t_nodes: composite(&tb, 4), n_alpha: 16, directions, rho_nodes: composite(&rb, 4), taylor_radius, table: Vec::new(), moment: Vec::new() }
    }

    /// Denser plane rule used for single kernel evaluations.
    pub fn fine(extent: f64, p: &CollisionParams) -> Self {
        let mut q = Self::for_extent(extent);
        let reach = 2.0 * extent * 3f64.sqrt();
        let mut tb = vec![0.0];
        let mut b = 1.0 / 1024.0;
        while b < 1.0 {
            tb.push(b);
            b *= 2.0;
        }
        let mut x = 1.0;
        while x < reach {
            tb.push(x);
            x += 0.25;
        }
        tb.push(reach);
        q.t_nodes = composite(&tb, 6);
        q.n_alpha = 32;
        q.tabulate(p)
    }
}

/// Circle averages `∫_0^{2π} f₁(v + t(cos α e₁ + sin α e₂)) dα` at each `t` node.
fn circle_sums(f1: &dyn Density, v: [f64; 3], e: [f64; 3], quad: &Q1Quadrature) -> Vec<f64> {
    let (e1, e2) = orthonormal_frame(e);
    let na = quad.n_alpha;
    let trig: Vec<(f64, f64)> = (0..na).map(|a| (2.0 * PI * a as f64 / na as f64).sin_cos()).collect();
    quad.t_nodes
        .iter()
        .map(|&(t, _)| {
            let mut s = 0.0;
            for &(sa, ca) in &trig {
                let w = [t * (ca * e1[0] + sa * e2[0]), t * (ca * e1[1] + sa * e2[1]), t * (ca * e1[2] + sa * e2[2])];
                s += f1.eval([v[0] + w[0], v[1] + w[1], v[2] + w[2]]);
            }
            s * 2.0 * PI / na as f64
        })
        .collect()
}

/// `K(v, ρ e) = (4/ρ) ∫_0^∞ F(t) t r^{γ−1} b(cos η) dt` with `r² = ρ² + t²`, `η = 2 atan(ρ/t)`.
fn kernel_from_sums(sums: &[f64], rho: f64, quad: &Q1Quadrature, p: &CollisionParams) -> f64 {
    let mut acc = 0.0;
    for (&(t, wt), &f) in quad.t_nodes.iter().zip(sums) {
        if f == 0.0 {
            continue;
        }
        let r = (rho * rho + t * t).sqrt();
        let eta = 2.0 * (rho / t).atan();
        acc += wt * f * t * r.powf(p.gamma - 1.0) * p.angular(eta);
    }
    4.0 / rho * acc
}

/// `P(e) = ∫_{w ⊥ e} f₁(v + w) |w|^{γ+2s+1} dw`, the small-`ρ` profile of the kernel.
fn plane_moment(sums: &[f64], quad: &Q1Quadrature) -> f64 {
    quad.moment.iter().zip(sums).map(|(w, f)| w * f).sum()
}

/// Carleman kernel of `Q₁` at `(v, h)`.
pub fn q1_kernel(f1: &dyn Density, v: [f64; 3], h: [f64; 3], extent: f64, p: &CollisionParams) -> Result<f64> {
    let rho = norm(h);
    if rho == 0.0 {
        return invalid("kernel offset h must be nonzero");
    }
    let quad = Q1Quadrature::fine(extent, p);
    let e = h.map(|c| c / rho);
    let sums = circle_sums(f1, v, e, &quad);
    Ok(kernel_from_sums(&sums, rho, &quad, p))
}

/// Small-`|h|` asymptote `2^{−2s} |h|^{−3−2s} P(ĥ)` of the kernel.
pub fn q1_kernel_asymptote(f1: &dyn Density, v: [f64; 3], h: [f64; 3], extent: f64, p: &CollisionParams) -> Result<f64> {
    let rho = norm(h);
    if rho == 0.0 {
        return invalid("kernel offset h must be nonzero");
    }
    let quad = Q1Quadrature::fine(extent, p);
    let sums = circle_sums(f1, v, h.map(|c| c / rho), &quad);
    Ok(2f64.powf(-2.0 * p.s_exp) * rho.powf(-3.0 - 2.0 * p.s_exp) * plane_moment(&sums, &quad))
}

/// `∫_{r < |h| < 2r} K(v, h) dh`.
pub fn annulus_integral(f1: &dyn Density, v: [f64; 3], r: f64, extent: f64, p: &CollisionParams) -> f64 {
    let quad = Q1Quadrature::fine(extent, p);
    let radial = gauss_on(8, r, 2.0 * r);
    quad.directions
        .iter()
        .map(|&(e, we)| {
            let sums = circle_sums(f1, v, e, &quad);
            we * radial.iter().map(|&(rho, wr)| wr * rho * rho * kernel_from_sums(&sums, rho, &quad, p)).sum::<f64>()
        })
        .sum()
}

/// `∫ |z|^{γ+2s} f₁(v + z) dz` by ball quadrature.
pub fn annulus_convolution_factor(f1: &dyn Density, v: [f64; 3], extent: f64, p: &CollisionParams) -> f64 {
    let reach = 2.0 * extent * 3f64.sqrt();
    let mut breaks = vec![0.0];
    let mut b = 1.0 / 64.0;
    while b < reach {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(reach);
    let radial = composite(&breaks, 8);
    let sphere = sphere_rule(16, 32);
    let k = p.gamma + 2.0 * p.s_exp;
    radial
        .iter()
        .map(|&(r, wr)| {
            wr * r.powf(2.0 + k) * sphere.iter().map(|(e, we)| we * f1.eval([v[0] + r * e[0], v[1] + r * e[1], v[2] + r * e[2]])).sum::<f64>()
        })
        .sum()
}

fn hessian_fd(f: &dyn Density, v: [f64; 3], d: f64) -> [[f64; 3]; 3] {
    let at = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut x = v;
        x[a] += sa * d;
        x[b] += sb * d;
        f.eval(x)
    };
    let f0 = f.eval(v);
    let mut h = [[0.0; 3]; 3];
    for a in 0..3 {
        h[a][a] = (at(a, 1.0, a, 0.0) - 2.0 * f0 + at(a, -1.0, a, 0.0)) / (d * d);
        for b in (a + 1)..3 {
            let m = (at(a, 1.0, b, 1.0) - at(a, 1.0, b, -1.0) - at(a, -1.0, b, 1.0) + at(a, -1.0, b, -1.0)) / (4.0 * d * d);
            h[a][b] = m;
            h[b][a] = m;
        }
    }
    h
}

/// `Q₁(f₁, f₂)(v) = ∫ [f₂(v+h) − f₂(v)] K_{f₁}(v, h) dh` at one point.
pub fn q1_at(f1: &dyn Density, f2: &dyn Density, v: [f64; 3], quad: &Q1Quadrature, p: &CollisionParams) -> f64 {
    let f2v = f2.eval(v);
    let hess = hessian_fd(f2, v, 1e-2);
    let eps = quad.taylor_radius;
    let s = p.s_exp;
    let taylor = eps.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) * 0.5 * 2f64.powf(-2.0 * s);
    let mut acc = 0.0;
    for &(e, we) in &quad.directions {
        let sums = circle_sums(f1, v, e, quad);
        let mut hee = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                hee += e[a] * hess[a][b] * e[b];
            }
        }
        let mut part = taylor * hee * plane_moment(&sums, quad);
        let nt = sums.len();
        let live: Vec<usize> = (0..nt).filter(|&k| sums[k] != 0.0).collect();
        for (ri, &(rho, wr)) in quad.rho_nodes.iter().enumerate() {
            let row = &quad.table[ri * nt..(ri + 1) * nt];
            let k: f64 = live.iter().map(|&k| row[k] * sums[k]).sum();
            let plus = f2.eval([v[0] + rho * e[0], v[1] + rho * e[1], v[2] + rho * e[2]]);
            let minus = f2.eval([v[0] - rho * e[0], v[1] - rho * e[1], v[2] - rho * e[2]]);
            part += wr * rho * rho * k * 0.5 * (plus + minus - 2.0 * f2v);
        }
        acc += we * part;
    }
    acc
}

/// `Q₁` at every non-ghost node of `grid`.
pub fn q1(f1: &dyn Density, f2: &dyn Density, grid: GridSpec, p: &CollisionParams) -> Result<ScalarField> {
    let quad = Q1Quadrature::new(grid.extent, p);
    let data: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| if grid.is_ghost(i) { 0.0 } else { q1_at(f1, f2, grid.point(i), &quad, p) })
        .collect();
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConvergent("small-shell sum of Q1 diverged".into()));
    }
    Ok(ScalarField { grid, data })
}

/// `Q_B(f₁, f₂) = Q₁ + Q₂` on the grid of `f2`, reading `f₁` and `f₂` through interpolation.
pub fn q_boltzmann(f1: &ScalarField, f2: &ScalarField, p: &CollisionParams) -> Result<ScalarField> {
    let mut out = q1(f1, f2, f2.grid, p)?;
    out.axpy(1.0, &q2(f1, f2, p)?);
    Ok(out)
}

/// Test function for the weak form, with a bound on its Hessian for the small-angle tail.
pub struct TestFunction<'a> {
    pub f: &'a (dyn Fn([f64; 3]) -> f64 + Sync),
    pub hessian_bound: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeakFormResult {
    pub value: f64,
    /// bound on the contribution of deflections below `eta_min`
    pub tail_bound: f64,
    /// bound on the contribution of pairs dropped as negligible
    pub dropped_bound: f64,
}

/// Angular rule with `sin η b(cos η)` folded into the weights and an even azimuth count.
struct AngularRule {
    eta: Vec<(f64, f64, f64)>,
    azimuth: Vec<(f64, f64)>,
}

impl AngularRule {
    fn new(p: &CollisionParams, n_azimuth: usize) -> Self {
        let eta = eta_panels(p.eta_min, 3)
            .into_iter()
            .map(|(e, w)| (e.cos(), e.sin(), w * e.sin() * p.angular(e)))
            .collect();
        let azimuth = (0..n_azimuth).map(|a| (2.0 * PI * a as f64 / n_azimuth as f64).sin_cos()).collect();
        Self { eta, azimuth }
    }
}

/// Weak form `½∫∫∫ B F(w, w_*) [φ' + φ_*' − φ − φ_*]` on grid node pairs for several tests at once.
///
/// `pair(i, j)` is the symmetric pair density and `tests(w, out)` fills the test values at `w`.
pub fn weak_form_pairs(
    grid: GridSpec,
    pair: &(dyn Fn(usize, usize) -> f64 + Sync),
    nodes: &[usize],
    tests: &(dyn Fn([f64; 3], &mut [f64]) + Sync),
    hessian_bounds: &[f64],
    p: &CollisionParams,
) -> Vec<WeakFormResult> {
    let nt = hessian_bounds.len();
    let rule = AngularRule::new(p, 8);
    let naz = rule.azimuth.len() as f64;
    let h6 = grid.cell_volume().powi(2);
    let pts: Vec<[f64; 3]> = nodes.iter().map(|&i| grid.point(i)).collect();
    let base: Vec<Vec<f64>> = pts
        .iter()
        .map(|&w| {
            let mut out = vec![0.0; nt];
            tests(w, &mut out);
            out
        })
        .collect();
    let (sums, tails) = (0..nodes.len())
        .into_par_iter()
        .map(|a| {
            let mut acc = vec![0.0; nt];
            let mut tail = 0.0;
            let mut buf1 = vec![0.0; nt];
            let mut buf2 = vec![0.0; nt];
            for b in (a + 1)..nodes.len() {
                let pw = pair(nodes[a], nodes[b]);
                if pw == 0.0 {
                    continue;
                }
                let (w, ws) = (pts[a], pts[b]);
                let u = [w[0] - ws[0], w[1] - ws[1], w[2] - ws[2]];
                let r = norm(u);
                let uh = u.map(|c| c / r);
                let (e1, e2) = orthonormal_frame(uh);
                let m = [0.5 * (w[0] + ws[0]), 0.5 * (w[1] + ws[1]), 0.5 * (w[2] + ws[2])];
                let pref = pw * h6 * r.powf(p.gamma);
                for &(ce, se, we) in &rule.eta {
                    for &(sa, ca) in &rule.azimuth {
                        let mut sg = [0.0; 3];
                        for d in 0..3 {
                            sg[d] = ce * uh[d] + se * (ca * e1[d] + sa * e2[d]);
                        }
                        let wp = [m[0] + 0.5 * r * sg[0], m[1] + 0.5 * r * sg[1], m[2] + 0.5 * r * sg[2]];
                        let wsp = [m[0] - 0.5 * r * sg[0], m[1] - 0.5 * r * sg[1], m[2] - 0.5 * r * sg[2]];
                        tests(wp, &mut buf1);
                        tests(wsp, &mut buf2);
                        let k = pref * we * 2.0 * PI / naz;
                        for t in 0..nt {
                            acc[t] += k * (buf1[t] + buf2[t] - base[a][t] - base[b][t]);
                        }
                    }
                }
                tail += pw.abs() * h6 * r.powf(p.gamma + 2.0);
            }
            (acc, tail)
        })
        .reduce(
            || (vec![0.0; nt], 0.0),
            |mut x, y| {
                for t in 0..nt {
                    x.0[t] += y.0[t];
                }
                (x.0, x.1 + y.1)
            },
        );
    let s = p.s_exp;
    let tail_factor = 2.0 * PI * 0.5 * p.eta_min.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    (0..nt)
        .map(|t| WeakFormResult { value: sums[t], tail_bound: tails * tail_factor * hessian_bounds[t], dropped_bound: 0.0 })
        .collect()
}

/// Nodes carrying `g` above a relative threshold, and a bound on what the rest contribute.
fn significant_nodes(g: &ScalarField, rel: f64) -> (Vec<usize>, f64) {
    let grid = g.grid;
    let max = g.max_abs();
    let keep: Vec<usize> = (0..grid.len()).filter(|&i| !grid.is_ghost(i) && g.data[i].abs() > rel * max).collect();
    let dropped_mass: f64 = (0..grid.len()).filter(|&i| !grid.is_ghost(i) && g.data[i].abs() <= rel * max).map(|i| g.data[i].abs()).sum();
    (keep, dropped_mass * grid.cell_volume())
}

/// `∫ φ Q_B(g, g)` through the weak form.
pub fn weak_form(g: &ScalarField, test: &TestFunction, p: &CollisionParams) -> Result<WeakFormResult> {
    let (nodes, dropped) = significant_nodes(g, 1e-8);
    let f = test.f;
    let res = weak_form_pairs(g.grid, &|i, j| g.data[i] * g.data[j], &nodes, &|w, out| out[0] = f(w), &[test.hessian_bound], p);
    let mut r = res[0];
    r.dropped_bound = dropped * g.lp_norm(1.0) * test.hessian_bound;
    Ok(r)
}

/// Scale `∫∫ g g_* |w − w_*|^{γ+2}` used to judge weak-form values.
pub fn pair_scale(g: &ScalarField, gamma: f64) -> f64 {
    let (nodes, _) = significant_nodes(g, 1e-8);
    let grid = g.grid;
    let h6 = grid.cell_volume().powi(2);
    let pts: Vec<[f64; 3]> = nodes.iter().map(|&i| grid.point(i)).collect();
    (0..nodes.len())
        .into_par_iter()
        .map(|a| {
            let mut s = 0.0;
            for b in 0..nodes.len() {
                if a != b {
                    let u = [pts[a][0] - pts[b][0], pts[a][1] - pts[b][1], pts[a][2] - pts[b][2]];
                    s += g.data[nodes[a]].abs() * g.data[nodes[b]].abs() * norm(u).powf(gamma + 2.0);
                }
            }
            s * h6
        })
        .sum()
}

/// Sup of the Hessian of `χ_R ψ` over all `w`, by finite differences along a ray set.
fn cutoff_hessian_bound(radius: f64, weight: TestWeight) -> f64 {
    let cut = Cutoff { radius };
    let mut best: f64 = 0.0;
    for k in 0..=400 {
        let r = 2.2 * radius * k as f64 / 400.0;
        for e in [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]] {
            let n = norm(e);
            let v = e.map(|c| c / n * r);
            let hs = hessian_fd(&|x: [f64; 3]| cut.value(x) * weight.eval(x), v, 1e-3 * radius.max(1.0));
            for row in hs {
                for x in row {
                    best = best.max(x.abs());
                }
            }
        }
    }
    best
}

/// `∫ χ_R(w) ψ(w) Q_B(g, g) dw` along growing `R`, extrapolated.
pub fn cutoff_limit_boltzmann(g: &ScalarField, p: &CollisionParams, radii: &[f64], weight: TestWeight, rel_tol: f64) -> Result<LimitReport> {
    if g.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::OutOfRange("g must be finite".into()));
    }
    let grid = g.grid;
    let moment: f64 = (0..grid.len())
        .map(|i| {
            let r = norm(grid.point(i));
            let tail = if r > 0.0 { r.powf(2.0 + p.gamma) } else { 0.0 };
            grid.weight(i) * g.data[i].abs() * (1.0 + tail)
        })
        .sum();
    if !moment.is_finite() {
        return Err(Error::OutOfRange("(1+|w|^{2+γ}) g is not integrable".into()));
    }
    let cuts: Vec<Cutoff> = radii.iter().map(|&r| Cutoff::new(r)).collect::<Result<_>>()?;
    let bounds: Vec<f64> = radii.iter().map(|&r| cutoff_hessian_bound(r, weight)).collect();
    let (nodes, _) = significant_nodes(g, 1e-8);
    let vals = weak_form_pairs(
        grid,
        &|i, j| g.data[i] * g.data[j],
        &nodes,
        &|w, out| {
            let psi = weight.eval(w);
            for (k, c) in cuts.iter().enumerate() {
                out[k] = c.value(w) * psi;
            }
        },
        &bounds,
        p,
    );
    let values: Vec<f64> = vals.iter().map(|v| v.value).collect();
    let scale = pair_scale(g, p.gamma).max(f64::MIN_POSITIVE);
    let mut rep = extrapolate(radii, &values, rel_tol * scale)?;
    rep.scale = scale;
    rep.predicted = Some(0.0);
    rep.pass = rep.limit.map(|l| l.abs() <= rel_tol * scale).unwrap_or(false);
    Ok(rep)
}

/// Boltzmann collision operator on a fixed grid.
pub struct BoltzmannOperator {
    pub grid: GridSpec,
    pub params: CollisionParams,
    cache: Mutex<Vec<(CacheKey, Vec<Vec<f64>>)>>,
}

#[derive(Clone, PartialEq)]
struct CacheKey {
    basis: Vec<(usize, u64)>,
    weight: TestWeight,
    radii: Vec<u64>,
}

fn checksum(f: &ScalarField) -> u64 {
    f.data.iter().enumerate().fold(0u64, |h, (i, x)| h.rotate_left(5) ^ x.to_bits().wrapping_mul(i as u64 | 1))
}

impl BoltzmannOperator {
    pub fn new(grid: GridSpec, params: CollisionParams) -> Self {
        Self { grid, params, cache: Mutex::new(Vec::new()) }
    }

    /// `∫ χ_R ψ Q(b_k, b_l)` for every unordered pair `k ≤ l`, in row-major upper-triangular order.
    fn pair_table(&self, basis: &[&ScalarField], weight: TestWeight, radii: &[f64]) -> Result<Vec<Vec<f64>>> {
        let key = CacheKey {
            basis: basis.iter().map(|b| (b.data.len(), checksum(b))).collect(),
            weight,
            radii: radii.iter().map(|r| r.to_bits()).collect(),
        };
        if let Some((_, v)) = self.cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(v.clone());
        }
        let grid = self.grid;
        let cuts: Vec<Cutoff> = radii.iter().map(|&x| Cutoff::new(x)).collect::<Result<_>>()?;
        let bounds = vec![0.0; radii.len()];
        let tests = |w: [f64; 3], out: &mut [f64]| {
            let psi = weight.eval(w);
            for (k, cu) in cuts.iter().enumerate() {
                out[k] = cu.value(w) * psi;
            }
        };
        let mut table = Vec::new();
        for k in 0..basis.len() {
            for l in k..basis.len() {
                let (a, b) = (basis[k], basis[l]);
                let mut sum = ScalarField::zeros(grid);
                for (s, (x, y)) in sum.data.iter_mut().zip(a.data.iter().zip(&b.data)) {
                    *s = x.abs() + y.abs();
                }
                let (nodes, _) = significant_nodes(&sum, 1e-8);
                let pair = |i: usize, j: usize| 0.5 * (a.data[i] * b.data[j] + b.data[i] * a.data[j]);
                let vals = weak_form_pairs(grid, &pair, &nodes, &tests, &bounds, &self.params);
                table.push(vals.iter().map(|v| v.value).collect());
            }
        }
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= 8 {
            cache.remove(0);
        }
        cache.push((key, table.clone()));
        Ok(table)
    }
}

impl CollisionFunctional for BoltzmannOperator {
    fn weighted(&self, basis: &[&ScalarField], c: &[Vec<f64>], weight: TestWeight, radii: &[f64]) -> Result<Vec<f64>> {
        let table = self.pair_table(basis, weight, radii)?;
        let mut out = vec![0.0; radii.len()];
        let mut idx = 0;
        for k in 0..basis.len() {
            for l in k..basis.len() {
                let coef = if k == l { c[k][k] } else { c[k][l] + c[l][k] };
                for (o, v) in out.iter_mut().zip(&table[idx]) {
                    *o += coef * v;
                }
                idx += 1;
            }
        }
        Ok(out)
    }

    fn collision(&self, g: &ScalarField) -> Result<ScalarField> {
        q_boltzmann(g, g, &self.params)
    }

    fn mode(&self, homogeneous: bool) -> Mode {
        if homogeneous {
            Mode::BoltzmannHom
        } else {
            Mode::BoltzmannInhom
        }
    }

    fn params(&self, theta: f64) -> SelfSimParams {
        SelfSimParams { gamma: self.params.gamma, theta, s_exp: Some(self.params.s_exp), t: -1.0, lambda: 1.0, alpha: 0.0 }
    }
}

/// Boltzmann profile residual at the default `y` samples.
pub fn boltzmann_profile_residual(g: &ProfileDecomposition, p: &CollisionParams, theta: f64) -> Result<ResidualField> {
    let op = BoltzmannOperator::new(g.w_grid, *p);
    profile_residual(g, theta, &op, &crate::profile::default_y_samples(g))
}

/// Powers of `(−t)` in the rescaled Boltzmann expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoltzmannExponents {
    pub q1_phi_g: f64,
    pub q1_g_phi: f64,
    pub c_phi_g: f64,
    pub c_g_phi: f64,
    pub phi_phi: f64,
}

pub fn expansion_exponents(theta: f64, gamma: f64, s: f64) -> BoltzmannExponents {
    let amp = 1.0 + theta * (3.0 + gamma);
    let m = 1.0 + amp;
    BoltzmannExponents {
        q1_phi_g: m - amp - 2.0 * s * theta,
        q1_g_phi: m - amp + (gamma + 2.0 * s + 3.0) * theta,
        c_phi_g: m - amp,
        c_g_phi: m - amp + (gamma + 3.0) * theta,
        phi_phi: m,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn sample_eta(rng: &mut ChaCha8Rng, s: f64) -> (f64, f64) {
    let a = 2.0 - 2.0 * s;
    let u: f64 = rng.random::<f64>().max(1e-300);
    let eta = PI * u.powf(1.0 / a);
    let dens = a * eta.powf(a - 1.0) / PI.powf(a);
    (eta, dens)
}

fn sigma_from(uh: [f64; 3], eta: f64, phi: f64) -> [f64; 3] {
    let (e1, e2) = orthonormal_frame(uh);
    let (se, ce) = eta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [0, 1, 2].map(|d| ce * uh[d] + se * (cp * e1[d] + sp * e2[d]))
}

fn mc_reduce(vals: Vec<f64>) -> McEstimate {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    McEstimate { mean, std_error: (var / n).sqrt(), samples: vals.len() }
}

/// Monte-Carlo estimate of `∫∫ B(v − v_*, σ) [f₁(v_*') − f₁(v_*)] dσ dv_*` at `v`.
pub fn mc_q2_integral(f1: &Gaussian, v: [f64; 3], p: &CollisionParams, samples: usize, seed: u64) -> McEstimate {
    let chunks = 16usize;
    let per = samples.div_ceil(chunks);
    let tau = 1.5 * f1.sigma.iter().cloned().fold(0.0, f64::max);
    let vals: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64 * 0x9E37_79B9));
            (0..per)
                .map(|_| {
                    let z: [f64; 3] = [0, 1, 2].map(|_| rng.sample::<f64, _>(StandardNormal));
                    let vs = [0, 1, 2].map(|d| f1.center[d] + tau * z[d]);
                    let q = (-0.5 * dot(z, z)).exp() / ((2.0 * PI).powf(1.5) * tau.powi(3));
                    let u = [v[0] - vs[0], v[1] - vs[1], v[2] - vs[2]];
                    let r = norm(u);
                    let uh = u.map(|x| x / r);
                    let (eta, dens) = sample_eta(&mut rng, p.s_exp);
                    let phi = 2.0 * PI * rng.random::<f64>();
                    let mut d = 0.0;
                    for ph in [phi, phi + PI] {
                        let sg = sigma_from(uh, eta, ph);
                        let vsp = [0, 1, 2].map(|k| 0.5 * (v[k] + vs[k]) - 0.5 * r * sg[k]);
                        d += 0.5 * (f1.eval(vsp) - f1.eval(vs));
                    }
                    r.powf(p.gamma) / q * eta.sin() * p.angular(eta) / dens * 2.0 * PI * d
                })
                .collect::<Vec<_>>()
        })
        .collect();
    mc_reduce(vals)
}

/// Monte-Carlo estimate of the weak form for a Gaussian `g`.
pub fn mc_weak_form(g: &Gaussian, phi: &(dyn Fn([f64; 3]) -> f64 + Sync), p: &CollisionParams, samples: usize, seed: u64) -> McEstimate {
    let chunks = 16usize;
    let per = samples.div_ceil(chunks);
    let m = g.mass;
    let vals: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64 * 0x9E37_79B9));
            (0..per)
                .map(|_| {
                    let mut draw = || [0, 1, 2].map(|d| g.center[d] + g.sigma[d] * rng.sample::<f64, _>(StandardNormal));
                    let w = draw();
                    let ws = draw();
                    let u = [w[0] - ws[0], w[1] - ws[1], w[2] - ws[2]];
                    let r = norm(u);
                    let uh = u.map(|x| x / r);
                    let (eta, dens) = sample_eta(&mut rng, p.s_exp);
                    let az = 2.0 * PI * rng.random::<f64>();
                    let mut d = 0.0;
                    for ph in [az, az + PI] {
                        let sg = sigma_from(uh, eta, ph);
                        let wp = [0, 1, 2].map(|k| 0.5 * (w[k] + ws[k]) + 0.5 * r * sg[k]);
                        let wsp = [0, 1, 2].map(|k| 0.5 * (w[k] + ws[k]) - 0.5 * r * sg[k]);
                        d += 0.5 * (phi(wp) + phi(wsp) - phi(w) - phi(ws));
                    }
                    0.5 * m * m * r.powf(p.gamma) * eta.sin() * p.angular(eta) / dens * 2.0 * PI * d
                })
                .collect::<Vec<_>>()
        })
        .collect();
    mc_reduce(vals)
}
