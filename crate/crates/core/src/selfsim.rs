//! Scaling symmetry, self-similar variables, and the error terms of the
//! self-similar expansion of the Landau equation.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, norm, Density, Gaussian, GridSpec, MatrixField, ScalarField};
use crate::landau::{projection_pi, LandauOperator, LandauParams};
use crate::profile::ProfileDecomposition;
use crate::quad::gauss_on;
use crate::report::loglog_slope;
use crate::stencil::hessian;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfSimParams {
    pub gamma: f64,
    pub theta: f64,
    pub s_exp: Option<f64>,
    /// Time before blow-up; blow-up happens at `t = 0`.
    pub t: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl SelfSimParams {
    pub fn new(gamma: f64, theta: f64, t: f64) -> Self {
        Self { gamma, theta, s_exp: None, t, lambda: 1.0, alpha: 0.0 }
    }

    /// Exponent `1 + θ(3+γ)` of the self-similar amplitude.
    pub fn kappa(&self) -> f64 {
        1.0 + self.theta * (3.0 + self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LandauInhom,
    LandauHom,
    BoltzmannInhom,
    BoltzmannHom,
    Vpl,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "landau-inhom" => Mode::LandauInhom,
            "landau-hom" => Mode::LandauHom,
            "boltzmann-inhom" => Mode::BoltzmannInhom,
            "boltzmann-hom" => Mode::BoltzmannHom,
            "vpl" => Mode::Vpl,
            _ => return invalid(format!("unknown mode {s}")),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Admissibility {
    pub accepted: bool,
    pub violations: Vec<String>,
}

/// Accept or reject `(γ, θ, s)` for a mode, naming every violated constraint.
pub fn check_theta_admissible(p: &SelfSimParams, mode: Mode) -> Admissibility {
    let (g, th) = (p.gamma, p.theta);
    let mut v = Vec::new();
    let mut need = |ok: bool, name: &str| {
        if !ok {
            v.push(name.to_string());
        }
    };
    need(th > -1.0, "θ > −1");
    need(1.0 + th * (3.0 + g) > 0.0, "1 + θ(3+γ) > 0");
    match mode {
        Mode::LandauInhom => {
            need((-3.0..=-2.0).contains(&g), "γ ∈ [−3, −2]");
            need(th < 0.5, "θ < 1/2");
        }
        Mode::LandauHom => {
            need(g >= -3.0 && g < -2.0, "γ ∈ [−3, −2)");
            need(th < 0.5, "θ < 1/2");
            need(th >= 1.0 / g.abs(), "θ ≥ 1/|γ|");
        }
        Mode::BoltzmannInhom | Mode::BoltzmannHom => {
            need(g > -3.0, "γ > −3");
            match p.s_exp {
                None => need(false, "s ∈ (0, 1)"),
                Some(s) => {
                    need(s > 0.0 && s < 1.0, "s ∈ (0, 1)");
                    need(g + 2.0 * s < 0.0, "γ + 2s < 0");
                    need(th < 1.0 / (2.0 * s), "θ < 1/(2s)");
                }
            }
            if mode == Mode::BoltzmannHom {
                need(th > 1.0 / g.abs(), "θ > 1/|γ|");
            }
        }
        Mode::Vpl => {
            need(g == -3.0, "γ = −3");
            need((th + 1.0 / 3.0).abs() < 1e-12, "θ = −1/3");
        }
    }
    Admissibility { accepted: v.is_empty(), violations: v }
}

fn check_time(t: f64) -> Result<()> {
    if !(t < 0.0) {
        return invalid(format!("self-similar variables need t < 0, got {t}"));
    }
    Ok(())
}

/// `(x, v) ↦ (x/(−t)^{1+θ}, v/(−t)^θ)`.
pub fn to_selfsim(x: [f64; 3], v: [f64; 3], p: &SelfSimParams) -> Result<([f64; 3], [f64; 3])> {
    check_time(p.t)?;
    let sx = (-p.t).powf(1.0 + p.theta);
    let sv = (-p.t).powf(p.theta);
    Ok((x.map(|c| c / sx), v.map(|c| c / sv)))
}

pub fn from_selfsim(y: [f64; 3], w: [f64; 3], p: &SelfSimParams) -> Result<([f64; 3], [f64; 3])> {
    check_time(p.t)?;
    let sx = (-p.t).powf(1.0 + p.theta);
    let sv = (-p.t).powf(p.theta);
    Ok((y.map(|c| c * sx), w.map(|c| c * sv)))
}

/// Density on `(t, x, v)`.
pub trait PhaseSpaceDensity: Sync {
    fn eval(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64;
}

impl<F: Fn(f64, [f64; 3], [f64; 3]) -> f64 + Sync> PhaseSpaceDensity for F {
    fn eval(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self(t, x, v)
    }
}

/// `f_{λ,α}(t,x,v) = λ^{α+3+γ} f(λ^α t, λ^{1+α} x, λ v)`.
pub struct Rescaled<'a, F: ?Sized> {
    pub inner: &'a F,
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl<F: PhaseSpaceDensity + ?Sized> PhaseSpaceDensity for Rescaled<'_, F> {
    fn eval(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        let l = self.lambda;
        let amp = l.powf(self.alpha + 3.0 + self.gamma);
        let sx = l.powf(1.0 + self.alpha);
        amp * self.inner.eval(l.powf(self.alpha) * t, x.map(|c| c * sx), v.map(|c| c * l))
    }
}

pub fn rescale_solution<'a, F: PhaseSpaceDensity + ?Sized>(f: &'a F, p: &SelfSimParams) -> Result<Rescaled<'a, F>> {
    if !(p.lambda > 0.0) {
        return invalid(format!("λ must be positive, got {}", p.lambda));
    }
    Ok(Rescaled { inner: f, lambda: p.lambda, alpha: p.alpha, gamma: p.gamma })
}

#[derive(Clone, Debug)]
pub struct RescaledSnapshot {
    pub field: ScalarField,
    /// The snapshot taken at time `s` represents the rescaled solution at `s / λ^α`.
    pub time_factor: f64,
    /// Target nodes whose preimage `λ v` fell outside the source grid.
    pub out_of_domain: usize,
}

/// Rescaling of a spatially homogeneous snapshot, resampled onto `target`.
pub fn rescale_snapshot(f: &ScalarField, lambda: f64, alpha: f64, gamma: f64, target: GridSpec) -> Result<RescaledSnapshot> {
    if !(lambda > 0.0) {
        return invalid(format!("λ must be positive, got {lambda}"));
    }
    let amp = lambda.powf(alpha + 3.0 + gamma);
    let lim = f.grid.extent;
    let data: Vec<(f64, bool)> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let v = target.point(i).map(|c| c * lambda);
            let outside = v.iter().any(|c| c.abs() > lim);
            (amp * f.interpolate(v), outside)
        })
        .collect();
    let out_of_domain = data.iter().filter(|d| d.1).count();
    Ok(RescaledSnapshot {
        field: ScalarField { grid: target, data: data.into_iter().map(|d| d.0).collect() },
        time_factor: lambda.powf(-alpha),
        out_of_domain,
    })
}

fn tensor3(g: &[(f64, f64)]) -> Vec<([f64; 3], f64)> {
    let mut out = Vec::with_capacity(g.len().pow(3));
    for a in g {
        for b in g {
            for c in g {
                out.push(([a.0, b.0, c.0], a.1 * b.1 * c.1));
            }
        }
    }
    out
}

/// Tensor Gauss integral of `f(t, ·, ·)` over `[-bx, bx]³ × [-bv, bv]³`.
pub fn phase_space_integral(f: &dyn PhaseSpaceDensity, t: f64, bx: f64, bv: f64, nodes: usize) -> f64 {
    let gx = gauss_on(nodes, -bx, bx);
    let gv = gauss_on(nodes, -bv, bv);
    let xs = tensor3(&gx);
    let vs = tensor3(&gv);
    xs.par_iter()
        .map(|(x, wx)| wx * vs.iter().map(|(v, wv)| wv * f.eval(t, *x, *v)).sum::<f64>())
        .sum()
}

/// Powers of `(−t)` multiplying each term of the rescaled Landau expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionExponents {
    /// `tr(ā^φ D_w² g)`
    pub a_phi_g: f64,
    /// `c̄^φ g`
    pub c_phi_g: f64,
    /// `c̄^g φ`
    pub c_g_phi: f64,
    /// `tr(ā^g D_v² φ)`
    pub a_g_phi: f64,
    /// `∂_t φ + v·∇_x φ − Q(φ, φ)`
    pub phi_phi: f64,
}

/// Exponents obtained by multiplying `Q(f, f)` through by `(−t)^{2+θ(3+γ)}`.
pub fn expansion_exponents(theta: f64, gamma: f64) -> ExpansionExponents {
    let amp = 1.0 + theta * (3.0 + gamma);
    let m = 1.0 + amp;
    let d2w = 2.0 * theta;
    // ā^g and c̄^g pick up (−t)^{−amp} from g and (−t)^{θ(3+γ+2)} or (−t)^{θ(3+γ)} from the kernel
    let abar_g = -amp + theta * (5.0 + gamma);
    let cbar_g = -amp + theta * (3.0 + gamma);
    ExpansionExponents {
        a_phi_g: m - amp - d2w,
        c_phi_g: m - amp,
        c_g_phi: m + cbar_g,
        a_g_phi: m + abar_g,
        phi_phi: m,
    }
}

/// Closed-form background `φ = (−t)^{−β} m X((x−x0)/σ_x) N_{σ_v}(v)` with
/// `X(ξ) = exp(−|ξ|²/2)` and `N_σ` the unit-mass isotropic Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiModel {
    pub beta: f64,
    pub sigma_x: f64,
    pub x0: [f64; 3],
    pub sigma_v: f64,
    pub mass: f64,
}

impl Default for PhiModel {
    fn default() -> Self {
        Self { beta: 0.0, sigma_x: 1.0, x0: [0.3, 0.2, 0.1], sigma_v: 1.0, mass: 1.0 }
    }
}

impl PhiModel {
    pub fn zero() -> Self {
        Self { mass: 0.0, ..Self::default() }
    }

    pub fn with_beta(beta: f64) -> Self {
        Self { beta, ..Self::default() }
    }

    fn velocity(&self) -> Gaussian {
        Gaussian::isotropic(1.0, self.sigma_v)
    }

    fn xfac(&self, x: [f64; 3]) -> f64 {
        let d = [x[0] - self.x0[0], x[1] - self.x0[1], x[2] - self.x0[2]];
        (-dot(d, d) / (2.0 * self.sigma_x * self.sigma_x)).exp()
    }

    fn xfac_grad(&self, x: [f64; 3]) -> [f64; 3] {
        let s = -self.xfac(x) / (self.sigma_x * self.sigma_x);
        [s * (x[0] - self.x0[0]), s * (x[1] - self.x0[1]), s * (x[2] - self.x0[2])]
    }

    /// `(−t)^{−β} m X(x)`: the amplitude multiplying the velocity profile.
    pub fn amplitude(&self, t: f64, x: [f64; 3]) -> f64 {
        (-t).powf(-self.beta) * self.mass * self.xfac(x)
    }

    pub fn eval(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.amplitude(t, x) * self.velocity().eval(v)
    }

    pub fn dt(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
        self.beta / (-t) * self.eval(t, x, v)
    }

    pub fn grad_x(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        let s = (-t).powf(-self.beta) * self.mass * self.velocity().eval(v);
        self.xfac_grad(x).map(|c| c * s)
    }

    pub fn hess_v(&self, t: f64, x: [f64; 3], v: [f64; 3]) -> [[f64; 3]; 3] {
        let a = self.amplitude(t, x);
        self.velocity().hessian(v).map(|r| r.map(|c| c * a))
    }

    /// Largest `β` for which every exponent in the decay hypothesis is positive.
    pub fn critical_rate(theta: f64, gamma: f64) -> f64 {
        let amp = 1.0 + theta * (3.0 + gamma);
        if theta >= 0.0 {
            (1.0 + theta * gamma).max(0.0)
        } else {
            amp + 2.0 * theta
        }
    }

    /// Minimum over the admissible `(p, ℓ, j)` of the decay exponent, by enumeration.
    pub fn decay_margin(&self, theta: f64, gamma: f64) -> f64 {
        let amp = 1.0 + theta * (3.0 + gamma);
        let mut best = f64::INFINITY;
        let inv_ps: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        for ip in inv_ps {
            let base = amp - 3.0 * theta * ip;
            if base < 0.0 {
                continue;
            }
            for l in 0..=1 {
                for j in 0..=2 {
                    best = best.min(base + (1.0 + theta) * l as f64 + theta * j as f64 - self.beta);
                }
            }
        }
        best
    }

    pub fn satisfies_decay(&self, theta: f64, gamma: f64) -> bool {
        self.mass == 0.0 || self.beta < Self::critical_rate(theta, gamma)
    }
}

/// Velocity coefficients of the unit-mass background profile, on a grid with
/// direct summation beyond it.
pub struct PhiCoefficients {
    pub params: LandauParams,
    velocity: Gaussian,
    field: ScalarField,
    a: MatrixField,
    c: ScalarField,
    q: ScalarField,
}

impl PhiCoefficients {
    pub fn new(phi: &PhiModel, params: LandauParams, grid: GridSpec) -> Result<Self> {
        let velocity = phi.velocity();
        let field = ScalarField::sample(grid, &velocity);
        let op = LandauOperator::new(grid, params)?;
        let co = op.coefficients(&field)?;
        let q = op.q_trace(&field)?;
        Ok(Self { params, velocity, field, a: co.a, c: co.c, q })
    }

    fn inside(&self, v: [f64; 3]) -> bool {
        let lim = self.field.grid.extent - 3.0 * self.field.grid.spacing();
        v.iter().all(|c| c.abs() <= lim)
    }

    fn direct(&self, v: [f64; 3]) -> ([f64; 6], f64) {
        let g = self.field.grid;
        let h = g.spacing();
        let (gam, a, c) = (self.params.gamma, self.params.a_const, self.params.c_const);
        let mut m = [0.0; 6];
        let mut cc = 0.0;
        for i in 0..g.len() {
            let wt = g.weight(i) * self.field.data[i];
            if wt == 0.0 {
                continue;
            }
            let z = {
                let p = g.point(i);
                [v[0] - p[0], v[1] - p[1], v[2] - p[2]]
            };
            let r = norm(z);
            if r < 0.5 * h {
                continue;
            }
            if let Ok(pi) = projection_pi(z) {
                let k = a * r.powf(gam + 2.0) * wt;
                for (s, &(p, q)) in crate::grid::SYM_PAIRS.iter().enumerate() {
                    m[s] += k * pi[p][q];
                }
            }
            if !self.params.is_coulomb() {
                cc += c * r.powf(gam) * wt;
            }
        }
        if self.params.is_coulomb() {
            cc = c * self.velocity.eval(v);
        }
        (m, cc)
    }

    /// `(ā, c̄, Q(N, N))` of the unit velocity profile at `v`.
    pub fn at(&self, v: [f64; 3]) -> ([f64; 6], f64, f64) {
        if self.inside(v) {
            let mut m = [0.0; 6];
            for (s, slot) in m.iter_mut().enumerate() {
                *slot = interp_component(&self.a, s, v);
            }
            (m, self.c.interpolate(v), self.q.interpolate(v))
        } else {
            let (m, c) = self.direct(v);
            let hs = self.velocity.hessian(v);
            let tr: f64 = crate::grid::SYM_PAIRS
                .iter()
                .enumerate()
                .map(|(s, &(p, q))| if p == q { m[s] * hs[p][q] } else { 2.0 * m[s] * hs[p][q] })
                .sum();
            (m, c, tr + c * self.velocity.eval(v))
        }
    }
}

fn interp_component(m: &MatrixField, slot: usize, v: [f64; 3]) -> f64 {
    let f = ScalarField { grid: m.grid, data: m.data.iter().map(|x| x[slot]).collect() };
    f.interpolate(v)
}

fn trace_sym(m: &[f64; 6], hs: &[f64; 6]) -> f64 {
    m[0] * hs[0] + m[3] * hs[3] + m[5] * hs[5] + 2.0 * (m[1] * hs[1] + m[2] * hs[2] + m[4] * hs[4])
}

fn trace_full(m: &[f64; 6], hs: &[[f64; 3]; 3]) -> f64 {
    m[0] * hs[0][0] + m[3] * hs[1][1] + m[5] * hs[2][2] + 2.0 * (m[1] * hs[0][1] + m[2] * hs[0][2] + m[4] * hs[1][2])
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResiduals {
    pub a_mismatch: f64,
    pub c_mismatch: f64,
}

/// Both sides of `ā^f = ā^φ + (−t)^{2θ−1} ā^g` and `c̄^f = c̄^φ + (−t)^{−1} c̄^g`
/// at one `y`, with `f` sampled on the `w`-grid scaled by `(−t)^θ`.
pub fn rescaled_coeff_identities(
    g: &ProfileDecomposition,
    phi: &PhiModel,
    params: LandauParams,
    p: &SelfSimParams,
    y: [f64; 3],
) -> Result<IdentityResiduals> {
    check_time(p.t)?;
    let tau = (-p.t).powf(p.theta);
    let wg = g.w_grid;
    let vg = wg.scaled(tau)?;
    let x = y.map(|c| c * (-p.t).powf(1.0 + p.theta));
    let gy = g.at_y(y);
    let amp = (-p.t).powf(-p.kappa());
    let phi_v = ScalarField::from_fn(vg, |v| phi.eval(p.t, x, v));
    let mut f = phi_v.clone();
    for i in 0..vg.len() {
        f.data[i] += amp * gy.data[i];
    }
    let opv = LandauOperator::new(vg, params)?;
    let opw = LandauOperator::new(wg, params)?;
    let cf = opv.coefficients(&f)?;
    let cphi = opv.coefficients(&phi_v)?;
    let cg = opw.coefficients(&gy)?;
    let fa = (-p.t).powf(2.0 * p.theta - 1.0);
    let fc = 1.0 / (-p.t);
    let (mut da, mut sa, mut dc, mut sc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..vg.len() {
        if vg.is_ghost(i) {
            continue;
        }
        for s in 0..6 {
            let rhs = cphi.a.data[i][s] + fa * cg.a.data[i][s];
            da = da.max((cf.a.data[i][s] - rhs).abs());
            sa = sa.max(cf.a.data[i][s].abs());
        }
        let rhs = cphi.c.data[i] + fc * cg.c.data[i];
        dc = dc.max((cf.c.data[i] - rhs).abs());
        sc = sc.max(cf.c.data[i].abs());
    }
    let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
    Ok(IdentityResiduals { a_mismatch: rel(da, sa), c_mismatch: rel(dc, sc) })
}

/// Per-term pieces of one error function on the sampled `(y, w)` set.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorTerms {
    pub names: Vec<&'static str>,
    pub exponents: Vec<f64>,
    /// `sup |term|` for each term
    pub sups: Vec<f64>,
    /// `sup |Σ terms|`
    pub total: f64,
}

pub const E1_TERMS: [&str; 3] = ["tr(a^phi D_w^2 g)", "c^phi g", "c^g phi"];
pub const E2_TERMS: [&str; 4] = ["tr(a^g D_v^2 phi)", "d_t phi", "v.grad_x phi", "Q(phi,phi)"];

/// Exponents of `(−t)` in each error term once `φ ~ (−t)^{−β}` is accounted for.
pub fn error_exponents(theta: f64, gamma: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let e = expansion_exponents(theta, gamma);
    (
        vec![e.a_phi_g - beta, e.c_phi_g - beta, e.c_g_phi - beta],
        vec![e.a_g_phi - beta, e.phi_phi - 1.0 - beta, e.phi_phi + theta - beta, e.phi_phi - 2.0 * beta],
    )
}

/// Fixed sample set: the `w`-nodes with `|w| <= w_max` at each listed `y`.
pub struct ErrorSampler<'a> {
    pub g: &'a ProfileDecomposition,
    pub params: LandauParams,
    pub y_points: Vec<[f64; 3]>,
    pub w_max: f64,
    phi_coeffs: PhiCoefficients,
    per_y: Vec<PerY>,
    nodes: Vec<usize>,
}

struct PerY {
    g: ScalarField,
    a: MatrixField,
    c: ScalarField,
    hess: [Vec<f64>; 6],
}

impl<'a> ErrorSampler<'a> {
    pub fn new(g: &'a ProfileDecomposition, phi: &PhiModel, params: LandauParams, y_radius: f64, w_max: f64) -> Result<Self> {
        let wg = g.w_grid;
        let phi_grid = GridSpec::new(32, 8.0 * phi.sigma_v)?;
        let phi_coeffs = PhiCoefficients::new(phi, params, phi_grid)?;
        let mut y_points = vec![[0.0; 3]];
        if !g.terms.is_empty() && y_radius > 0.0 {
            for d in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut y = [0.0; 3];
                    y[d] = s * y_radius;
                    y_points.push(y);
                }
            }
        }
        let op = LandauOperator::new(wg, params)?;
        let per_y = y_points
            .iter()
            .map(|&y| {
                let gy = g.at_y(y);
                let co = op.coefficients(&gy)?;
                let hess = hessian(&gy);
                Ok(PerY { g: gy, a: co.a, c: co.c, hess })
            })
            .collect::<Result<Vec<_>>>()?;
        let nodes = (0..wg.len()).filter(|&i| !wg.is_ghost(i) && norm(wg.point(i)) <= w_max).collect();
        Ok(Self { g, params, y_points, w_max, phi_coeffs, per_y, nodes })
    }

    /// `E₁` and `E₂` term sups at time `t`.
    pub fn evaluate(&self, phi: &PhiModel, theta: f64, t: f64) -> Result<(ErrorTerms, ErrorTerms)> {
        check_time(t)?;
        let gamma = self.params.gamma;
        let e = expansion_exponents(theta, gamma);
        let (ex1, ex2) = error_exponents(theta, gamma, phi.beta);
        let s = -t;
        let wg = self.g.w_grid;
        let tau = s.powf(theta);
        let mut s1 = [0.0f64; 3];
        let mut s2 = [0.0f64; 4];
        let (mut tot1, mut tot2) = (0.0f64, 0.0f64);
        for (yi, &y) in self.y_points.iter().enumerate() {
            let x = y.map(|c| c * s.powf(1.0 + theta));
            let amp = phi.amplitude(t, x);
            let py = &self.per_y[yi];
            let res: Vec<([f64; 3], [f64; 4])> = self
                .nodes
                .par_iter()
                .map(|&i| {
                    let w = wg.point(i);
                    let v = w.map(|c| c * tau);
                    let (an, cn, qn) = if amp == 0.0 { ([0.0; 6], 0.0, 0.0) } else { self.phi_coeffs.at(v) };
                    let phiv = phi.eval(t, x, v);
                    let hs = [py.hess[0][i], py.hess[1][i], py.hess[2][i], py.hess[3][i], py.hess[4][i], py.hess[5][i]];
                    let t1 = [
                        -s.powf(e.a_phi_g) * amp * trace_sym(&an, &hs),
                        -s.powf(e.c_phi_g) * amp * cn * py.g.data[i],
                        -s.powf(e.c_g_phi) * py.c.data[i] * phiv,
                    ];
                    let hv = phi.hess_v(t, x, v);
                    let gx = phi.grad_x(t, x, v);
                    let t2 = [
                        -s.powf(e.a_g_phi) * trace_full(&py.a.data[i], &hv),
                        s.powf(e.phi_phi) * phi.dt(t, x, v),
                        s.powf(e.phi_phi) * dot(v, gx),
                        -s.powf(e.phi_phi) * amp * amp * qn,
                    ];
                    (t1, t2)
                })
                .collect();
            for (t1, t2) in res {
                for k in 0..3 {
                    s1[k] = s1[k].max(t1[k].abs());
                }
                for k in 0..4 {
                    s2[k] = s2[k].max(t2[k].abs());
                }
                tot1 = tot1.max(t1.iter().sum::<f64>().abs());
                tot2 = tot2.max(t2.iter().sum::<f64>().abs());
            }
        }
        Ok((
            ErrorTerms { names: E1_TERMS.to_vec(), exponents: ex1, sups: s1.to_vec(), total: tot1 },
            ErrorTerms { names: E2_TERMS.to_vec(), exponents: ex2, sups: s2.to_vec(), total: tot2 },
        ))
    }
}

pub fn error_e1(sampler: &ErrorSampler, phi: &PhiModel, theta: f64, t: f64) -> Result<ErrorTerms> {
    Ok(sampler.evaluate(phi, theta, t)?.0)
}

pub fn error_e2(sampler: &ErrorSampler, phi: &PhiModel, theta: f64, t: f64) -> Result<ErrorTerms> {
    Ok(sampler.evaluate(phi, theta, t)?.1)
}

/// `E₁` as a field on the `w`-grid at one `y` (zero outside `|w| <= w_max`).
pub fn error_e1_field(sampler: &ErrorSampler, phi: &PhiModel, theta: f64, t: f64, y_index: usize) -> Result<ScalarField> {
    check_time(t)?;
    let e = expansion_exponents(theta, sampler.params.gamma);
    let s = -t;
    let wg = sampler.g.w_grid;
    let y = sampler.y_points[y_index];
    let x = y.map(|c| c * s.powf(1.0 + theta));
    let amp = phi.amplitude(t, x);
    let py = &sampler.per_y[y_index];
    let mut out = ScalarField::zeros(wg);
    for &i in &sampler.nodes {
        let v = wg.point(i).map(|c| c * s.powf(theta));
        let (an, cn, _) = if amp == 0.0 { ([0.0; 6], 0.0, 0.0) } else { sampler.phi_coeffs.at(v) };
        let hs = [py.hess[0][i], py.hess[1][i], py.hess[2][i], py.hess[3][i], py.hess[4][i], py.hess[5][i]];
        out.data[i] = -s.powf(e.a_phi_g) * amp * trace_sym(&an, &hs)
            - s.powf(e.c_phi_g) * amp * cn * py.g.data[i]
            - s.powf(e.c_g_phi) * py.c.data[i] * phi.eval(t, x, v);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySeries {
    pub name: String,
    pub sups: Vec<f64>,
    /// Slope of `sups`; for a sum of terms, slope of `Σ sup|term|` instead.
    pub slope: Option<f64>,
    /// Slope of `sups` itself when `slope` is taken from the majorant.
    pub sup_slope: Option<f64>,
    pub predicted: f64,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub e1: DecaySeries,
    pub e2: DecaySeries,
    pub e1_terms: Vec<DecaySeries>,
    pub e2_terms: Vec<DecaySeries>,
    pub pass: bool,
    pub offending: Vec<String>,
}

fn series(name: &str, times: &[f64], sups: Vec<f64>, majorant: Option<Vec<f64>>, predicted: f64, fraction: f64) -> DecaySeries {
    let floor = 1e-300;
    if sups.iter().all(|x| *x <= floor) {
        return DecaySeries { name: name.into(), sups, slope: None, sup_slope: None, predicted, monotone: true, pass: true };
    }
    let monotone = sups.windows(2).all(|w| w[1] < w[0]);
    let x: Vec<f64> = times.iter().map(|t| -t).collect();
    let fit = |y: &[f64]| if y.iter().all(|v| *v > floor) { loglog_slope(&x, y).ok() } else { None };
    let sup_slope = fit(&sups);
    let slope = match &majorant {
        Some(m) => fit(m),
        None => sup_slope,
    };
    let decreasing = match &majorant {
        Some(m) => m.windows(2).all(|w| w[1] < w[0]),
        None => monotone,
    };
    let pass = decreasing && slope.map(|s| s > 0.0 && s >= fraction * predicted).unwrap_or(true);
    DecaySeries { name: name.into(), sups, slope, sup_slope, predicted, monotone, pass }
}

/// Sup of each error along `t → 0`, with log-log slopes against `−t`.
pub fn verify_error_decay(sampler: &ErrorSampler, phi: &PhiModel, theta: f64, times: &[f64]) -> Result<DecayReport> {
    if times.len() < 2 {
        return invalid("need at least two times");
    }
    if times.windows(2).any(|w| !(w[1] > w[0] && w[1] < 0.0)) {
        return invalid("times must be negative and increase towards 0");
    }
    let evals = times.iter().map(|&t| sampler.evaluate(phi, theta, t)).collect::<Result<Vec<_>>>()?;
    let (ex1, ex2) = error_exponents(theta, sampler.params.gamma, phi.beta);
    let frac = 0.9;
    let pick = |k: usize, which: bool| -> Vec<f64> { evals.iter().map(|(a, b)| if which { b.sups[k] } else { a.sups[k] }).collect() };
    let e1_terms: Vec<DecaySeries> = (0..3).map(|k| series(E1_TERMS[k], times, pick(k, false), None, ex1[k], frac)).collect();
    let e2_terms: Vec<DecaySeries> = (0..4).map(|k| series(E2_TERMS[k], times, pick(k, true), None, ex2[k], frac)).collect();
    let majorant = |which: bool| -> Vec<f64> {
        evals.iter().map(|(a, b)| if which { b.sups.iter().sum() } else { a.sups.iter().sum() }).collect()
    };
    let active_min = |terms: &[DecaySeries]| {
        terms.iter().filter(|s| s.sups.iter().any(|x| *x > 1e-300)).map(|s| s.predicted).fold(f64::INFINITY, f64::min)
    };
    let e1 = series("E1", times, evals.iter().map(|e| e.0.total).collect(), Some(majorant(false)), active_min(&e1_terms), frac);
    let e2 = series("E2", times, evals.iter().map(|e| e.1.total).collect(), Some(majorant(true)), active_min(&e2_terms), frac);
    let mut offending: Vec<String> = e1_terms.iter().chain(&e2_terms).filter(|s| !s.pass).map(|s| s.name.clone()).collect();
    if offending.is_empty() && !(e1.pass && e2.pass) {
        for (tot, terms) in [(&e1, &e1_terms), (&e2, &e2_terms)] {
            if !tot.pass {
                if let Some(worst) = terms.iter().filter(|s| s.slope.is_some()).min_by(|a, b| a.slope.partial_cmp(&b.slope).unwrap()) {
                    offending.push(worst.name.clone());
                }
            }
        }
    }
    let pass = e1.pass && e2.pass && offending.is_empty();
    Ok(DecayReport { times: times.to_vec(), e1, e2, e1_terms, e2_terms, pass, offending })
}

impl DecayReport {
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .enumerate()
            .map(|(k, t)| {
                vec![*t, self.e1.sups[k], self.e2.sups[k], self.e1.slope.unwrap_or(f64::NAN), self.e2.slope.unwrap_or(f64::NAN)]
            })
            .collect()
    }
}
