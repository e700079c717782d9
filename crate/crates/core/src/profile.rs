//! Self-similar profiles `g(y,w) = q(w) + Σ_k a_k(y) b_k(w)`, the profile
//! equation residual, and the cutoff-weighted moment functionals that decide
//! whether a profile can solve it.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, norm, Cutoff, GridSpec, ScalarField, Weight};
use crate::landau::{LandauOperator, LandauParams};
use crate::quad::{gauss_on, sphere_rule};
use crate::report::{extrapolate, LimitReport};
use crate::selfsim::{check_theta_admissible, Mode, SelfSimParams};
use crate::stencil::diff1;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MAX_RANK: usize = 8;

/// Closed-form `y`-factor of a separable term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum YProfile {
    /// `A exp(-|y - c|² / (2σ²))`
    Gaussian { center: [f64; 3], width: f64, amplitude: f64 },
    /// `A (1 + |y|²/σ²)^{-k/2}`, decaying like `|y|^{-k}`
    PowerTail { width: f64, amplitude: f64, exponent: f64 },
}

impl YProfile {
    pub fn gaussian(width: f64, amplitude: f64) -> Self {
        YProfile::Gaussian { center: [0.0; 3], width, amplitude }
    }

    pub fn eval(&self, y: [f64; 3]) -> f64 {
        match *self {
            YProfile::Gaussian { center, width, amplitude } => {
                let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
                amplitude * (-dot(d, d) / (2.0 * width * width)).exp()
            }
            YProfile::PowerTail { width, amplitude, exponent } => {
                amplitude * (1.0 + dot(y, y) / (width * width)).powf(-exponent / 2.0)
            }
        }
    }

    pub fn grad(&self, y: [f64; 3]) -> [f64; 3] {
        match *self {
            YProfile::Gaussian { center, width, .. } => {
                let v = self.eval(y);
                let s = -v / (width * width);
                [s * (y[0] - center[0]), s * (y[1] - center[1]), s * (y[2] - center[2])]
            }
            YProfile::PowerTail { width, amplitude, exponent } => {
                let base = 1.0 + dot(y, y) / (width * width);
                let s = -amplitude * exponent * base.powf(-exponent / 2.0 - 1.0) / (width * width);
                [s * y[0], s * y[1], s * y[2]]
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match *self {
            YProfile::Gaussian { amplitude, .. } | YProfile::PowerTail { amplitude, .. } => amplitude >= 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            YProfile::Gaussian { width, amplitude, .. } | YProfile::PowerTail { width, amplitude, .. } => {
                if !(width > 0.0) || !amplitude.is_finite() {
                    return invalid("y-profile needs positive width and finite amplitude");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SeparableTerm {
    pub a: YProfile,
    pub b: ScalarField,
}

#[derive(Clone, Debug)]
pub struct ProfileDecomposition {
    pub w_grid: GridSpec,
    pub q: Option<ScalarField>,
    pub terms: Vec<SeparableTerm>,
}

impl ProfileDecomposition {
    pub fn new(w_grid: GridSpec, q: Option<ScalarField>, terms: Vec<SeparableTerm>) -> Result<Self> {
        if terms.len() > MAX_RANK {
            return invalid(format!("separable rank {} exceeds {MAX_RANK}", terms.len()));
        }
        if let Some(q) = &q {
            if q.grid != w_grid {
                return Err(Error::GridMismatch("q must live on the w-grid".into()));
            }
        }
        for t in &terms {
            t.a.validate()?;
            if t.b.grid != w_grid {
                return Err(Error::GridMismatch("b_k must live on the w-grid".into()));
            }
        }
        Ok(Self { w_grid, q, terms })
    }

    pub fn homogeneous(q: ScalarField) -> Self {
        Self { w_grid: q.grid, q: Some(q), terms: Vec::new() }
    }

    pub fn zero(w_grid: GridSpec) -> Self {
        Self { w_grid, q: None, terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.q.as_ref().map(|q| q.max_abs() == 0.0).unwrap_or(true) && self.terms.iter().all(|t| t.b.max_abs() == 0.0 || t.a.eval([0.0; 3]) == 0.0)
    }

    /// `g(y, ·)` on the w-grid.
    pub fn at_y(&self, y: [f64; 3]) -> ScalarField {
        let mut out = match &self.q {
            Some(q) => q.clone(),
            None => ScalarField::zeros(self.w_grid),
        };
        for t in &self.terms {
            out.axpy(t.a.eval(y), &t.b);
        }
        out
    }

    /// Basis `[q, b_1, …]` with the matching `y`-factors (`None` meaning 1).
    fn basis(&self) -> (Vec<&ScalarField>, Vec<Option<YProfile>>) {
        let mut fields = Vec::new();
        let mut ys = Vec::new();
        if let Some(q) = &self.q {
            fields.push(q);
            ys.push(None);
        }
        for t in &self.terms {
            fields.push(&t.b);
            ys.push(Some(t.a));
        }
        (fields, ys)
    }
}

/// Test weight in `w` multiplying the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestWeight {
    One,
    SpeedSq,
}

impl TestWeight {
    pub fn eval(&self, w: [f64; 3]) -> f64 {
        match self {
            TestWeight::One => 1.0,
            TestWeight::SpeedSq => dot(w, w),
        }
    }

    /// Degree `d` with `w·∇ψ = d' ψ`; appears as `∫ ψ w·∇g = -(3 + deg) ∫ ψ g`.
    pub fn degree(&self) -> f64 {
        match self {
            TestWeight::One => 0.0,
            TestWeight::SpeedSq => 2.0,
        }
    }

    pub fn as_polynomial(&self) -> Weight {
        match self {
            TestWeight::One => Weight::one(),
            TestWeight::SpeedSq => Weight::speed_sq(),
        }
    }
}

/// Compactly supported unit-mass bump on `B(0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plateau {
    /// `C exp(-1/(1-|y|²))`
    Exponential,
    /// `C (1-|y|²)^3`
    Polynomial,
}

impl Plateau {
    fn raw(&self, r2: f64) -> f64 {
        if r2 >= 1.0 {
            return 0.0;
        }
        match self {
            Plateau::Exponential => (-1.0 / (1.0 - r2)).exp(),
            Plateau::Polynomial => (1.0 - r2).powi(3),
        }
    }

    fn normalization(&self) -> f64 {
        match self {
            Plateau::Polynomial => 315.0 / (64.0 * PI),
            Plateau::Exponential => {
                let breaks: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
                let s: f64 = crate::quad::composite(&breaks, 8)
                    .iter()
                    .map(|(r, w)| w * 4.0 * PI * r * r * self.raw(r * r))
                    .sum();
                1.0 / s
            }
        }
    }

    pub fn eval(&self, y: [f64; 3]) -> f64 {
        self.normalization() * self.raw(dot(y, y))
    }

    /// Tensor Gauss rule for `∫ F(y) φ(y + y0) dy`: points and weights including `φ`.
    pub fn rule(&self, y0: [f64; 3]) -> Vec<([f64; 3], f64)> {
        let c = self.normalization();
        let g = gauss_on(20, -1.0, 1.0);
        let mut out = Vec::with_capacity(8000);
        for (x, wx) in &g {
            for (y, wy) in &g {
                for (z, wz) in &g {
                    let val = self.raw(x * x + y * y + z * z);
                    if val > 0.0 {
                        out.push(([x - y0[0], y - y0[1], z - y0[2]], wx * wy * wz * c * val));
                    }
                }
            }
        }
        out
    }
}

/// Radial-panel quadrature of `χ_R(y)`-weighted integrands over `|y| <= 2R`.
fn cutoff_rule(radius: f64) -> Vec<([f64; 3], f64)> {
    let c = Cutoff { radius };
    let mut breaks = vec![0.0];
    let mut b = 0.25;
    while b < 2.0 * radius {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(radius);
    breaks.push(2.0 * radius);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let radial = crate::quad::composite(&breaks, 8);
    let sphere = sphere_rule(16, 32);
    let mut out = Vec::with_capacity(radial.len() * sphere.len());
    for (r, wr) in &radial {
        for (e, we) in &sphere {
            let y = [r * e[0], r * e[1], r * e[2]];
            out.push((y, wr * we * r * r * c.value(y)));
        }
    }
    out
}

/// The test function in `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum YTest {
    /// `φ(y + y0)`, unit mass
    Plateau { kind: Plateau, offset: [f64; 3] },
    /// `χ_R(y)`
    Cutoff { radius: f64 },
}

impl YTest {
    fn rule(&self) -> Vec<([f64; 3], f64)> {
        match *self {
            YTest::Plateau { kind, offset } => kind.rule(offset),
            YTest::Cutoff { radius } => cutoff_rule(radius),
        }
    }
}

/// `y`-integrals of the `y`-factors against a test function.
struct YMoments {
    /// `∫ ψ a_k`
    a0: Vec<f64>,
    /// `∫ ψ y·∇a_k`
    a1: Vec<f64>,
    /// `∫ ψ ∂_i a_k`
    a2: Vec<[f64; 3]>,
    /// `∫ ψ a_k a_l`
    cross: Vec<Vec<f64>>,
}

fn y_moments(ys: &[Option<YProfile>], test: &YTest) -> YMoments {
    let rule = test.rule();
    let r = ys.len();
    let mut m = YMoments { a0: vec![0.0; r], a1: vec![0.0; r], a2: vec![[0.0; 3]; r], cross: vec![vec![0.0; r]; r] };
    let mut vals = vec![0.0; r];
    for (y, w) in &rule {
        for (k, a) in ys.iter().enumerate() {
            vals[k] = a.map(|a| a.eval(*y)).unwrap_or(1.0);
            if let Some(a) = a {
                let g = a.grad(*y);
                m.a1[k] += w * dot(*y, g);
                for i in 0..3 {
                    m.a2[k][i] += w * g[i];
                }
            }
            m.a0[k] += w * vals[k];
        }
        for k in 0..r {
            for l in 0..r {
                m.cross[k][l] += w * vals[k] * vals[l];
            }
        }
    }
    m
}

/// Collision term paired with `χ_R ψ` in `w`, bilinear in the basis.
pub trait CollisionFunctional {
    /// `Σ_kl c_kl ∫ χ_R(w) ψ(w) Q(b_k, b_l)(w) dw` for each radius; `c` symmetric.
    fn weighted(&self, basis: &[&ScalarField], c: &[Vec<f64>], weight: TestWeight, radii: &[f64]) -> Result<Vec<f64>>;
    /// `Q(g, g)` pointwise.
    fn collision(&self, g: &ScalarField) -> Result<ScalarField>;
    fn mode(&self, homogeneous: bool) -> Mode;
    fn params(&self, theta: f64) -> SelfSimParams;
}

impl CollisionFunctional for LandauOperator {
    fn weighted(&self, basis: &[&ScalarField], c: &[Vec<f64>], weight: TestWeight, radii: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid;
        let mut total = ScalarField::zeros(grid);
        for (k, bk) in basis.iter().enumerate() {
            let mut second = ScalarField::zeros(grid);
            for (l, bl) in basis.iter().enumerate() {
                second.axpy(c[k][l], bl);
            }
            if second.max_abs() == 0.0 {
                continue;
            }
            total.axpy(1.0, &self.q_divergence_bilinear(bk, &second)?);
        }
        radii
            .iter()
            .map(|&r| {
                let cut = Cutoff::new(r)?;
                Ok((0..grid.len())
                    .map(|i| {
                        let w = grid.point(i);
                        grid.weight(i) * cut.value(w) * weight.eval(w) * total.data[i]
                    })
                    .sum())
            })
            .collect()
    }

    fn collision(&self, g: &ScalarField) -> Result<ScalarField> {
        self.q_trace(g)
    }

    fn mode(&self, homogeneous: bool) -> Mode {
        if homogeneous {
            Mode::LandauHom
        } else {
            Mode::LandauInhom
        }
    }

    fn params(&self, theta: f64) -> SelfSimParams {
        SelfSimParams { gamma: self.params.gamma, theta, s_exp: None, t: -1.0, lambda: 1.0, alpha: 0.0 }
    }
}

/// Pointwise residual of the profile equation on a set of `y` samples.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub y_points: Vec<[f64; 3]>,
    pub fields: Vec<ScalarField>,
}

impl ResidualField {
    pub fn max_abs(&self) -> f64 {
        self.fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Linear transport part `g + (1+θ) y·∇_y g + θ w·∇_w g + w·∇_y g` at one `y`.
pub fn transport_part(g: &ProfileDecomposition, theta: f64, y: [f64; 3]) -> ScalarField {
    transport_part_with(g, y, 1.0 + theta, theta)
}

pub(crate) fn transport_part_with(g: &ProfileDecomposition, y: [f64; 3], cy: f64, cw: f64) -> ScalarField {
    let gy = g.at_y(y);
    let grid = g.w_grid;
    let grad = [diff1(&gy, 0), diff1(&gy, 1), diff1(&gy, 2)];
    let mut out = gy.clone();
    for i in 0..grid.len() {
        let w = grid.point(i);
        out.data[i] += cw * (w[0] * grad[0].data[i] + w[1] * grad[1].data[i] + w[2] * grad[2].data[i]);
    }
    for t in &g.terms {
        let ga = t.a.grad(y);
        let ydot = cy * dot(y, ga);
        for i in 0..grid.len() {
            let w = grid.point(i);
            out.data[i] += (ydot + dot(w, ga)) * t.b.data[i];
        }
    }
    out
}

pub fn profile_residual(g: &ProfileDecomposition, theta: f64, op: &dyn CollisionFunctional, y_points: &[[f64; 3]]) -> Result<ResidualField> {
    let mut fields = Vec::with_capacity(y_points.len());
    for &y in y_points {
        let mut r = transport_part(g, theta, y);
        let q = op.collision(&g.at_y(y))?;
        r.axpy(-1.0, &q);
        fields.push(r);
    }
    Ok(ResidualField { y_points: y_points.to_vec(), fields })
}

/// Landau profile residual on a coarse `y` sample set (the origin alone for homogeneous profiles).
pub fn landau_profile_residual(g: &ProfileDecomposition, params: LandauParams, theta: f64) -> Result<ResidualField> {
    let op = LandauOperator::new(g.w_grid, params)?;
    profile_residual(g, theta, &op, &default_y_samples(g))
}

pub fn default_y_samples(g: &ProfileDecomposition) -> Vec<[f64; 3]> {
    if g.terms.is_empty() {
        vec![[0.0; 3]]
    } else {
        let mut v = vec![[0.0; 3]];
        for r in [0.5, 1.0, 2.0] {
            for d in 0..3 {
                let mut y = [0.0; 3];
                y[d] = r;
                v.push(y);
            }
        }
        v
    }
}

/// Moment functional `∬ χ_R(w) ψ(w) ψ_y(y) [transport - Q](g) dw dy` for each `R`.
pub fn functional_values(
    g: &ProfileDecomposition,
    theta: f64,
    op: &dyn CollisionFunctional,
    weight: TestWeight,
    ytest: &YTest,
    radii: &[f64],
) -> Result<Vec<f64>> {
    let (basis, ys) = g.basis();
    if basis.is_empty() {
        return Ok(vec![0.0; radii.len()]);
    }
    let grid = g.w_grid;
    let ym = y_moments(&ys, ytest);
    let grads: Vec<[ScalarField; 3]> = basis.iter().map(|b| [diff1(b, 0), diff1(b, 1), diff1(b, 2)]).collect();
    let coll = op.weighted(&basis, &ym.cross, weight, radii)?;
    let mut out = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let cut = Cutoff::new(r)?;
        let mut lin = 0.0;
        for (k, b) in basis.iter().enumerate() {
            let (mut ib, mut iwgrad) = (0.0, 0.0);
            let mut iwb = [0.0; 3];
            for i in 0..grid.len() {
                let wt = grid.weight(i);
                if wt == 0.0 {
                    continue;
                }
                let w = grid.point(i);
                let psi = wt * cut.value(w) * weight.eval(w);
                if psi == 0.0 {
                    continue;
                }
                ib += psi * b.data[i];
                iwgrad += psi * (w[0] * grads[k][0].data[i] + w[1] * grads[k][1].data[i] + w[2] * grads[k][2].data[i]);
                for d in 0..3 {
                    iwb[d] += psi * w[d] * b.data[i];
                }
            }
            lin += ym.a0[k] * (ib + theta * iwgrad);
            if ys[k].is_some() {
                lin += (1.0 + theta) * ym.a1[k] * ib;
                lin += dot(ym.a2[k], iwb);
            }
        }
        out.push(lin - coll[ri]);
    }
    Ok(out)
}

/// Coefficient multiplying the weighted moment in the limit of the functional.
pub fn predicted_coefficient(theta: f64, weight: TestWeight, stage: Stage) -> f64 {
    let d = 3.0 + weight.degree();
    match stage {
        Stage::Plateau => 1.0 - d * theta,
        Stage::FullCutoff => 1.0 - d * theta - 3.0 * (1.0 + theta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// `y`-plateau pushed to infinity: isolates `q`.
    Plateau,
    /// full-space `y` cutoffs: isolates `h` when `q ≡ 0`.
    FullCutoff,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalConfig {
    pub w_radii: Vec<f64>,
    pub y_offsets: Vec<f64>,
    pub y_radii: Vec<f64>,
    pub plateau: Plateau,
    pub rel_tol: f64,
}

impl FunctionalConfig {
    pub fn for_grid(grid: GridSpec) -> Self {
        let l = grid.extent;
        Self {
            w_radii: vec![0.25 * l, 0.35 * l, 0.5 * l],
            y_offsets: vec![4.0, 8.0, 16.0],
            y_radii: vec![4.0, 8.0, 16.0],
            plateau: Plateau::Exponential,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub stage: Stage,
    pub weight: TestWeight,
    pub coefficient: f64,
    pub moment: f64,
    pub predicted: f64,
    pub limit: Option<f64>,
    pub inner: Vec<LimitReport>,
    pub outer: LimitReport,
    pub relative_error: f64,
}

fn weighted_moment(f: &ScalarField, weight: TestWeight) -> f64 {
    crate::grid::integrate(f, Some(&weight.as_polynomial()))
}

/// `∫∫ ψ(w) h dw dy` over the separable part.
pub fn h_moment(g: &ProfileDecomposition, weight: TestWeight) -> f64 {
    let rule = cutoff_rule(64.0);
    g.terms
        .iter()
        .map(|t| {
            let ya: f64 = rule.iter().map(|(y, w)| w * t.a.eval(*y)).sum();
            ya * weighted_moment(&t.b, weight)
        })
        .sum()
}

pub fn moment_functional(
    g: &ProfileDecomposition,
    theta: f64,
    op: &dyn CollisionFunctional,
    weight: TestWeight,
    stage: Stage,
    cfg: &FunctionalConfig,
) -> Result<MomentReport> {
    let coefficient = predicted_coefficient(theta, weight, stage);
    let (outer_radii, moment) = match stage {
        Stage::Plateau => (cfg.y_offsets.clone(), g.q.as_ref().map(|q| weighted_moment(q, weight)).unwrap_or(0.0)),
        Stage::FullCutoff => {
            if g.q.as_ref().map(|q| q.max_abs() > 0.0).unwrap_or(false) {
                return invalid("full-space y cutoffs apply only when q vanishes");
            }
            (cfg.y_radii.clone(), h_moment(g, weight))
        }
    };
    let scale = moment.abs().max(g.at_y([0.0; 3]).lp_norm(1.0)).max(f64::MIN_POSITIVE);
    let mut inner = Vec::new();
    let mut limits = Vec::new();
    for &o in &outer_radii {
        let ytest = match stage {
            Stage::Plateau => {
                let s = o / 3f64.sqrt();
                YTest::Plateau { kind: cfg.plateau, offset: [s, s, s] }
            }
            Stage::FullCutoff => YTest::Cutoff { radius: o },
        };
        let vals = functional_values(g, theta, op, weight, &ytest, &cfg.w_radii)?;
        let rep = extrapolate(&cfg.w_radii, &vals, cfg.rel_tol * scale)?;
        limits.push(rep.limit.ok_or_else(|| Error::NonConvergent(format!("w-cutoff sequence at {o}: {}", rep.note)))?);
        inner.push(rep);
    }
    let mut outer = extrapolate(&outer_radii, &limits, cfg.rel_tol * scale)?;
    let predicted = coefficient * moment;
    outer.predicted = Some(predicted);
    outer.scale = scale;
    let limit = outer.limit;
    let relative_error = limit.map(|l| (l - predicted).abs() / predicted.abs().max(1e-300)).unwrap_or(f64::INFINITY);
    outer.pass = relative_error <= 0.02;
    Ok(MomentReport { stage, weight, coefficient, moment, predicted, limit, inner, outer, relative_error })
}

#[derive(Clone, Debug, Serialize)]
pub struct NormCheck {
    pub name: String,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub checks: Vec<NormCheck>,
    pub pass: bool,
}

impl AdmissibilityReport {
    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Increments along nested truncations must contract geometrically.
pub(crate) fn cauchy(values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let top = values.last().copied().unwrap_or(0.0).abs().max(1e-300);
    if d.last().map(|x| *x <= 1e-10 * top).unwrap_or(true) {
        return true;
    }
    d.windows(2).rev().take(2).all(|w| w[1] <= 0.75 * w[0])
}

fn y_ball_integral(a: &YProfile, radius: f64, wgt: impl Fn([f64; 3]) -> f64) -> f64 {
    let mut breaks = vec![0.0];
    let mut b = 0.25;
    while b < radius {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(radius);
    let radial = crate::quad::composite(&breaks, 8);
    let sphere = sphere_rule(12, 24);
    let mut s = 0.0;
    for (r, wr) in &radial {
        for (e, we) in &sphere {
            let y = [r * e[0], r * e[1], r * e[2]];
            s += wr * we * r * r * a.eval(y).abs() * wgt(y);
        }
    }
    s
}

fn w_ball_integral(f: &ScalarField, radius: f64, wgt: impl Fn([f64; 3]) -> f64) -> f64 {
    let g = f.grid;
    (0..g.len())
        .filter(|&i| norm(g.point(i)) <= radius)
        .map(|i| g.weight(i) * f.data[i].abs() * wgt(g.point(i)))
        .sum()
}

/// Integrability and sign conditions on `q` and `h`, tested along nested truncations.
pub fn check_profile_admissibility(g: &ProfileDecomposition, theta: f64) -> AdmissibilityReport {
    let mut checks = Vec::new();
    let l = g.w_grid.extent;
    let w_radii = vec![0.25 * l, 0.5 * l, 0.75 * l, l];
    let y_radii = vec![4.0, 8.0, 16.0, 32.0, 64.0];
    let second = (theta.abs() - 1.0 / 3.0).abs() < 1e-12;
    let nonneg = g.q.as_ref().map(|q| q.data.iter().all(|x| *x >= 0.0)).unwrap_or(true)
        && g.terms.iter().all(|t| t.a.is_nonnegative() && t.b.data.iter().all(|x| *x >= 0.0));
    checks.push(NormCheck { name: "g >= 0".into(), radii: vec![], values: vec![], pass: nonneg });
    let finite = g.q.as_ref().map(|q| q.data.iter().all(|x| x.is_finite())).unwrap_or(true)
        && g.terms.iter().all(|t| t.b.data.iter().all(|x| x.is_finite()));
    checks.push(NormCheck { name: "g smooth on the grid".into(), radii: vec![], values: vec![], pass: finite });
    if let Some(q) = &g.q {
        let mut push = |name: &str, f: &dyn Fn([f64; 3]) -> f64| {
            let values: Vec<f64> = w_radii.iter().map(|&r| w_ball_integral(q, r, f)).collect();
            checks.push(NormCheck { name: name.into(), radii: w_radii.clone(), values: values.clone(), pass: cauchy(&values) });
        };
        push("||q||_L1", &|_| 1.0);
        if second {
            push("||(1+|w|^2) q||_L1", &|w| 1.0 + dot(w, w));
        }
    }
    if !g.terms.is_empty() {
        // y-factors
        let ynames: Vec<(&str, Box<dyn Fn([f64; 3]) -> f64>)> = vec![
            ("||h||_L1 (y)", Box::new(|_| 1.0)),
            ("||(1+|y|) h||_L1 (y)", Box::new(|y| 1.0 + norm(y))),
        ];
        for (name, f) in ynames {
            let values: Vec<f64> = y_radii.iter().map(|&r| g.terms.iter().map(|t| y_ball_integral(&t.a, r, &f)).sum()).collect();
            checks.push(NormCheck { name: name.into(), radii: y_radii.clone(), values: values.clone(), pass: cauchy(&values) });
        }
        let wnames: Vec<(&str, Box<dyn Fn([f64; 3]) -> f64>)> = if second {
            vec![("||(1+|w|^3) h||_L1 (w)", Box::new(|w| 1.0 + norm(w).powi(3)))]
        } else {
            vec![("||(1+|w|) h||_L1 (w)", Box::new(|w| 1.0 + norm(w)))]
        };
        for (name, f) in wnames {
            let values: Vec<f64> = w_radii.iter().map(|&r| g.terms.iter().map(|t| w_ball_integral(&t.b, r, &f)).sum()).collect();
            checks.push(NormCheck { name: name.into(), radii: w_radii.clone(), values: values.clone(), pass: cauchy(&values) });
        }
        if second {
            let values: Vec<f64> = y_radii
                .iter()
                .map(|&r| g.terms.iter().map(|t| y_ball_integral(&t.a, r, |y| norm(y))).sum())
                .collect();
            checks.push(NormCheck { name: "||(1+|y||w|^2) h||_L1 (y)".into(), radii: y_radii.clone(), values: values.clone(), pass: cauchy(&values) });
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    AdmissibilityReport { checks, pass }
}

/// `‖(1 + |y| + |w|) h‖_{L¹}` for a rank-one profile, or the triangle-inequality bound otherwise.
pub fn weighted_h_norm(g: &ProfileDecomposition) -> f64 {
    g.terms
        .iter()
        .map(|t| {
            let y0 = y_ball_integral(&t.a, 64.0, |_| 1.0);
            let y1 = y_ball_integral(&t.a, 64.0, norm);
            let w0 = w_ball_integral(&t.b, f64::INFINITY, |_| 1.0);
            let w1 = w_ball_integral(&t.b, f64::INFINITY, norm);
            (y0 + y1) * w0 + y0 * w1
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Refuted,
    Consistent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub theta: f64,
    pub gamma: f64,
    pub case: String,
    pub predicted: f64,
    pub measured: f64,
    pub verdict: VerdictKind,
    pub detail: String,
}

/// Decide whether the profile can satisfy the profile equation, using the
/// moment functional appropriate to `θ`.
pub fn refutation_verdict(g: &ProfileDecomposition, theta: f64, op: &dyn CollisionFunctional, cfg: &FunctionalConfig) -> Result<Verdict> {
    let sp = op.params(theta);
    let adm = check_theta_admissible(&sp, op.mode(false));
    let gamma = sp.gamma;
    let weight = if (theta.abs() - 1.0 / 3.0).abs() < 1e-12 { TestWeight::SpeedSq } else { TestWeight::One };
    let case = match weight {
        TestWeight::One => "theta != ±1/3, weight 1".to_string(),
        TestWeight::SpeedSq => format!("theta = {}1/3, weight |w|^2", if theta > 0.0 { "" } else { "-" }),
    };
    let mk = |verdict, predicted, measured, detail: String| Verdict { theta, gamma, case: case.clone(), predicted, measured, verdict, detail };
    if !adm.accepted {
        return Ok(mk(VerdictKind::Inconclusive, 0.0, 0.0, format!("parameters outside the admissible range: {}", adm.violations.join("; "))));
    }
    if g.is_zero() {
        return Ok(mk(VerdictKind::Consistent, 0.0, 0.0, "trivial profile g = 0 solves the profile equation".into()));
    }
    let prof = check_profile_admissibility(g, theta);
    if !prof.pass {
        return Ok(mk(VerdictKind::Inconclusive, 0.0, 0.0, format!("profile not admissible: {}", prof.failed().join(", "))));
    }
    let q_moment = g.q.as_ref().map(|q| weighted_moment(q, weight)).unwrap_or(0.0);
    let stage = if q_moment.abs() > 1e-12 { Stage::Plateau } else { Stage::FullCutoff };
    if stage == Stage::FullCutoff && g.terms.is_empty() {
        return Ok(mk(VerdictKind::Inconclusive, 0.0, 0.0, "q has vanishing weighted moment and there is no h part".into()));
    }
    let rep = moment_functional(g, theta, op, weight, stage, cfg)?;
    let measured = match rep.limit {
        Some(l) => l,
        None => return Ok(mk(VerdictKind::Inconclusive, rep.predicted, f64::NAN, format!("functional did not converge: {}", rep.outer.note))),
    };
    let stage_name = match stage {
        Stage::Plateau => "q",
        Stage::FullCutoff => "h",
    };
    if rep.relative_error > 0.02 {
        return Ok(mk(
            VerdictKind::Inconclusive,
            rep.predicted,
            measured,
            format!("functional limit {measured:.6e} disagrees with coefficient x moment {:.6e}", rep.predicted),
        ));
    }
    if measured.abs() > 1e-8 * rep.outer.scale {
        let what = match weight {
            TestWeight::One => "mass",
            TestWeight::SpeedSq => "|w|^2 moment",
        };
        Ok(mk(
            VerdictKind::Refuted,
            rep.predicted,
            measured,
            format!(
                "residual functional on the {stage_name} part tends to {measured:.6e} = {:.6} x {what} {:.6e}, but must vanish for a solution",
                rep.coefficient, rep.moment
            ),
        ))
    } else {
        Ok(mk(VerdictKind::Consistent, rep.predicted, measured, "weighted moment vanishes".into()))
    }
}
