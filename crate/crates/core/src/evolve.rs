//! Explicit time integration of the homogeneous Landau equation with
//! conservation and entropy monitors, and a Type I blow-up rate fitter.

use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::landau::{LandauOperator, LandauParams};
use crate::report::write_csv;
use crate::selfsim::rescale_snapshot;
use serde::Serialize;
use std::path::Path;

/// Default fraction of `h² / sup‖ā‖` used as time step.
pub const DEFAULT_CFL: f64 = 0.2;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Monitor {
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub entropy: f64,
    pub sup: f64,
    pub l2: f64,
    pub l3: f64,
    /// mass, momentum and energy added by clipping during the step that produced this record
    pub clipped: f64,
    pub clipped_momentum: [f64; 3],
    pub clipped_energy: f64,
}

impl Monitor {
    pub fn of(f: &ScalarField, t: f64) -> Self {
        let g = f.grid;
        let mut mass = 0.0;
        let mut mom = [0.0; 3];
        let mut energy = 0.0;
        let mut entropy = 0.0;
        for i in 0..g.len() {
            let w = g.weight(i);
            if w == 0.0 {
                continue;
            }
            let x = f.data[i];
            let v = g.point(i);
            mass += w * x;
            for d in 0..3 {
                mom[d] += w * x * v[d];
            }
            energy += w * x * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            if x > 0.0 {
                entropy += w * x * x.ln();
            }
        }
        Self { t, mass, momentum: mom, energy, entropy, sup: f.max_abs(), l2: f.lp_norm(2.0), l3: f.lp_norm(3.0), clipped: 0.0, clipped_momentum: [0.0; 3], clipped_energy: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionState {
    pub f: ScalarField,
    pub time: f64,
    pub dt: f64,
    /// recompute `dt` from the stability bound every step
    pub auto_dt: bool,
    pub clipped_mass: f64,
    pub history: Vec<Monitor>,
}

impl EvolutionState {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .history
            .iter()
            .map(|m| vec![m.t, m.mass, m.energy, m.entropy, m.sup, m.l2, m.l3, m.clipped])
            .collect();
        write_csv(path, &["t", "mass", "energy", "entropy", "sup", "l2", "l3", "clipped"], &rows)
    }
}

pub struct Evolver {
    pub op: LandauOperator,
    pub cfl: f64,
}

impl Evolver {
    pub fn new(grid: GridSpec, params: LandauParams) -> Result<Self> {
        Ok(Self { op: LandauOperator::new(grid, params)?, cfl: DEFAULT_CFL })
    }

    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0) {
            return invalid("CFL fraction must be positive");
        }
        self.cfl = cfl;
        Ok(self)
    }

    /// `cfl · h² / sup‖ā^f‖`.
    pub fn stability_bound(&self, f: &ScalarField) -> Result<f64> {
        let a = self.op.coeff_a(f)?.sup_spectral_norm();
        if !(a > 0.0) {
            return Err(Error::Degenerate("diffusion matrix vanishes".into()));
        }
        let h = self.op.grid.spacing();
        Ok(self.cfl * h * h / a)
    }

    /// Starting state; `dt = None` picks the stability bound and keeps adapting it.
    pub fn init(&self, f: ScalarField, dt: Option<f64>) -> Result<EvolutionState> {
        if f.grid != self.op.grid {
            return Err(Error::GridMismatch("initial field must live on the operator grid".into()));
        }
        if f.data.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::OutOfRange("initial density must be finite and non-negative".into()));
        }
        let bound = self.stability_bound(&f)?;
        let (dt, auto_dt) = match dt {
            Some(d) if d > bound => return invalid(format!("dt = {d:e} exceeds the stability bound {bound:e}")),
            Some(d) if d > 0.0 => (d, false),
            Some(d) => return invalid(format!("dt must be positive, got {d}")),
            None => (bound, true),
        };
        let history = vec![Monitor::of(&f, 0.0)];
        Ok(EvolutionState { f, time: 0.0, dt, auto_dt, clipped_mass: 0.0, history })
    }

    /// One explicit step of `∂_t f = Q_L(f, f)` in divergence form.
    pub fn step(&self, state: &mut EvolutionState) -> Result<()> {
        let bound = self.stability_bound(&state.f)?;
        if state.auto_dt {
            state.dt = bound;
        } else if state.dt > bound * (1.0 + 1e-12) {
            return invalid(format!("dt = {:e} exceeds the stability bound {bound:e}", state.dt));
        }
        let q = self.op.q_divergence(&state.f)?;
        state.f.axpy(state.dt, &q);
        let grid = state.f.grid;
        let mut clip = (0.0, [0.0; 3], 0.0);
        for i in 0..grid.len() {
            if state.f.data[i] < 0.0 {
                let m = -grid.weight(i) * state.f.data[i];
                let v = grid.point(i);
                clip.0 += m;
                for d in 0..3 {
                    clip.1[d] += m * v[d];
                }
                clip.2 += m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                state.f.data[i] = 0.0;
            }
        }
        state.clipped_mass += clip.0;
        state.time += state.dt;
        let mut rec = Monitor::of(&state.f, state.time);
        rec.clipped = clip.0;
        rec.clipped_momentum = clip.1;
        rec.clipped_energy = clip.2;
        state.history.push(rec);
        Ok(())
    }

    pub fn run(&self, state: &mut EvolutionState, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }

    /// `(f₁ − f₀)/dt − Q_L(½(f₀ + f₁))`, the centered time residual of two snapshots.
    pub fn time_residual(&self, f0: &ScalarField, f1: &ScalarField, dt: f64) -> Result<ScalarField> {
        f0.check_same_grid(f1)?;
        let op = if f0.grid == self.op.grid { None } else { Some(LandauOperator::new(f0.grid, self.op.params)?) };
        let op = op.as_ref().unwrap_or(&self.op);
        let mut mid = f0.clone();
        mid.axpy(1.0, f1);
        mid.scale(0.5);
        let mut r = f1.clone();
        r.axpy(-1.0, f0);
        r.scale(1.0 / dt);
        r.axpy(-1.0, &op.q_divergence(&mid)?);
        Ok(r)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Drift {
    /// relative drift of the scheme itself, with clipping corrections removed
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    /// relative drift of the clipped field
    pub mass_raw: f64,
    pub energy_raw: f64,
}

/// Largest relative drift in mass, momentum and energy over a history.
pub fn conservation_drift(history: &[Monitor]) -> Drift {
    let m0 = history[0];
    let scale = m0.mass.abs().max(1e-300);
    let escale = m0.energy.abs().max(1e-300);
    let mut d = Drift { mass: 0.0, momentum: 0.0, energy: 0.0, mass_raw: 0.0, energy_raw: 0.0 };
    let mut cm = 0.0;
    let mut cp = [0.0; 3];
    let mut ce = 0.0;
    for m in history {
        cm += m.clipped;
        ce += m.clipped_energy;
        for k in 0..3 {
            cp[k] += m.clipped_momentum[k];
            d.momentum = d.momentum.max((m.momentum[k] - cp[k] - m0.momentum[k]).abs() / scale);
        }
        d.mass = d.mass.max((m.mass - cm - m0.mass).abs() / scale);
        d.energy = d.energy.max((m.energy - ce - m0.energy).abs() / escale);
        d.mass_raw = d.mass_raw.max((m.mass - m0.mass).abs() / scale);
        d.energy_raw = d.energy_raw.max((m.energy - m0.energy).abs() / escale);
    }
    d
}

/// Largest per-step entropy increase.
pub fn max_entropy_increase(history: &[Monitor]) -> f64 {
    history.windows(2).map(|w| w[1].entropy - w[0].entropy).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub lambda: f64,
    pub alpha: f64,
    /// `λ^{2α+3+γ}`
    pub factor: f64,
    pub original: f64,
    pub rescaled: f64,
    /// `rescaled / (factor · original)`
    pub ratio: f64,
}

/// Compares the time residual of two rescaled snapshots with `λ^{2α+3+γ}` times the original one.
///
/// The rescaled fields live on the source grid shrunk by `λ`, so resampling is exact.
pub fn symmetry_check(ev: &Evolver, f0: &ScalarField, f1: &ScalarField, dt: f64, lambda: f64, alpha: f64) -> Result<SymmetryReport> {
    let gamma = ev.op.params.gamma;
    let target = f0.grid.scaled(1.0 / lambda)?;
    let r0 = ev.time_residual(f0, f1, dt)?;
    let s0 = rescale_snapshot(f0, lambda, alpha, gamma, target)?;
    let s1 = rescale_snapshot(f1, lambda, alpha, gamma, target)?;
    let r1 = ev.time_residual(&s0.field, &s1.field, dt * s0.time_factor)?;
    let factor = lambda.powf(2.0 * alpha + 3.0 + gamma);
    let original = r0.max_abs();
    let rescaled = r1.max_abs();
    Ok(SymmetryReport { lambda, alpha, factor, original, rescaled, ratio: rescaled / (factor * original).max(1e-300) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupVerdict {
    TypeI,
    NoBlowUpTrend,
    Inconclusive,
}

impl std::fmt::Display for BlowupVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlowupVerdict::TypeI => "type I blow-up trend",
            BlowupVerdict::NoBlowUpTrend => "no blow-up trend",
            BlowupVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// One norm series `‖f(t_k)‖_{L^q}`; `q = ∞` for the sup norm.
#[derive(Clone, Debug)]
pub struct NormSeries {
    pub q: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub verdict: BlowupVerdict,
    pub theta: Option<f64>,
    pub blowup_time: Option<f64>,
    pub r_squared: f64,
    pub samples: usize,
}

/// Exponent `k_q` in `log‖f‖_q + log(T−t) = c_q − θ k_q log(T−t)`.
fn rate_slope(q: f64, gamma: f64) -> f64 {
    if q.is_infinite() {
        3.0 + gamma
    } else {
        3.0 + gamma - 3.0 / q
    }
}

/// Least-squares θ for a fixed blow-up time; returns `(θ, sse, total)`.
fn fit_theta(times: &[f64], series: &[NormSeries], gamma: f64, big_t: f64) -> Option<(f64, f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        let k = rate_slope(s.q, gamma);
        let l: Vec<f64> = times.iter().map(|t| (big_t - t).ln()).collect();
        let y: Vec<f64> = s.values.iter().zip(&l).map(|(v, l)| v.ln() + l).collect();
        let n = l.len() as f64;
        let lm = l.iter().sum::<f64>() / n;
        let ym = y.iter().sum::<f64>() / n;
        for (li, yi) in l.iter().zip(&y) {
            xs.push(-k * (li - lm));
            ys.push(yi - ym);
        }
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let theta = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let sse = xs.iter().zip(&ys).map(|(x, y)| (y - theta * x).powi(2)).sum();
    let tot = ys.iter().map(|y| y * y).sum();
    Some((theta, sse, tot))
}

/// Relative sup-norm growth over a history below which it counts as stationary.
pub const STATIONARY_GROWTH: f64 = 1e-2;

/// Fits `‖f‖_q ∝ (T − t)^{−1−θ(3+γ)+3θ/q}` jointly over the given series.
pub fn fit_type_one(times: &[f64], series: &[NormSeries], gamma: f64) -> Result<BlowupReport> {
    if times.len() < 10 {
        return invalid(format!("need at least 10 recorded steps, got {}", times.len()));
    }
    if series.is_empty() || series.iter().any(|s| s.values.len() != times.len() || s.values.iter().any(|&v| !(v > 0.0))) {
        return invalid("each norm series needs one positive value per time");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("times must increase strictly");
    }
    let sup = series.iter().find(|s| s.q.is_infinite()).unwrap_or(&series[0]);
    let last = *times.last().unwrap();
    let span = last - times[0];
    let n = sup.values.len();
    if sup.values[n - 1] <= sup.values[0] * (1.0 + STATIONARY_GROWTH) {
        return Ok(BlowupReport { verdict: BlowupVerdict::NoBlowUpTrend, theta: None, blowup_time: None, r_squared: 0.0, samples: n });
    }
    let (lo, hi) = ((span * 1e-8).ln(), (span * 1e3).ln());
    let sse = |u: f64| fit_theta(times, series, gamma, last + u.exp()).map(|r| r.1).unwrap_or(f64::INFINITY);
    let grid = 400;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=grid {
        let u = lo + (hi - lo) * k as f64 / grid as f64;
        let e = sse(u);
        if e < best.1 {
            best = (u, e);
        }
    }
    let step = (hi - lo) / grid as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let u = 0.5 * (a + b);
    let big_t = last + u.exp();
    let (theta, e, tot) = fit_theta(times, series, gamma, big_t).ok_or_else(|| Error::Degenerate("norm series carry no information on θ".into()))?;
    let r2 = if tot > 0.0 { 1.0 - e / tot } else { 1.0 };
    let at_edge = u > hi - 2.0 * step;
    let verdict = if r2 >= 0.99 && !at_edge { BlowupVerdict::TypeI } else { BlowupVerdict::Inconclusive };
    Ok(BlowupReport { verdict, theta: Some(theta), blowup_time: Some(big_t), r_squared: r2, samples: n })
}

/// Blow-up diagnostics on a monitor history, using the sup, `L²` and `L³` norms.
pub fn blowup_indicator(history: &[Monitor], gamma: f64) -> Result<BlowupReport> {
    let times: Vec<f64> = history.iter().map(|m| m.t).collect();
    let series = vec![
        NormSeries { q: f64::INFINITY, values: history.iter().map(|m| m.sup).collect() },
        NormSeries { q: 2.0, values: history.iter().map(|m| m.l2).collect() },
        NormSeries { q: 3.0, values: history.iter().map(|m| m.l3).collect() },
    ];
    fit_type_one(&times, &series, gamma)
}

/// Norms following the Type I rates exactly, for testing the fitter.
pub fn manufactured_history(theta: f64, gamma: f64, blowup_time: f64, times: &[f64]) -> Vec<Monitor> {
    let rate = |q: f64| 1.0 + theta * (3.0 + gamma) - if q.is_infinite() { 0.0 } else { 3.0 * theta / q };
    times
        .iter()
        .map(|&t| {
            let s = blowup_time - t;
            Monitor {
                t,
                mass: 1.0,
                momentum: [0.0; 3],
                energy: 3.0,
                entropy: 0.0,
                sup: 0.4 * s.powf(-rate(f64::INFINITY)),
                l2: 0.2 * s.powf(-rate(2.0)),
                l3: 0.3 * s.powf(-rate(3.0)),
                clipped: 0.0,
                clipped_momentum: [0.0; 3],
                clipped_energy: 0.0,
            }
        })
        .collect()
}
