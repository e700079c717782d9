//! Landau coefficients and collision operator on a velocity grid.
//!
//! `ā^f = a_γ (Π(z)|z|^{γ+2}) * f`, `c̄^f = c_γ |z|^γ * f` (or `c_γ f` at γ = -3).
//! Convolutions are discrete sums with a corrected weight at the singular cell.

use crate::error::{invalid, Error, Result};
use crate::fft::{direct_convolution, Convolver, Spectrum};
use crate::grid::{sym_slot, Cutoff, GridSpec, MatrixField, ScalarField, Weight, SYM_PAIRS};
use crate::report::{extrapolate, LimitReport};
use crate::stencil::{self, diff1_raw, interior, laplacian7, HALO};
use crate::zeta::epstein_zeta;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauParams {
    pub gamma: f64,
    pub a_const: f64,
    pub c_const: f64,
}

impl LandauParams {
    /// `c_γ` is chosen so that the trace and divergence forms coincide.
    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_a(gamma, 1.0)
    }

    pub fn with_a(gamma: f64, a_const: f64) -> Result<Self> {
        Self::validate_gamma(gamma)?;
        Self::with_constants(gamma, a_const, Self::consistent_c(gamma, a_const))
    }

    pub fn with_constants(gamma: f64, a_const: f64, c_const: f64) -> Result<Self> {
        Self::validate_gamma(gamma)?;
        if !(a_const > 0.0) || !(c_const > 0.0) || !a_const.is_finite() || !c_const.is_finite() {
            return invalid(format!("landau constants must be positive, got a={a_const} c={c_const}"));
        }
        Ok(Self { gamma, a_const, c_const })
    }

    fn validate_gamma(gamma: f64) -> Result<()> {
        if !(-3.0..=-2.0).contains(&gamma) {
            return invalid(format!("gamma must lie in [-3, -2], got {gamma}"));
        }
        Ok(())
    }

    pub fn consistent_c(gamma: f64, a_const: f64) -> f64 {
        if gamma == -3.0 {
            8.0 * PI * a_const
        } else {
            2.0 * (gamma + 3.0) * a_const
        }
    }

    pub fn is_coulomb(&self) -> bool {
        self.gamma == -3.0
    }
}

/// Treatment of the `z = 0` cell in the discrete convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularCell {
    /// Lattice-sum (Epstein zeta) correction of the punctured sum.
    LatticeZeta,
    /// Exact kernel integral over the ball with the cell's volume.
    EqualVolumeBall,
}

/// `Π(z) = I - z z^T / |z|^2`.
pub fn projection_pi(z: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if r2 == 0.0 || !r2.is_finite() {
        return invalid("projection is undefined at z = 0");
    }
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = if i == j { 1.0 } else { 0.0 } - z[i] * z[j] / r2;
        }
    }
    Ok(p)
}

/// Discrete kernel weights, shared by the FFT path and the direct oracle.
#[derive(Clone, Copy, Debug)]
pub struct KernelWeights {
    pub h: f64,
    pub params: LandauParams,
    pub a_origin: f64,
    pub c_origin: f64,
    pub c_laplacian: f64,
}

impl KernelWeights {
    pub fn new(grid: GridSpec, params: LandauParams, cell: SingularCell) -> Result<Self> {
        let h = grid.spacing();
        let (g, a, c) = (params.gamma, params.a_const, params.c_const);
        let e = g + 2.0;
        let rho = (3.0 / (4.0 * PI)).powf(1.0 / 3.0) * h;
        let (a_origin, c_origin, c_laplacian) = match cell {
            SingularCell::LatticeZeta => {
                let ao = -(2.0 / 3.0) * a * h.powf(3.0 + e) * epstein_zeta(-e)?;
                if params.is_coulomb() {
                    (ao, 0.0, 0.0)
                } else {
                    let co = -c * h.powf(3.0 + g) * epstein_zeta(-g)?;
                    let cl = -c * h.powf(5.0 + g) * epstein_zeta(-g - 2.0)? / 6.0;
                    (ao, co, cl)
                }
            }
            SingularCell::EqualVolumeBall => {
                let ao = a * (2.0 / 3.0) * 4.0 * PI * rho.powf(e + 3.0) / (e + 3.0);
                let co = if params.is_coulomb() { 0.0 } else { c * 4.0 * PI * rho.powf(g + 3.0) / (g + 3.0) };
                (ao, co, 0.0)
            }
        };
        Ok(Self { h, params, a_origin, c_origin, c_laplacian })
    }

    pub fn matrix(&self, d: [i64; 3], p: usize, q: usize) -> f64 {
        if d == [0, 0, 0] {
            return if p == q { self.a_origin } else { 0.0 };
        }
        let e = self.params.gamma + 2.0;
        let z = [d[0] as f64, d[1] as f64, d[2] as f64];
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        let delta = if p == q { 1.0 } else { 0.0 };
        self.params.a_const * self.h.powf(3.0 + e) * r.powf(e) * (delta - z[p] * z[q] / r2)
    }

    pub fn radial(&self, d: [i64; 3]) -> f64 {
        if d == [0, 0, 0] {
            return self.c_origin;
        }
        let g = self.params.gamma;
        let r = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
        self.params.c_const * self.h.powf(3.0 + g) * r.powf(g)
    }
}

pub struct Coefficients {
    pub a: MatrixField,
    pub c: ScalarField,
}

pub struct LandauOperator {
    pub grid: GridSpec,
    pub params: LandauParams,
    pub cell: SingularCell,
    pub weights: KernelWeights,
    pub(crate) conv: Convolver,
    a_kernels: Vec<Spectrum>,
    c_kernel: Option<Spectrum>,
}

/// Flux is kept only on nodes at least this far from every face.
pub const FLUX_MARGIN: usize = HALO + 1;

impl LandauOperator {
    pub fn new(grid: GridSpec, params: LandauParams) -> Result<Self> {
        Self::with_cell(grid, params, SingularCell::LatticeZeta)
    }

    pub fn with_cell(grid: GridSpec, params: LandauParams, cell: SingularCell) -> Result<Self> {
        let weights = KernelWeights::new(grid, params, cell)?;
        let conv = Convolver::new(grid);
        let a_kernels = SYM_PAIRS.iter().map(|&(p, q)| conv.kernel(|d| weights.matrix(d, p, q))).collect();
        let c_kernel = if params.is_coulomb() { None } else { Some(conv.kernel(|d| weights.radial(d))) };
        Ok(Self { grid, params, cell, weights, conv, a_kernels, c_kernel })
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch(format!("operator grid {:?}, field grid {:?}", self.grid, f.grid)));
        }
        if f.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::OutOfRange("field contains non-finite values".into()));
        }
        Ok(())
    }

    fn matrix_from_spectrum(&self, s: &Spectrum) -> MatrixField {
        let comps: Vec<Vec<f64>> = self.a_kernels.par_iter().map(|k| self.conv.apply(s, k)).collect();
        let data = (0..self.grid.len())
            .map(|i| [comps[0][i], comps[1][i], comps[2][i], comps[3][i], comps[4][i], comps[5][i]])
            .collect();
        MatrixField { grid: self.grid, data }
    }

    fn radial_from_spectrum(&self, s: &Spectrum, f: &ScalarField) -> ScalarField {
        match &self.c_kernel {
            None => f.scaled(self.params.c_const),
            Some(k) => {
                let mut out = ScalarField { grid: self.grid, data: self.conv.apply(s, k) };
                if self.weights.c_laplacian != 0.0 {
                    let lap = laplacian7(f);
                    out.axpy(self.weights.c_laplacian, &lap);
                }
                out
            }
        }
    }

    pub fn coeff_a(&self, f: &ScalarField) -> Result<MatrixField> {
        self.check(f)?;
        Ok(self.matrix_from_spectrum(&self.conv.forward(&f.data)))
    }

    pub fn coeff_c(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        if self.params.is_coulomb() {
            return Ok(f.scaled(self.params.c_const));
        }
        Ok(self.radial_from_spectrum(&self.conv.forward(&f.data), f))
    }

    pub fn coefficients(&self, f: &ScalarField) -> Result<Coefficients> {
        self.check(f)?;
        let s = self.conv.forward(&f.data);
        Ok(Coefficients { a: self.matrix_from_spectrum(&s), c: self.radial_from_spectrum(&s, f) })
    }

    /// `tr(ā^{f1} D² f2) + c̄^{f1} f2`.
    pub fn q_trace_bilinear(&self, f1: &ScalarField, f2: &ScalarField) -> Result<ScalarField> {
        self.check(f2)?;
        let co = self.coefficients(f1)?;
        let hess = stencil::hessian(f2);
        let data = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let a = &co.a.data[i];
                let tr = a[0] * hess[0][i] + a[3] * hess[3][i] + a[5] * hess[5][i]
                    + 2.0 * (a[1] * hess[1][i] + a[2] * hess[2][i] + a[4] * hess[4][i]);
                tr + co.c.data[i] * f2.data[i]
            })
            .collect();
        Ok(ScalarField { grid: self.grid, data })
    }

    pub fn q_trace(&self, f: &ScalarField) -> Result<ScalarField> {
        self.q_trace_bilinear(f, f)
    }

    /// `b_i = Σ_j ∂_j ā_ij` with the same first-derivative stencil as the flux.
    pub fn drift(&self, a: &MatrixField) -> [Vec<f64>; 3] {
        let g = &self.grid;
        let comp = |s: usize| -> Vec<f64> { a.data.iter().map(|m| m[s]).collect() };
        let mut b: [Vec<f64>; 3] = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for (i, bi) in b.iter_mut().enumerate() {
            for j in 0..3 {
                let d = diff1_raw(g, &comp(sym_slot(i, j)), j);
                bi.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
            }
        }
        b
    }

    /// `J = ā^{f1} ∇f2 - b^{f1} f2`, zero near the boundary.
    pub fn flux(&self, f1: &ScalarField, f2: &ScalarField) -> Result<[Vec<f64>; 3]> {
        self.check(f2)?;
        let a = self.coeff_a(f1)?;
        let b = self.drift(&a);
        let g = self.grid;
        let grad: Vec<Vec<f64>> = (0..3).map(|k| diff1_raw(&g, &f2.data, k)).collect();
        let mut j: [Vec<f64>; 3] = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for idx in 0..g.len() {
            if !interior(&g, idx, FLUX_MARGIN) {
                continue;
            }
            let m = &a.data[idx];
            let gr = [grad[0][idx], grad[1][idx], grad[2][idx]];
            for p in 0..3 {
                let mut s = -b[p][idx] * f2.data[idx];
                for q in 0..3 {
                    s += m[sym_slot(p, q)] * gr[q];
                }
                j[p][idx] = s;
            }
        }
        Ok(j)
    }

    /// `∇·(ā^{f1}∇f2 - b^{f1} f2)`, conservative by construction.
    pub fn q_divergence_bilinear(&self, f1: &ScalarField, f2: &ScalarField) -> Result<ScalarField> {
        let j = self.flux(f1, f2)?;
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for (k, jk) in j.iter().enumerate() {
            let d = diff1_raw(&g, jk, k);
            out.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
        }
        Ok(ScalarField { grid: g, data: out })
    }

    pub fn q_divergence(&self, f: &ScalarField) -> Result<ScalarField> {
        self.q_divergence_bilinear(f, f)
    }

    /// `(K * v)_i = Σ_j K_ij * v_j` for a vector field `v`.
    pub fn kernel_apply_vector(&self, v: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
        let specs: Vec<Spectrum> = v.par_iter().map(|c| self.conv.forward(c)).collect();
        let out: Vec<Vec<f64>> = (0..3)
            .into_par_iter()
            .map(|i| {
                let terms: Vec<(&Spectrum, &Spectrum)> =
                    (0..3).map(|j| (&specs[j], &self.a_kernels[sym_slot(i, j)])).collect();
                self.conv.apply_sum(&terms)
            })
            .collect();
        let mut it = out.into_iter();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    /// Landau entropy dissipation
    /// `½ ∬ g g_* K(w - w_*) : (∇log g - ∇_* log g_*)^{⊗2}`
    /// evaluated through convolutions; `g` is floored at `floor` inside the logarithm.
    pub fn entropy_dissipation(&self, g: &ScalarField, floor: f64) -> Result<f64> {
        self.check(g)?;
        if floor.is_nan() || floor < 0.0 {
            return invalid("floor must be non-negative");
        }
        if g.data.iter().any(|&x| x < 0.0) {
            return Err(Error::OutOfRange("dissipation requires a non-negative field".into()));
        }
        if floor == 0.0 && g.data.iter().enumerate().any(|(i, &x)| x == 0.0 && !self.grid.is_ghost(i)) {
            return Err(Error::OutOfRange("field vanishes inside the grid; supply a positive floor".into()));
        }
        let (u, v) = self.log_gradients(g, floor);
        let a = self.coeff_a(g)?;
        let kv = self.kernel_apply_vector(&v);
        let gr = &self.grid;
        let total: f64 = (0..gr.len())
            .into_par_iter()
            .map(|i| {
                let w = gr.weight(i);
                if w == 0.0 {
                    return 0.0;
                }
                let m = &a.data[i];
                let ui = [u[0][i], u[1][i], u[2][i]];
                let mut quad = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        quad += ui[p] * m[sym_slot(p, q)] * ui[q];
                    }
                }
                let cross = v[0][i] * kv[0][i] + v[1][i] * kv[1][i] + v[2][i] * kv[2][i];
                w * (g.data[i] * quad - cross)
            })
            .sum();
        Ok(total)
    }

    /// `u = ∇ log max(g, floor)` and `v = g u`.
    pub(crate) fn log_gradients(&self, g: &ScalarField, floor: f64) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
        let gr = self.grid;
        let mut u: [Vec<f64>; 3] = [vec![0.0; gr.len()], vec![0.0; gr.len()], vec![0.0; gr.len()]];
        let mut v = u.clone();
        if floor == 0.0 {
            for k in 0..3 {
                let d = diff1_raw(&gr, &g.data, k);
                for i in 0..gr.len() {
                    let ui = if g.data[i] > 0.0 { d[i] / g.data[i] } else { 0.0 };
                    u[k][i] = ui;
                    v[k][i] = g.data[i] * ui;
                }
            }
            return (u, v);
        }
        let logg: Vec<f64> = g.data.iter().map(|x| x.max(floor).ln()).collect();
        for k in 0..3 {
            let d = diff1_raw(&gr, &logg, k);
            for i in 0..gr.len() {
                u[k][i] = d[i];
                v[k][i] = g.data[i] * d[i];
            }
        }
        (u, v)
    }

    /// `∫ χ_R(w) ψ(w) Q_L(g,g)(w) dw` for each radius, then `R → ∞`.
    pub fn cutoff_limit(&self, g: &ScalarField, radii: &[f64], weight: &Weight, rel_tol: f64) -> Result<LimitReport> {
        let q = self.q_divergence(g)?;
        let scale = q.lp_norm(1.0).max(f64::MIN_POSITIVE);
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let c = Cutoff::new(r)?;
                Ok(cutoff_weighted_sum(&q, |v| c.value(v) * weight.eval(v)))
            })
            .collect::<Result<_>>()?;
        let mut rep = extrapolate(radii, &values, rel_tol * scale)?;
        rep.scale = scale;
        rep.pass = rep.limit.map(|l| l.abs() <= rel_tol * scale).unwrap_or(false);
        Ok(rep)
    }

    pub fn cutoff_limit_mass(&self, g: &ScalarField, radii: &[f64], rel_tol: f64) -> Result<LimitReport> {
        self.cutoff_limit(g, radii, &Weight::one(), rel_tol)
    }

    pub fn cutoff_limit_energy(&self, g: &ScalarField, radii: &[f64], rel_tol: f64) -> Result<LimitReport> {
        self.cutoff_limit(g, radii, &Weight::speed_sq(), rel_tol)
    }

    /// `∫ χ_R log g Q_L(g,g)`; the limit is `-D(g)` and therefore non-positive.
    pub fn cutoff_limit_entropy(&self, g: &ScalarField, radii: &[f64], floor: f64) -> Result<LimitReport> {
        if !(floor > 0.0) {
            return invalid("entropy limit needs a positive floor");
        }
        let q = self.q_divergence(g)?;
        let logg: Vec<f64> = g.data.iter().map(|x| x.max(floor).ln()).collect();
        let scale = q.data.iter().zip(&logg).enumerate().map(|(i, (a, b))| (a * b).abs() * self.grid.weight(i)).sum::<f64>();
        let grid = self.grid;
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let c = Cutoff::new(r)?;
                Ok((0..grid.len()).map(|i| grid.weight(i) * c.value(grid.point(i)) * logg[i] * q.data[i]).sum())
            })
            .collect::<Result<_>>()?;
        let mut rep = extrapolate(radii, &values, 1e-9 * scale.max(f64::MIN_POSITIVE))?;
        rep.scale = scale;
        rep.pass = rep.limit.map(|l| l <= 1e-9 * scale).unwrap_or(false);
        Ok(rep)
    }
}

fn cutoff_weighted_sum(q: &ScalarField, w: impl Fn([f64; 3]) -> f64 + Sync) -> f64 {
    let g = q.grid;
    (0..g.len()).into_par_iter().map(|i| g.weight(i) * w(g.point(i)) * q.data[i]).sum()
}

pub fn coeff_a(f: &ScalarField, params: LandauParams) -> Result<MatrixField> {
    LandauOperator::new(f.grid, params)?.coeff_a(f)
}

pub fn coeff_c(f: &ScalarField, params: LandauParams) -> Result<ScalarField> {
    LandauOperator::new(f.grid, params)?.coeff_c(f)
}

pub fn q_landau_trace(f: &ScalarField, params: LandauParams) -> Result<ScalarField> {
    LandauOperator::new(f.grid, params)?.q_trace(f)
}

pub fn q_landau_divergence(f: &ScalarField, params: LandauParams) -> Result<ScalarField> {
    LandauOperator::new(f.grid, params)?.q_divergence(f)
}

pub fn entropy_dissipation(g: &ScalarField, params: LandauParams, floor: f64) -> Result<f64> {
    LandauOperator::new(g.grid, params)?.entropy_dissipation(g, floor)
}

/// Matrix coefficient by direct summation; `O(N^2)`, intended for small grids.
pub fn coeff_a_direct(f: &ScalarField, params: LandauParams, cell: SingularCell) -> Result<MatrixField> {
    let w = KernelWeights::new(f.grid, params, cell)?;
    let comps: Vec<Vec<f64>> = SYM_PAIRS
        .iter()
        .map(|&(p, q)| direct_convolution(&f.grid, &f.data, |d| w.matrix(d, p, q)))
        .collect();
    let data = (0..f.grid.len())
        .map(|i| [comps[0][i], comps[1][i], comps[2][i], comps[3][i], comps[4][i], comps[5][i]])
        .collect();
    Ok(MatrixField { grid: f.grid, data })
}

/// Entropy dissipation as the explicit symmetric double sum; `O(N^2)`.
pub fn entropy_dissipation_direct(g: &ScalarField, params: LandauParams, floor: f64) -> Result<f64> {
    let op = LandauOperator::new(g.grid, params)?;
    let (u, _) = op.log_gradients(g, floor);
    let gr = g.grid;
    let e = params.gamma + 2.0;
    let h = gr.spacing();
    let nodes: Vec<usize> = (0..gr.len()).filter(|&i| !gr.is_ghost(i) && g.data[i] != 0.0).collect();
    let total: f64 = nodes
        .par_iter()
        .map(|&i| {
            let pi = gr.point(i);
            let mut acc = 0.0;
            for &j in &nodes {
                if i == j {
                    continue;
                }
                let pj = gr.point(j);
                let z = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
                let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
                let du = [u[0][i] - u[0][j], u[1][i] - u[1][j], u[2][i] - u[2][j]];
                let zu = z[0] * du[0] + z[1] * du[1] + z[2] * du[2];
                let quad = du[0] * du[0] + du[1] * du[1] + du[2] * du[2] - zu * zu / r2;
                acc += g.data[j] * r2.powf(e / 2.0) * quad;
            }
            g.data[i] * acc
        })
        .sum();
    Ok(0.5 * params.a_const * h.powi(6) * total)
}
