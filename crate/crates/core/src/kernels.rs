//! Convolution with homogeneous kernels other than the Landau matrix.

use crate::error::{invalid, Result};
use crate::fft::{Convolver, Spectrum};
use crate::grid::{GridSpec, ScalarField};
use crate::stencil::{diff1, laplacian7};
use crate::zeta::epstein_zeta;
use rayon::prelude::*;

/// `f ↦ C ∫ f(v - z) |z|^s dz` for `-3 < s < 0`.
pub struct RadialConvolution {
    pub grid: GridSpec,
    pub exponent: f64,
    pub constant: f64,
    conv: Convolver,
    kernel: Spectrum,
    laplacian_weight: f64,
}

impl RadialConvolution {
    pub fn new(grid: GridSpec, exponent: f64, constant: f64) -> Result<Self> {
        if !(exponent > -3.0 && exponent < 0.0) {
            return invalid(format!("radial exponent must lie in (-3, 0), got {exponent}"));
        }
        let h = grid.spacing();
        let origin = -constant * h.powf(3.0 + exponent) * epstein_zeta(-exponent)?;
        let laplacian_weight = -constant * h.powf(5.0 + exponent) * epstein_zeta(-exponent - 2.0)? / 6.0;
        let conv = Convolver::new(grid);
        let kernel = conv.kernel(|d| {
            if d == [0, 0, 0] {
                origin
            } else {
                let r = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
                constant * h.powf(3.0 + exponent) * r.powf(exponent)
            }
        });
        Ok(Self { grid, exponent, constant, conv, kernel, laplacian_weight })
    }

    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        let s = self.conv.forward(&f.data);
        let mut out = ScalarField { grid: self.grid, data: self.conv.apply(&s, &self.kernel) };
        out.axpy(self.laplacian_weight, &laplacian7(f));
        out
    }
}

/// Vector kernel `z / |z|^3` scaled by `constant`; odd, so the origin weight is zero.
/// The leading lattice defect is restored through a gradient term.
pub struct CoulombForce {
    pub grid: GridSpec,
    pub constant: f64,
    conv: Convolver,
    kernels: Vec<Spectrum>,
    gradient_weight: f64,
}

impl CoulombForce {
    pub fn new(grid: GridSpec, constant: f64) -> Self {
        let h = grid.spacing();
        let conv = Convolver::new(grid);
        let kernels = (0..3)
            .map(|k| {
                conv.kernel(|d| {
                    if d == [0, 0, 0] {
                        return 0.0;
                    }
                    let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
                    constant * h * d[k] as f64 / (r2 * r2.sqrt())
                })
            })
            .collect();
        let gradient_weight = constant * h * h * epstein_zeta(1.0).expect("zeta(1) is regular") / 3.0;
        Self { grid, constant, conv, kernels, gradient_weight }
    }

    pub fn apply(&self, rho: &ScalarField) -> [ScalarField; 3] {
        let s = self.conv.forward(&rho.data);
        let comps: Vec<ScalarField> =
            self.kernels.par_iter().map(|k| ScalarField { grid: self.grid, data: self.conv.apply(&s, k) }).collect();
        let mut comps = comps;
        for (k, c) in comps.iter_mut().enumerate() {
            c.axpy(self.gradient_weight, &diff1(rho, k));
        }
        let mut it = comps.into_iter();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }
}

/// First velocity derivatives of the Landau matrix kernel, `∂_k (Π(z)|z|^{γ+2})_{ij}`.
pub struct MatrixKernelGradient {
    pub grid: GridSpec,
    conv: Convolver,
    /// `kernels[k][slot]`
    kernels: Vec<Vec<Spectrum>>,
}

impl MatrixKernelGradient {
    pub fn new(grid: GridSpec, gamma: f64, a_const: f64) -> Self {
        let h = grid.spacing();
        let e = gamma + 2.0;
        let conv = Convolver::new(grid);
        let kernels = (0..3)
            .map(|k| {
                crate::grid::SYM_PAIRS
                    .iter()
                    .map(|&(i, j)| {
                        conv.kernel(|d| {
                            if d == [0, 0, 0] {
                                return 0.0;
                            }
                            let z = [d[0] as f64, d[1] as f64, d[2] as f64];
                            let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
                            let r = r2.sqrt();
                            let dij = if i == j { 1.0 } else { 0.0 };
                            let dik = if i == k { 1.0 } else { 0.0 };
                            let djk = if j == k { 1.0 } else { 0.0 };
                            let v = dij * e * r.powf(e - 2.0) * z[k]
                                - (dik * z[j] + djk * z[i]) * r.powf(e - 2.0)
                                - (e - 2.0) * z[i] * z[j] * z[k] * r.powf(e - 4.0);
                            a_const * h.powf(2.0 + e) * v
                        })
                    })
                    .collect()
            })
            .collect();
        Self { grid, conv, kernels }
    }

    /// `[∂_k ā]` as symmetric-packed matrices per node, for `k = 0, 1, 2`.
    pub fn apply(&self, f: &ScalarField) -> Vec<Vec<[f64; 6]>> {
        let s = self.conv.forward(&f.data);
        (0..3)
            .map(|k| {
                let comps: Vec<Vec<f64>> = self.kernels[k].par_iter().map(|kern| self.conv.apply(&s, kern)).collect();
                (0..self.grid.len())
                    .map(|i| [comps[0][i], comps[1][i], comps[2][i], comps[3][i], comps[4][i], comps[5][i]])
                    .collect()
            })
            .collect()
    }
}
