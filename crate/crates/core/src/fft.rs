//! Linear 3D convolution on a grid through zero-padded real FFTs.

use crate::grid::GridSpec;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Half-complex spectrum of a padded `(2n)^3` array.
#[derive(Clone)]
pub struct Spectrum(pub Vec<Complex64>);

pub struct Convolver {
    pub grid: GridSpec,
    p: usize,
    m: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(grid: GridSpec) -> Self {
        let p = 2 * grid.n;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            grid,
            p,
            m: p / 2 + 1,
            r2c: rp.plan_fft_forward(p),
            c2r: rp.plan_fft_inverse(p),
            fwd: cp.plan_fft_forward(p),
            inv: cp.plan_fft_inverse(p),
        }
    }

    fn transform(&self, mut real: Vec<f64>) -> Spectrum {
        let (p, m) = (self.p, self.m);
        let mut spec = vec![Complex64::new(0.0, 0.0); m * p * p];
        spec.par_chunks_mut(m).zip(real.par_chunks_mut(p)).for_each(|(out, inp)| {
            self.r2c.process(inp, out).expect("r2c length");
        });
        self.pass_yz(&mut spec, &self.fwd);
        Spectrum(spec)
    }

    fn pass_yz(&self, spec: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let (p, m) = (self.p, self.m);
        // along y inside each z-plane
        spec.par_chunks_mut(m * p).for_each(|plane| {
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for i in 0..m {
                for j in 0..p {
                    line[j] = plane[i + m * j];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..p {
                    plane[i + m * j] = line[j];
                }
            }
        });
        // along z, batched over contiguous x-runs
        let plane_len = m * p;
        let mut line = vec![Complex64::new(0.0, 0.0); p * m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for j in 0..p {
            for k in 0..p {
                let src = &spec[k * plane_len + j * m..k * plane_len + j * m + m];
                for i in 0..m {
                    line[i * p + k] = src[i];
                }
            }
            for i in 0..m {
                plan.process_with_scratch(&mut line[i * p..(i + 1) * p], &mut scratch);
            }
            for k in 0..p {
                let dst = &mut spec[k * plane_len + j * m..k * plane_len + j * m + m];
                for i in 0..m {
                    dst[i] = line[i * p + k];
                }
            }
        }
    }

    /// Spectrum of a kernel given by its weight at each integer offset.
    pub fn kernel(&self, weight: impl Fn([i64; 3]) -> f64 + Sync) -> Spectrum {
        let (p, n) = (self.p, self.grid.n as i64);
        let real: Vec<f64> = (0..p * p * p)
            .into_par_iter()
            .map(|idx| {
                let c = [idx % p, (idx / p) % p, idx / (p * p)];
                let mut d = [0i64; 3];
                for a in 0..3 {
                    let x = c[a] as i64;
                    d[a] = if x < n { x } else { x - 2 * n };
                    if d[a] == -n {
                        return 0.0;
                    }
                }
                weight(d)
            })
            .collect();
        self.transform(real)
    }

    /// Spectrum of a grid field; the ghost face is excluded.
    pub fn forward(&self, data: &[f64]) -> Spectrum {
        let (p, n) = (self.p, self.grid.n);
        let mut real = vec![0.0; p * p * p];
        for k in 1..n {
            for j in 1..n {
                let src = &data[self.grid.index(1, j, k)..self.grid.index(0, j, k) + n];
                let off = 1 + p * (j + p * k);
                real[off..off + n - 1].copy_from_slice(src);
            }
        }
        self.transform(real)
    }

    /// Inverse of the pointwise product `Σ_k a_k * b_k`, restricted to the grid.
    pub fn apply_sum(&self, terms: &[(&Spectrum, &Spectrum)]) -> Vec<f64> {
        let (p, m, n) = (self.p, self.m, self.grid.n);
        let mut spec: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); m * p * p];
        for (a, b) in terms {
            spec.par_iter_mut().zip(a.0.par_iter().zip(b.0.par_iter())).for_each(|(s, (x, y))| *s += x * y);
        }
        self.pass_yz(&mut spec, &self.inv);
        let mut real = vec![0.0; p * p * p];
        real.par_chunks_mut(p).zip(spec.par_chunks_mut(m)).for_each(|(out, inp)| {
            inp[0].im = 0.0;
            inp[m - 1].im = 0.0;
            self.c2r.process(inp, out).expect("c2r length");
        });
        let scale = 1.0 / (p * p * p) as f64;
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for j in 0..n {
                let src = p * (j + p * k);
                let dst = self.grid.index(0, j, k);
                for i in 0..n {
                    out[dst + i] = real[src + i] * scale;
                }
            }
        }
        out
    }

    pub fn apply(&self, field: &Spectrum, kernel: &Spectrum) -> Vec<f64> {
        self.apply_sum(&[(field, kernel)])
    }
}

/// Direct `O(N^2)` evaluation of the same discrete convolution, for checks on small grids.
pub fn direct_convolution(grid: &GridSpec, data: &[f64], weight: impl Fn([i64; 3]) -> f64 + Sync) -> Vec<f64> {
    let n = grid.n;
    (0..grid.len())
        .into_par_iter()
        .map(|out| {
            let (i, j, k) = grid.unindex(out);
            let mut acc = 0.0;
            for src in 0..grid.len() {
                if grid.is_ghost(src) {
                    continue;
                }
                let (a, b, c) = grid.unindex(src);
                let d = [i as i64 - a as i64, j as i64 - b as i64, k as i64 - c as i64];
                acc += weight(d) * data[src];
            }
            let _ = n;
            acc
        })
        .collect()
}
