//! Uniform velocity grids, scalar and matrix fields, cutoffs, weighted
//! quadrature and dyadic shells.
//!
//! Nodes sit at `(i - n/2) h` with `h = 2L/n`, so the origin is a node and the
//! grid is symmetric about it except for the face at `-L`. That face is a ghost
//! layer: it carries zero quadrature weight and is ignored by convolutions, so
//! every quadrature runs over a set of nodes symmetric under `v -> -v`.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return invalid(format!("grid size must be even and at least 8, got {n}"));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return invalid(format!("grid extent must be positive, got {extent}"));
        }
        Ok(Self { n, extent })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn coord1(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unindex(idx);
        [self.coord1(i), self.coord1(j), self.coord1(k)]
    }

    pub fn center_index(&self) -> usize {
        let c = self.n / 2;
        self.index(c, c, c)
    }

    /// Quadrature weight of a node (zero on the ghost face).
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j, k) = self.unindex(idx);
        if i == 0 || j == 0 || k == 0 {
            0.0
        } else {
            self.cell_volume()
        }
    }

    pub fn is_ghost(&self, idx: usize) -> bool {
        let (i, j, k) = self.unindex(idx);
        i == 0 || j == 0 || k == 0
    }

    /// Same node count, extent multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.extent * factor)
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Anything that can be evaluated at an arbitrary velocity.
pub trait Density: Sync {
    fn eval(&self, v: [f64; 3]) -> f64;
}

impl<F: Fn([f64; 3]) -> f64 + Sync> Density for F {
    fn eval(&self, v: [f64; 3]) -> f64 {
        self(v)
    }
}

/// Isotropic or axis-anisotropic Gaussian with prescribed mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub center: [f64; 3],
    pub sigma: [f64; 3],
    pub mass: f64,
}

impl Gaussian {
    pub fn isotropic(mass: f64, sigma: f64) -> Self {
        Self { center: [0.0; 3], sigma: [sigma; 3], mass }
    }

    /// Unit-mass standard Maxwellian.
    pub fn maxwellian() -> Self {
        Self::isotropic(1.0, 1.0)
    }

    pub fn peak(&self) -> f64 {
        self.mass / ((2.0 * std::f64::consts::PI).powf(1.5) * self.sigma[0] * self.sigma[1] * self.sigma[2])
    }

    pub fn grad(&self, v: [f64; 3]) -> [f64; 3] {
        let g = self.eval(v);
        let mut out = [0.0; 3];
        for d in 0..3 {
            out[d] = -(v[d] - self.center[d]) / (self.sigma[d] * self.sigma[d]) * g;
        }
        out
    }

    pub fn hessian(&self, v: [f64; 3]) -> [[f64; 3]; 3] {
        let g = self.eval(v);
        let mut out = [[0.0; 3]; 3];
        let u: Vec<f64> = (0..3).map(|d| (v[d] - self.center[d]) / (self.sigma[d] * self.sigma[d])).collect();
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = g * u[a] * u[b];
                if a == b {
                    out[a][b] -= g / (self.sigma[a] * self.sigma[a]);
                }
            }
        }
        out
    }
}

impl Density for Gaussian {
    fn eval(&self, v: [f64; 3]) -> f64 {
        let mut e = 0.0;
        for d in 0..3 {
            let u = (v[d] - self.center[d]) / self.sigma[d];
            e += u * u;
        }
        self.peak() * (-0.5 * e).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!("expected {} values, got {}", grid.len(), data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::OutOfRange("field contains non-finite values".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn sample<D: Density + ?Sized>(grid: GridSpec, f: &D) -> Self {
        use rayon::prelude::*;
        let data = (0..grid.len()).into_par_iter().map(|i| f.eval(grid.point(i))).collect();
        Self { grid, data }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self::sample(grid, &f)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Self { grid: self.grid, data }
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().enumerate().map(|(i, x)| x * self.grid.weight(i)).sum()
    }

    /// `L^p` norm with `p = f64::INFINITY` allowed.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self
                .data
                .iter()
                .enumerate()
                .filter(|(i, _)| !self.grid.is_ghost(*i))
                .fold(0.0f64, |m, (_, x)| m.max(x.abs()));
        }
        let s: f64 = self.data.iter().enumerate().map(|(i, x)| x.abs().powf(p) * self.grid.weight(i)).sum();
        s.powf(1.0 / p)
    }

    /// Fourth-order Lagrange interpolation on the 4x4x4 surrounding stencil,
    /// zero outside the grid.
    pub fn interpolate(&self, v: [f64; 3]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.n as isize;
        let mut base = [0isize; 3];
        let mut wts = [[0.0f64; 4]; 3];
        for d in 0..3 {
            let s = v[d] / h + (g.n / 2) as f64;
            if !(s > -1.0 && s < n as f64) {
                return 0.0;
            }
            let i0 = s.floor() as isize;
            let t = s - i0 as f64;
            base[d] = i0 - 1;
            wts[d] = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
        }
        let mut acc = 0.0;
        for c in 0..4 {
            let k = base[2] + c as isize;
            if k < 0 || k >= n {
                continue;
            }
            for b in 0..4 {
                let j = base[1] + b as isize;
                if j < 0 || j >= n {
                    continue;
                }
                let wjk = wts[1][b] * wts[2][c];
                for a in 0..4 {
                    let i = base[0] + a as isize;
                    if i < 0 || i >= n {
                        continue;
                    }
                    acc += wts[0][a] * wjk * self.data[g.index(i as usize, j as usize, k as usize)];
                }
            }
        }
        acc
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for x in &self.data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&bytes)?;
        let meta = SnapshotMeta {
            n: self.grid.n,
            extent: self.grid.extent,
            order: "row-major".into(),
            dtype: "f64".into(),
        };
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        if meta.dtype != "f64" {
            return invalid(format!("unsupported dtype {}", meta.dtype));
        }
        let grid = GridSpec::new(meta.n, meta.extent)?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * 8 {
            return Err(Error::GridMismatch(format!("snapshot holds {} bytes, expected {}", bytes.len(), grid.len() * 8)));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_vec(grid, data)
    }
}

impl Density for ScalarField {
    fn eval(&self, v: [f64; 3]) -> f64 {
        self.interpolate(v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub extent: f64,
    pub order: String,
    pub dtype: String,
}

/// Symmetric 3x3 matrix per node, stored as `[xx, xy, xz, yy, yz, zz]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: GridSpec,
    pub data: Vec<[f64; 6]>,
}

pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[inline]
pub fn sym_slot(a: usize, b: usize) -> usize {
    match (a.min(b), a.max(b)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

impl MatrixField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![[0.0; 6]; grid.len()] }
    }

    pub fn at(&self, idx: usize) -> [[f64; 3]; 3] {
        unpack_sym(&self.data[idx])
    }

    pub fn component(&self, a: usize, b: usize) -> ScalarField {
        let s = sym_slot(a, b);
        ScalarField { grid: self.grid, data: self.data.iter().map(|m| m[s]).collect() }
    }

    /// Largest spectral norm over non-ghost nodes.
    pub fn sup_spectral_norm(&self) -> f64 {
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.grid.is_ghost(*i))
            .map(|(_, m)| spectral_norm_sym(m))
            .fold(0.0, f64::max)
    }
}

pub fn unpack_sym(m: &[f64; 6]) -> [[f64; 3]; 3] {
    [[m[0], m[1], m[2]], [m[1], m[3], m[4]], [m[2], m[4], m[5]]]
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub fn sym_eigenvalues(m: &[f64; 6]) -> [f64; 3] {
    let [a11, a12, a13, a22, a23, a33] = *m;
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 <= 1e-300 * (a11 * a11 + a22 * a22 + a33 * a33).max(1e-300) {
        let mut e = [a11, a22, a33];
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        return e;
    }
    let q = (a11 + a22 + a33) / 3.0;
    let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = [
        (a11 - q) / p,
        a12 / p,
        a13 / p,
        (a22 - q) / p,
        a23 / p,
        (a33 - q) / p,
    ];
    let detb = b[0] * (b[3] * b[5] - b[4] * b[4]) - b[1] * (b[1] * b[5] - b[4] * b[2]) + b[2] * (b[1] * b[4] - b[3] * b[2]);
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    e
}

pub fn spectral_norm_sym(m: &[f64; 6]) -> f64 {
    let e = sym_eigenvalues(m);
    e[0].abs().max(e[2].abs())
}

/// Spectral norm of a general 3x3 matrix via the eigenvalues of `A^T A`.
pub fn spectral_norm(a: &[[f64; 3]; 3]) -> f64 {
    let mut s = [0.0; 6];
    for (slot, &(p, q)) in SYM_PAIRS.iter().enumerate() {
        s[slot] = (0..3).map(|k| a[k][p] * a[k][q]).sum();
    }
    sym_eigenvalues(&s)[2].max(0.0).sqrt()
}

/// Radial cutoff profile: 1 on `r <= 1`, 0 on `r >= 2`, quintic bridge between.
/// Returns the value and its first two radial derivatives.
pub fn cutoff_profile(r: f64) -> (f64, f64, f64) {
    if r <= 1.0 {
        (1.0, 0.0, 0.0)
    } else if r >= 2.0 {
        (0.0, 0.0, 0.0)
    } else {
        let t = r - 1.0;
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (1.0 - s, -ds, -dds)
    }
}

/// `chi_R(v) = chi(|v| / R)` as a callable.
#[derive(Clone, Copy, Debug)]
pub struct Cutoff {
    pub radius: f64,
}

impl Cutoff {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("cutoff radius must be positive, got {radius}"));
        }
        Ok(Self { radius })
    }

    pub fn value(&self, v: [f64; 3]) -> f64 {
        cutoff_profile(norm(v) / self.radius).0
    }

    pub fn gradient(&self, v: [f64; 3]) -> [f64; 3] {
        let r = norm(v);
        if r == 0.0 {
            return [0.0; 3];
        }
        let d = cutoff_profile(r / self.radius).1 / self.radius / r;
        [d * v[0], d * v[1], d * v[2]]
    }

    pub fn hessian(&self, v: [f64; 3]) -> [[f64; 3]; 3] {
        let r = norm(v);
        let mut out = [[0.0; 3]; 3];
        if r == 0.0 {
            return out;
        }
        let (_, d1, d2) = cutoff_profile(r / self.radius);
        let a = d1 / self.radius / r;
        let b = d2 / (self.radius * self.radius * r * r) - a / (r * r);
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = b * v[i] * v[j] + if i == j { a } else { 0.0 };
            }
        }
        out
    }
}

impl Density for Cutoff {
    fn eval(&self, v: [f64; 3]) -> f64 {
        self.value(v)
    }
}

pub fn make_cutoff(grid: GridSpec, radius: f64) -> Result<ScalarField> {
    let c = Cutoff::new(radius)?;
    Ok(ScalarField::sample(grid, &c))
}

#[inline]
pub fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Polynomial weight in the velocity variable, total degree at most 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    terms: Vec<(f64, [u32; 3])>,
}

impl Weight {
    pub fn new(terms: Vec<(f64, [u32; 3])>) -> Result<Self> {
        for (_, e) in &terms {
            let deg = e[0] + e[1] + e[2];
            if deg > 4 {
                return invalid(format!("weight degree {deg} exceeds 4"));
            }
        }
        Ok(Self { terms })
    }

    pub fn one() -> Self {
        Self { terms: vec![(1.0, [0, 0, 0])] }
    }

    pub fn component(k: usize) -> Self {
        let mut e = [0; 3];
        e[k] = 1;
        Self { terms: vec![(1.0, e)] }
    }

    pub fn speed_sq() -> Self {
        Self { terms: vec![(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])] }
    }

    pub fn eval(&self, v: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32))
            .sum()
    }
}

/// Quadrature of `f` against an optional polynomial weight.
pub fn integrate(f: &ScalarField, weight: Option<&Weight>) -> f64 {
    let g = f.grid;
    match weight {
        None => f.integral(),
        Some(w) => f.data.iter().enumerate().map(|(i, x)| x * w.eval(g.point(i)) * g.weight(i)).sum(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Shell {
    pub k: i32,
    pub inner: f64,
    pub outer: f64,
    /// Node indices whose offset from the grid centre lies in `[inner, outer)`.
    pub nodes: Vec<usize>,
    pub empty: bool,
}

/// Dyadic shells `2^k r0 <= |h| < 2^{k+1} r0` of offsets from the grid centre.
pub fn dyadic_annuli(grid: GridSpec, r0: f64, kmin: i32, kmax: i32) -> Result<Vec<Shell>> {
    if !(r0 > 0.0) {
        return invalid("base radius must be positive");
    }
    if kmin > kmax {
        return invalid(format!("empty shell range {kmin}..={kmax}"));
    }
    let mut shells: Vec<Shell> = (kmin..=kmax)
        .map(|k| Shell {
            k,
            inner: r0 * 2f64.powi(k),
            outer: r0 * 2f64.powi(k + 1),
            nodes: Vec::new(),
            empty: true,
        })
        .collect();
    for idx in 0..grid.len() {
        if grid.is_ghost(idx) {
            continue;
        }
        let r = norm(grid.point(idx));
        if r < shells[0].inner {
            continue;
        }
        let k = (r / r0).log2().floor() as i32;
        // guard against rounding at shell boundaries
        let k = if r < r0 * 2f64.powi(k) { k - 1 } else if r >= r0 * 2f64.powi(k + 1) { k + 1 } else { k };
        if k >= kmin && k <= kmax {
            shells[(k - kmin) as usize].nodes.push(idx);
        }
    }
    for s in &mut shells {
        s.empty = s.nodes.is_empty();
    }
    Ok(shells)
}
