//! Sixth-order central finite differences with zero extension outside the grid.

use crate::grid::{GridSpec, ScalarField};
use rayon::prelude::*;

/// Antisymmetric first-derivative weights for offsets 1, 2, 3.
pub const D1: [f64; 3] = [45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
/// Second-derivative weights for offsets 0, 1, 2, 3.
pub const D2: [f64; 4] = [-490.0 / 180.0, 270.0 / 180.0, -27.0 / 180.0, 2.0 / 180.0];
/// Half-width of both stencils.
pub const HALO: usize = 3;

#[inline]
fn stride(grid: &GridSpec, axis: usize) -> usize {
    match axis {
        0 => 1,
        1 => grid.n,
        _ => grid.n * grid.n,
    }
}

#[inline]
fn axis_coord(grid: &GridSpec, idx: usize, axis: usize) -> usize {
    let (i, j, k) = grid.unindex(idx);
    [i, j, k][axis]
}

pub fn diff1_raw(grid: &GridSpec, data: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let s = stride(grid, axis);
    let inv_h = 1.0 / grid.spacing();
    (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let c = axis_coord(grid, idx, axis);
            let mut acc = 0.0;
            for (m, w) in D1.iter().enumerate() {
                let k = m + 1;
                let plus = if c + k < n { data[idx + k * s] } else { 0.0 };
                let minus = if c >= k { data[idx - k * s] } else { 0.0 };
                acc += w * (plus - minus);
            }
            acc * inv_h
        })
        .collect()
}

pub fn diff2_raw(grid: &GridSpec, data: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let s = stride(grid, axis);
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let c = axis_coord(grid, idx, axis);
            let mut acc = D2[0] * data[idx];
            for k in 1..=3 {
                let plus = if c + k < n { data[idx + k * s] } else { 0.0 };
                let minus = if c >= k { data[idx - k * s] } else { 0.0 };
                acc += D2[k] * (plus + minus);
            }
            acc * inv_h2
        })
        .collect()
}

pub fn diff1(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField { grid: f.grid, data: diff1_raw(&f.grid, &f.data, axis) }
}

pub fn gradient(f: &ScalarField) -> [ScalarField; 3] {
    [diff1(f, 0), diff1(f, 1), diff1(f, 2)]
}

/// Hessian as `[xx, xy, xz, yy, yz, zz]`; mixed entries use nested first differences.
pub fn hessian(f: &ScalarField) -> [Vec<f64>; 6] {
    let g = &f.grid;
    let dx = diff1_raw(g, &f.data, 0);
    let dy = diff1_raw(g, &f.data, 1);
    [
        diff2_raw(g, &f.data, 0),
        diff1_raw(g, &dx, 1),
        diff1_raw(g, &dx, 2),
        diff2_raw(g, &f.data, 1),
        diff1_raw(g, &dy, 2),
        diff2_raw(g, &f.data, 2),
    ]
}

/// Second-order seven-point Laplacian.
pub fn laplacian7(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let n = g.n;
    let inv_h2 = 1.0 / g.spacing().powi(2);
    let data = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let mut acc = -6.0 * f.data[idx];
            for axis in 0..3 {
                let s = stride(&g, axis);
                let c = axis_coord(&g, idx, axis);
                if c + 1 < n {
                    acc += f.data[idx + s];
                }
                if c >= 1 {
                    acc += f.data[idx - s];
                }
            }
            acc * inv_h2
        })
        .collect();
    ScalarField { grid: g, data }
}

/// True when the node is at least `width` nodes away from every face.
#[inline]
pub fn interior(grid: &GridSpec, idx: usize, width: usize) -> bool {
    let (i, j, k) = grid.unindex(idx);
    let lo = width;
    let hi = grid.n - width;
    i >= lo && j >= lo && k >= lo && i <= hi && j <= hi && k <= hi
}
