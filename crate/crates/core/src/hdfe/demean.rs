//! Within transformation by alternating projections.
//!
//! Each sweep subtracts group means dimension by dimension (Gauss–Seidel).
//! A column has converged when the largest mean removed in a sweep falls
//! below `tol`. Columns are independent and run in parallel; each column's
//! arithmetic is sequential in row order, so results are bitwise identical at
//! any thread count.

use rayon::prelude::*;

use crate::frame::Groups;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DemeanReport {
    /// Largest sweep count over all columns.
    pub iterations: usize,
    pub converged: bool,
}

/// Group structure prepared for repeated mean computation.
#[derive(Clone, Debug)]
pub struct FeDims {
    dims: Vec<(Vec<u32>, Vec<f64>)>,
}

impl FeDims {
    pub fn new(groups: &[Groups]) -> Self {
        let dims = groups
            .iter()
            .map(|g| {
                let inv = g.counts().iter().map(|&c| if c > 0 { 1.0 / c as f64 } else { 0.0 }).collect();
                (g.codes.clone(), inv)
            })
            .collect();
        FeDims { dims }
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Subtracts group means of one dimension; returns the largest |mean|.
    fn project(&self, d: usize, x: &mut [f64], sums: &mut Vec<f64>) -> f64 {
        let (codes, inv) = &self.dims[d];
        sums.clear();
        sums.resize(inv.len(), 0.0);
        for (&g, &v) in codes.iter().zip(x.iter()) {
            sums[g as usize] += v;
        }
        let mut max = 0.0f64;
        for (s, w) in sums.iter_mut().zip(inv) {
            *s *= w;
            max = max.max(s.abs());
        }
        for (&g, v) in codes.iter().zip(x.iter_mut()) {
            *v -= sums[g as usize];
        }
        max
    }

    /// Demeans one column in place; returns (sweeps, converged).
    pub fn demean_column(&self, x: &mut [f64], tol: f64, max_iter: usize) -> (usize, bool) {
        let mut sums = Vec::new();
        match self.dims.len() {
            0 => (0, true),
            // One projection is exact.
            1 => {
                self.project(0, x, &mut sums);
                (1, true)
            }
            k => {
                for it in 1..=max_iter {
                    let mut change = 0.0f64;
                    for d in 0..k {
                        change = change.max(self.project(d, x, &mut sums));
                    }
                    if change < tol {
                        return (it, true);
                    }
                }
                (max_iter, false)
            }
        }
    }
}

/// Demeans every column in place.
pub fn within_transform(columns: &mut [Vec<f64>], groups: &[Groups], tol: f64, max_iter: usize) -> DemeanReport {
    let dims = FeDims::new(groups);
    demean_all(&dims, columns, tol, max_iter)
}

pub fn demean_all(dims: &FeDims, columns: &mut [Vec<f64>], tol: f64, max_iter: usize) -> DemeanReport {
    let results: Vec<(usize, bool)> = columns
        .par_iter_mut()
        .map(|c| dims.demean_column(c, tol, max_iter))
        .collect();
    DemeanReport {
        iterations: results.iter().map(|r| r.0).max().unwrap_or(0),
        converged: results.iter().all(|r| r.1),
    }
}

/// Largest absolute group mean of `x` over every dimension.
pub fn max_group_mean(x: &[f64], groups: &[Groups]) -> f64 {
    let dims = FeDims::new(groups);
    let mut sums = Vec::new();
    let mut worst = 0.0f64;
    for d in 0..dims.dims.len() {
        let mut y = x.to_vec();
        worst = worst.max(dims.project(d, &mut y, &mut sums));
    }
    worst
}
