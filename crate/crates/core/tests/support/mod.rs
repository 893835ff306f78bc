//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use mmclab::Groups;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least squares with explicit dummy columns for every level of every
/// fixed-effect dimension. Redundant dummies are removed by greedy
/// Gram–Schmidt selection; the remaining full-rank system is solved by QR.
pub struct DummyOls {
    pub beta: Vec<f64>,
    pub resid: Vec<f64>,
    /// Classical covariance of the covariate block with `n - rank` dof.
    pub cov_classical: DMatrix<f64>,
    /// HC1 covariance of the covariate block with `n - rank` dof.
    pub cov_hc1: DMatrix<f64>,
    pub rank: usize,
}

/// Indices of a maximal linearly independent prefix-greedy column subset.
fn independent_columns(cols: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let norm0 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = c.clone();
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
            keep.push(j);
        }
    }
    keep
}

pub fn dummy_ols(y: &[f64], xs: &[Vec<f64>], groups: &[Groups]) -> DummyOls {
    let n = y.len();
    let p = xs.len();
    let mut cols: Vec<Vec<f64>> = xs.to_vec();
    for g in groups {
        for l in 0..g.n_levels as u32 {
            cols.push(g.codes.iter().map(|&c| (c == l) as u8 as f64).collect());
        }
    }
    // Dummies first so that covariates are tested against the full FE span.
    let order: Vec<usize> = (p..cols.len()).chain(0..p).collect();
    let reordered: Vec<Vec<f64>> = order.iter().map(|&j| cols[j].clone()).collect();
    let keep: Vec<usize> = independent_columns(&reordered).into_iter().map(|k| order[k]).collect();
    assert!((0..p).all(|j| keep.contains(&j)), "covariate collinear with dummies");
    let mut sel: Vec<usize> = (0..p).collect();
    sel.extend(keep.iter().copied().filter(|&j| j >= p));
    let rank = sel.len();
    let z = DMatrix::from_fn(n, rank, |i, j| cols[sel[j]][i]);
    let qr = z.clone().qr();
    let r = qr.r();
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let coef = r.solve_upper_triangular(&qty).unwrap();
    let e = &yv - &z * &coef;
    let rss = e.norm_squared();
    let dof = (n - rank) as f64;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(rank, rank)).unwrap();
    let bread = &r_inv * r_inv.transpose();
    let cov_c = &bread * (rss / dof);
    let mut ze = z.clone();
    for i in 0..n {
        let w = e[i];
        for j in 0..rank {
            ze[(i, j)] *= w;
        }
    }
    let meat = ze.transpose() * &ze;
    let cov_r = (&bread * meat * &bread) * (n as f64 / dof);
    DummyOls {
        beta: coef.rows(0, p).iter().copied().collect(),
        resid: e.iter().copied().collect(),
        cov_classical: cov_c.view((0, 0), (p, p)).into_owned(),
        cov_hc1: cov_r.view((0, 0), (p, p)).into_owned(),
        rank,
    }
}

/// Random unbalanced regression instance.
pub struct Instance {
    pub y: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    /// Raw level labels per dimension (before dense renumbering).
    pub labels: Vec<Vec<u32>>,
}

/// `n` rows, `p` covariates, FE dimensions with the given level counts;
/// when `interact` is set the last dimension is the interaction of the first
/// two.
pub fn random_instance(seed: u64, n: usize, p: usize, levels: &[u32], interact: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Vec<u32>> = levels
        .iter()
        .map(|&l| (0..n).map(|_| rng.random_range(0..l)).collect())
        .collect();
    if interact && labels.len() >= 2 {
        let (a, b) = (&labels[0], &labels[1]);
        let inter: Vec<u32> = a.iter().zip(b).map(|(x, y)| x * 1000 + y).collect();
        labels.push(inter);
    }
    let fe: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            let m = *l.iter().max().unwrap() as usize + 1;
            let eff: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            l.iter().map(|&c| eff[c as usize]).collect()
        })
        .collect();
    let xs: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| rng.random_range(-1.0..1.0) * (1.0 + j as f64) + 0.3 * fe[0][i])
                .collect()
        })
        .collect();
    let beta: Vec<f64> = (0..p).map(|j| 1.5 - j as f64 * 0.7).collect();
    let y = (0..n)
        .map(|i| {
            let xb: f64 = (0..p).map(|j| beta[j] * xs[j][i]).sum();
            let f: f64 = fe.iter().map(|v| v[i]).sum();
            xb + f + rng.random_range(-1.0..1.0)
        })
        .collect();
    Instance { y, xs, labels }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Passenger-weighted mean fare, summed naively.
pub fn weighted_mean(rows: &[(f64, u32)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(f, p) in rows {
        num += f * p as f64;
        den += p as f64;
    }
    num / den
}

/// Population coefficient of variation.
pub fn cv(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    var.sqrt() / mu
}
