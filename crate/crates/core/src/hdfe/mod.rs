//! Least squares with absorbed high-dimensional fixed effects.
//!
//! Response and covariates are demeaned against every fixed-effect dimension
//! ([`demean`]), then solved by Householder QR. By Frisch–Waugh–Lovell the
//! slopes and residuals equal those of the regression with explicit dummies.

pub mod demean;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::frame::{Frame, Groups};
use crate::{Error, Result};

pub use demean::{max_group_mean, within_transform, DemeanReport};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SeKind {
    Classical,
    /// HC1 sandwich.
    #[default]
    Robust,
}

impl fmt::Display for SeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeKind::Classical => "classical",
            SeKind::Robust => "robust",
        })
    }
}

/// Replace a pair of directed columns by one stacked column (two rows per
/// observation).
#[derive(Clone, Debug, PartialEq)]
pub struct Directed {
    pub fwd: String,
    pub rev: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSpec {
    pub response: String,
    pub covariates: Vec<String>,
    /// Column names; `a*b` is an interaction.
    pub fe: Vec<String>,
    pub se_kind: SeKind,
    pub tol: f64,
    pub max_iter: usize,
    pub directed: Option<Directed>,
}

impl RegressionSpec {
    pub fn new(response: &str, covariates: &[&str], fe: &[&str]) -> Self {
        RegressionSpec {
            response: response.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            fe: fe.iter().map(|s| s.to_string()).collect(),
            se_kind: SeKind::Robust,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            directed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::Config("regression needs at least one covariate".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines:
    ///
    /// ```text
    /// response = dp
    /// covariates = mmc_ek_scaled, nonstop, tp, cs, rs
    /// fe = year, quarter, city_pair, carrier_pair
    /// se = robust
    /// tol = 1e-8
    /// max_iter = 10000
    /// directed = mmc_cw_fwd, mmc_cw_rev -> mmc_cw
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = RegressionSpec::new("", &[], &[]);
        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(|s| s.split_whitespace().collect::<String>())
                .filter(|s| !s.is_empty())
                .collect()
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                line: n as u64 + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "response" => spec.response = v.to_string(),
                "covariates" => spec.covariates = list(v),
                "fe" => spec.fe = list(v),
                "se" => {
                    spec.se_kind = match v {
                        "robust" | "hc1" => SeKind::Robust,
                        "classical" => SeKind::Classical,
                        _ => return Err(bad(format!("unknown se kind `{v}`"))),
                    }
                }
                "tol" => spec.tol = v.parse().map_err(|_| bad(format!("bad tol `{v}`")))?,
                "max_iter" => spec.max_iter = v.parse().map_err(|_| bad(format!("bad max_iter `{v}`")))?,
                "directed" => {
                    let (cols, name) = v
                        .split_once("->")
                        .ok_or_else(|| bad("directed needs `fwd, rev -> name`".into()))?;
                    let cols = list(cols);
                    if cols.len() != 2 {
                        return Err(bad("directed needs exactly two columns".into()));
                    }
                    spec.directed = Some(Directed {
                        fwd: cols[0].clone(),
                        rev: cols[1].clone(),
                        name: name.trim().to_string(),
                    });
                }
                _ => return Err(bad(format!("unknown key `{k}`"))),
            }
        }
        if spec.response.is_empty() {
            return Err(Error::Config("spec has no response".into()));
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Identified covariates, in spec order.
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Covariates dropped as collinear with the fixed effects or each other.
    pub dropped: Vec<String>,
    pub n_obs: usize,
    pub n_absorbed: usize,
    /// False when `n_absorbed` is an upper bound (three or more dimensions).
    pub absorbed_exact: bool,
    pub rss: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub r2_within: f64,
    pub iterations: usize,
    pub converged: bool,
    pub se_kind: SeKind,
    pub residuals: Vec<f64>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coef[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.se[i])
    }

    pub fn coef_map(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.coef.iter().copied()).collect()
    }

    pub fn dof_resid(&self) -> usize {
        self.n_obs - self.names.len() - self.n_absorbed
    }

    /// `term,coef,se,t,p` rows followed by fit statistics.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["term", "coef", "se", "t", "p"])?;
        for (i, n) in self.names.iter().enumerate() {
            let t = self.coef[i] / self.se[i];
            wtr.write_record([
                n.clone(),
                fmt_num(self.coef[i]),
                fmt_num(self.se[i]),
                fmt_num(t),
                fmt_num(two_sided_p(t)),
            ])?;
        }
        let stats: [(&str, String); 9] = [
            ("n_obs", self.n_obs.to_string()),
            ("n_absorbed", self.n_absorbed.to_string()),
            ("absorbed_exact", self.absorbed_exact.to_string()),
            ("r2_within", fmt_num(self.r2_within)),
            ("adj_r2", fmt_num(self.adj_r2)),
            ("iterations", self.iterations.to_string()),
            ("converged", self.converged.to_string()),
            ("se_kind", self.se_kind.to_string()),
            ("dropped", self.dropped.join(" ")),
        ];
        for (k, v) in stats {
            wtr.write_record([k, &v, "", "", ""])?;
        }
        wtr.flush().map_err(|e| Error::io("<fit>", e))?;
        Ok(())
    }
}

/// Shortest round-trip text, with an exponent for very small or large
/// magnitudes so that p-values do not print as long runs of zeros.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for a two-sided interval at `level`.
pub fn normal_critical(level: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + level / 2.0)
}

/// Connected components of the bipartite graph linking levels of two
/// dimensions that co-occur in some row.
pub fn bipartite_components(a: &Groups, b: &Groups) -> usize {
    let n = a.n_levels + b.n_levels;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (&ga, &gb) in a.codes.iter().zip(&b.codes) {
        let (ra, rb) = (find(&mut parent, ga as usize), find(&mut parent, a.n_levels + gb as usize));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut roots = std::collections::HashSet::new();
    for x in 0..n {
        roots.insert(find(&mut parent, x));
    }
    roots.len()
}

/// Fixed-effect parameters absorbed, and whether the count is exact.
pub fn absorbed_dof(groups: &[Groups]) -> (usize, bool) {
    match groups {
        [] => (0, true),
        [a] => (a.n_levels, true),
        [a, b, rest @ ..] => {
            let two = a.n_levels + b.n_levels - bipartite_components(a, b);
            let more: usize = rest.iter().map(|g| g.n_levels.saturating_sub(1)).sum();
            (two + more, rest.is_empty())
        }
    }
}

const ABSORBED_REL: f64 = 1e-9;
const COLLINEAR_REL: f64 = 1e-9;

fn column_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn qr_design(cols: &[&Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Picks covariates that remain identified after demeaning: a column is
/// dropped when demeaning removed (almost) all of it, or when it lies in the
/// span of the columns kept before it.
fn select_identified(raw_norms: &[f64], demeaned: &[Vec<f64>], n: usize) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..demeaned.len() {
        let nj = column_norm(&demeaned[j]);
        if nj <= ABSORBED_REL * raw_norms[j].max(f64::MIN_POSITIVE) || nj == 0.0 {
            continue;
        }
        let mut trial: Vec<&Vec<f64>> = kept.iter().map(|&k| &demeaned[k]).collect();
        trial.push(&demeaned[j]);
        let r = qr_design(&trial, n).qr().r();
        let last = trial.len() - 1;
        if r[(last, last)].abs() > COLLINEAR_REL * nj {
            kept.push(j);
        }
    }
    kept
}

/// Fits `spec` on `frame`.
pub fn fit_hdfe(frame: &Frame, spec: &RegressionSpec) -> Result<FitResult> {
    spec.validate()?;
    if frame.nrows() == 0 {
        return Err(Error::EmptyPanel);
    }
    let stacked;
    let frame = match &spec.directed {
        Some(d) => {
            stacked = frame.stack_directed(&d.fwd, &d.rev, &d.name)?;
            &stacked
        }
        None => frame,
    };
    let n = frame.nrows();
    if n == 0 {
        return Err(Error::EmptyPanel);
    }
    let y_raw = frame.num(&spec.response)?.to_vec();
    let x_raw: Vec<Vec<f64>> = spec
        .covariates
        .iter()
        .map(|c| frame.num(c).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let groups: Vec<Groups> = spec.fe.iter().map(|f| frame.groups(f)).collect::<Result<_>>()?;
    let (n_absorbed, absorbed_exact) = absorbed_dof(&groups);
    let p = spec.covariates.len();
    if n <= p + n_absorbed {
        return Err(Error::TooFewObservations {
            n_obs: n,
            n_params: p + n_absorbed,
        });
    }

    let raw_norms: Vec<f64> = x_raw.iter().map(|c| column_norm(c)).collect();
    let mut cols: Vec<Vec<f64>> = x_raw;
    cols.push(y_raw.clone());
    let report = within_transform(&mut cols, &groups, spec.tol, spec.max_iter);
    if !report.converged {
        log::warn!("fixed-effect demeaning stopped after {} sweeps without converging", report.iterations);
    }
    let y = cols.pop().unwrap();

    let kept = select_identified(&raw_norms, &cols, n);
    if kept.is_empty() {
        return Err(Error::NoIdentifiedCovariates);
    }
    let dropped: Vec<String> = (0..p)
        .filter(|j| !kept.contains(j))
        .map(|j| spec.covariates[j].clone())
        .collect();
    for d in &dropped {
        log::warn!("covariate `{d}` is collinear after demeaning; dropped");
    }
    let names: Vec<String> = kept.iter().map(|&j| spec.covariates[j].clone()).collect();
    let xs: Vec<&Vec<f64>> = kept.iter().map(|&j| &cols[j]).collect();
    let k = xs.len();
    let x = qr_design(&xs, n);
    let qr = x.clone().qr();
    let r = qr.r();
    let yv = DVector::from_column_slice(&y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or(Error::NoIdentifiedCovariates)?;
    let resid: Vec<f64> = (&yv - &x * &beta).iter().copied().collect();
    let rss: f64 = resid.iter().map(|e| e * e).sum();

    // (X'X)^{-1} = R^{-1} R^{-T}
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::NoIdentifiedCovariates)?;
    let bread = &r_inv * r_inv.transpose();
    let dof = (n - k - n_absorbed) as f64;
    let cov = match spec.se_kind {
        SeKind::Classical => &bread * (rss / dof),
        SeKind::Robust => {
            let meat = robust_meat(&xs, &resid);
            (&bread * meat * &bread) * (n as f64 / dof)
        }
    };
    let cov = (&cov + cov.transpose()) * 0.5;
    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let tss_within: f64 = y.iter().map(|v| v * v).sum();
    let mean = y_raw.iter().sum::<f64>() / n as f64;
    let tss: f64 = y_raw.iter().map(|v| (v - mean) * (v - mean)).sum();
    let n_params = k + n_absorbed;
    let (r2, adj_r2) = if tss > 0.0 {
        let r2 = 1.0 - rss / tss;
        (r2, 1.0 - (rss / (n - n_params) as f64) / (tss / (n - 1) as f64))
    } else {
        (0.0, 0.0)
    };
    let r2_within = if tss_within > 0.0 { 1.0 - rss / tss_within } else { 0.0 };

    Ok(FitResult {
        names,
        coef: beta.iter().copied().collect(),
        se,
        cov,
        dropped,
        n_obs: n,
        n_absorbed,
        absorbed_exact,
        rss,
        r2,
        adj_r2,
        r2_within,
        iterations: report.iterations,
        converged: report.converged,
        se_kind: spec.se_kind,
        residuals: resid,
    })
}

const MEAT_CHUNK: usize = 1 << 14;

/// `Σ e_i² x_i x_iᵀ`, reduced over fixed-size chunks in a fixed order.
fn robust_meat(xs: &[&Vec<f64>], resid: &[f64]) -> DMatrix<f64> {
    let k = xs.len();
    let n = resid.len();
    let starts: Vec<usize> = (0..n).step_by(MEAT_CHUNK).collect();
    let parts: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut m = DMatrix::<f64>::zeros(k, k);
            let mut row = vec![0.0; k];
            for i in s..(s + MEAT_CHUNK).min(n) {
                let e2 = resid[i] * resid[i];
                for (a, c) in row.iter_mut().zip(xs) {
                    *a = c[i];
                }
                for a in 0..k {
                    let w = e2 * row[a];
                    for b in a..k {
                        m[(a, b)] += w * row[b];
                    }
                }
            }
            m
        })
        .collect();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for m in parts {
        meat += m;
    }
    for a in 0..k {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    meat
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearCombination {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p: f64,
}

impl LinearCombination {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

/// `wᵀβ̂` with standard error `sqrt(wᵀ V w)` and a normal-approximation
/// interval at `level`.
pub fn linear_combination_test(fit: &FitResult, weights: &[(&str, f64)], level: f64) -> Result<LinearCombination> {
    let mut w = DVector::<f64>::zeros(fit.names.len());
    for (name, v) in weights {
        let i = fit
            .index(name)
            .ok_or_else(|| Error::UnknownCoefficient(name.to_string()))?;
        w[i] += v;
    }
    let estimate = w.dot(&DVector::from_column_slice(&fit.coef));
    let se = (w.transpose() * &fit.cov * &w)[(0, 0)].max(0.0).sqrt();
    let z = normal_critical(level);
    Ok(LinearCombination {
        estimate,
        se,
        ci_lo: estimate - z * se,
        ci_hi: estimate + z * se,
        p: two_sided_p(estimate / se),
    })
}
