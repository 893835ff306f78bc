//! Pairwise price-difference panel and price-rigidity cross-section.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::codes::Carrier;
use crate::frame::Frame;
use crate::ingest::MarketCell;
use crate::markets::MarketKey;
use crate::mmc::MmcMatrix;
use crate::{Error, Result, YearQuarter};

/// One carrier pair in one market-quarter where both carriers have a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairObservation {
    pub period: YearQuarter,
    pub market: MarketKey,
    pub carrier_lo: Carrier,
    pub carrier_hi: Carrier,
    pub dp: f64,
    pub mmc_ek_scaled: f64,
    /// `cw[lo][hi]`
    pub mmc_cw_fwd: f64,
    /// `cw[hi][lo]`
    pub mmc_cw_rev: f64,
    pub mmc_cw_wgt_fwd: f64,
    pub mmc_cw_wgt_rev: f64,
    pub tp: u64,
    pub cs: f64,
    pub rs: f64,
}

impl PairObservation {
    pub fn nonstop(&self) -> bool {
        self.market.nonstop
    }

    pub fn involves(&self, c: Carrier) -> bool {
        self.carrier_lo == c || self.carrier_hi == c
    }
}

/// One carrier pair in one market, pooled over time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidityObservation {
    pub market: MarketKey,
    pub carrier_lo: Carrier,
    pub carrier_hi: Carrier,
    pub cv: f64,
    /// Unscaled contact count in the pinned quarter.
    pub mmc_ek: f64,
    pub mmc_cw_fwd: f64,
    pub mmc_cw_rev: f64,
    pub mmc_cw_wgt_fwd: f64,
    pub mmc_cw_wgt_rev: f64,
    /// Market passengers summed over all quarters.
    pub tp: u64,
    pub cs: f64,
    pub rs: f64,
    pub n_quarters: u32,
}

/// Combined and relative share of a carrier pair.
pub fn pair_shares(s_a: f64, s_b: f64) -> (f64, f64) {
    let cs = s_a + s_b;
    let (lo, hi) = if s_a <= s_b { (s_a, s_b) } else { (s_b, s_a) };
    (cs, lo / hi)
}

/// Passenger shares of every carrier in `market` at `period`.
pub fn compute_shares(cells: &[MarketCell], market: MarketKey, period: YearQuarter) -> BTreeMap<Carrier, f64> {
    let sel: Vec<&MarketCell> = cells
        .iter()
        .filter(|c| c.market == market && c.period == period)
        .collect();
    let total: u64 = sel.iter().map(|c| c.passengers).sum();
    let mut out = BTreeMap::new();
    for c in sel {
        *out.entry(c.carrier).or_insert(0.0) += c.passengers as f64;
    }
    for v in out.values_mut() {
        *v /= total as f64;
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct ContactTrio {
    ek: f64,
    cw_fwd: f64,
    cw_rev: f64,
    wgt_fwd: f64,
    wgt_rev: f64,
}

fn contact(m: &MmcMatrix, lo: Carrier, hi: Carrier) -> ContactTrio {
    ContactTrio {
        ek: m.ek.get(lo, hi).unwrap_or(0) as f64,
        cw_fwd: m.cw.get(lo, hi).unwrap_or(0.0),
        cw_rev: m.cw.get(hi, lo).unwrap_or(0.0),
        wgt_fwd: m.cw_weighted.get(lo, hi).unwrap_or(0.0),
        wgt_rev: m.cw_weighted.get(hi, lo).unwrap_or(0.0),
    }
}

fn sorted_groups<K: Ord + Copy>(cells: &[MarketCell], key: impl Fn(&MarketCell) -> K) -> Vec<Vec<MarketCell>> {
    let mut v = cells.to_vec();
    v.sort_by_key(|c| (key(c), c.carrier, c.period));
    v.chunk_by(|a, b| key(a) == key(b)).map(|g| g.to_vec()).collect()
}

fn pairs_of_group(group: &[MarketCell], m: &MmcMatrix) -> Vec<PairObservation> {
    let tp: u64 = group.iter().map(|c| c.passengers).sum();
    let t = tp as f64;
    let mut out = Vec::with_capacity(group.len() * group.len().saturating_sub(1) / 2);
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            let (lo, hi) = if a.carrier < b.carrier { (a, b) } else { (b, a) };
            let (cs, rs) = pair_shares(lo.passengers as f64 / t, hi.passengers as f64 / t);
            let k = contact(m, lo.carrier, hi.carrier);
            out.push(PairObservation {
                period: a.period,
                market: a.market,
                carrier_lo: lo.carrier,
                carrier_hi: hi.carrier,
                dp: (lo.mean_fare - hi.mean_fare).abs(),
                mmc_ek_scaled: k.ek / 1000.0,
                mmc_cw_fwd: k.cw_fwd,
                mmc_cw_rev: k.cw_rev,
                mmc_cw_wgt_fwd: k.wgt_fwd,
                mmc_cw_wgt_rev: k.wgt_rev,
                tp,
                cs,
                rs,
            });
        }
    }
    out.sort_by_key(|p| (p.carrier_lo, p.carrier_hi));
    out
}

/// Builds the pairwise price-difference panel, ordered by
/// (quarter, market, carrier pair).
pub fn build_pair_diff_panel(
    cells: &[MarketCell],
    mmc: &BTreeMap<YearQuarter, MmcMatrix>,
) -> Result<Vec<PairObservation>> {
    let groups = sorted_groups(cells, |c| (c.period, c.market));
    if let Some(g) = groups.iter().find(|g| !mmc.contains_key(&g[0].period)) {
        return Err(Error::Schema(format!("no contact matrix for {}", g[0].period)));
    }
    let parts: Vec<Vec<PairObservation>> = groups
        .par_iter()
        .map(|g| pairs_of_group(g, &mmc[&g[0].period]))
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RigidityStats {
    pub pairs_below_min_quarters: u64,
    /// Pairs where a carrier has no row in the pinned quarter's matrices;
    /// their contact values are zero.
    pub pairs_missing_pinned: u64,
}

impl RigidityStats {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["counter", "value"])?;
        wtr.write_record(["pairs_below_min_quarters", &self.pairs_below_min_quarters.to_string()])?;
        wtr.write_record(["pairs_missing_pinned", &self.pairs_missing_pinned.to_string()])?;
        flush(wtr)
    }
}

/// Population coefficient of variation (two-pass).
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Builds the price-rigidity cross-section.
///
/// For each market and carrier pair with at least `min_quarters` quarters of
/// joint presence, `cv` pools both carriers' quarterly mean fares over those
/// quarters. Shares use passengers summed over every quarter of the market.
/// Contact measures come from `pinned`.
pub fn build_rigidity_panel(
    cells: &[MarketCell],
    pinned: &MmcMatrix,
    min_quarters: usize,
) -> (Vec<RigidityObservation>, RigidityStats) {
    let groups = sorted_groups(cells, |c| c.market);
    let parts: Vec<(Vec<RigidityObservation>, RigidityStats)> = groups
        .par_iter()
        .map(|g| rigidity_of_market(g, pinned, min_quarters))
        .collect();
    let mut stats = RigidityStats::default();
    let mut out = Vec::new();
    for (rows, s) in parts {
        out.extend(rows);
        stats.pairs_below_min_quarters += s.pairs_below_min_quarters;
        stats.pairs_missing_pinned += s.pairs_missing_pinned;
    }
    (out, stats)
}

fn rigidity_of_market(
    group: &[MarketCell],
    pinned: &MmcMatrix,
    min_quarters: usize,
) -> (Vec<RigidityObservation>, RigidityStats) {
    let mut by_carrier: BTreeMap<Carrier, BTreeMap<YearQuarter, (f64, u64)>> = BTreeMap::new();
    for c in group {
        by_carrier.entry(c.carrier).or_default().insert(c.period, (c.mean_fare, c.passengers));
    }
    let total: u64 = group.iter().map(|c| c.passengers).sum();
    let carriers: Vec<Carrier> = by_carrier.keys().copied().collect();
    let mut stats = RigidityStats::default();
    let mut out = Vec::new();
    for (i, &lo) in carriers.iter().enumerate() {
        for &hi in &carriers[i + 1..] {
            let (a, b) = (&by_carrier[&lo], &by_carrier[&hi]);
            let joint: BTreeSet<&YearQuarter> = a.keys().filter(|q| b.contains_key(q)).collect();
            if joint.len() < min_quarters {
                stats.pairs_below_min_quarters += 1;
                continue;
            }
            let series: Vec<f64> = joint.iter().flat_map(|q| [a[*q].0, b[*q].0]).collect();
            let pax_lo: u64 = a.values().map(|v| v.1).sum();
            let pax_hi: u64 = b.values().map(|v| v.1).sum();
            let (cs, rs) = pair_shares(pax_lo as f64 / total as f64, pax_hi as f64 / total as f64);
            if pinned.ek.position(lo).is_none() || pinned.ek.position(hi).is_none() {
                stats.pairs_missing_pinned += 1;
            }
            let k = contact(pinned, lo, hi);
            out.push(RigidityObservation {
                market: group[0].market,
                carrier_lo: lo,
                carrier_hi: hi,
                cv: coefficient_of_variation(&series),
                mmc_ek: k.ek,
                mmc_cw_fwd: k.cw_fwd,
                mmc_cw_rev: k.cw_rev,
                mmc_cw_wgt_fwd: k.wgt_fwd,
                mmc_cw_wgt_rev: k.wgt_rev,
                tp: total,
                cs,
                rs,
                n_quarters: joint.len() as u32,
            });
        }
    }
    (out, stats)
}

pub const PAIR_HEADER: [&str; 16] = [
    "year",
    "quarter",
    "origin",
    "dest",
    "nonstop",
    "carrier_lo",
    "carrier_hi",
    "dp",
    "mmc_ek_scaled",
    "mmc_cw_fwd",
    "mmc_cw_rev",
    "mmc_cw_wgt_fwd",
    "mmc_cw_wgt_rev",
    "tp",
    "cs",
    "rs",
];

pub const RIGIDITY_HEADER: [&str; 14] = [
    "origin",
    "dest",
    "nonstop",
    "carrier_lo",
    "carrier_hi",
    "cv",
    "mmc_ek",
    "mmc_cw_fwd",
    "mmc_cw_rev",
    "mmc_cw_wgt_fwd",
    "mmc_cw_wgt_rev",
    "tp",
    "cs",
    "rs",
];

fn flush<W: Write>(mut wtr: csv::Writer<W>) -> Result<()> {
    wtr.flush().map_err(|e| Error::io("<panel>", e))
}

pub fn write_pair_panel<W: Write>(rows: &[PairObservation], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PAIR_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.period.year.to_string(),
            r.period.quarter.to_string(),
            r.market.origin.to_string(),
            r.market.dest.to_string(),
            (r.market.nonstop as u8).to_string(),
            r.carrier_lo.to_string(),
            r.carrier_hi.to_string(),
            r.dp.to_string(),
            r.mmc_ek_scaled.to_string(),
            r.mmc_cw_fwd.to_string(),
            r.mmc_cw_rev.to_string(),
            r.mmc_cw_wgt_fwd.to_string(),
            r.mmc_cw_wgt_rev.to_string(),
            r.tp.to_string(),
            r.cs.to_string(),
            r.rs.to_string(),
        ])?;
    }
    flush(wtr)
}

pub fn read_pair_panel<R: Read>(r: R) -> Result<Vec<PairObservation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let head = rdr.headers()?.clone();
    let mut idx = [0usize; 16];
    for (slot, name) in idx.iter_mut().zip(PAIR_HEADER) {
        *slot = head
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("panel lacks `{name}` column")))?;
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("panel: bad {what}"),
        };
        let f = |k: usize, what: &str| rec[idx[k]].parse::<f64>().map_err(|_| bad(what));
        let year: i32 = rec[idx[0]].parse().map_err(|_| bad("year"))?;
        let quarter: u8 = rec[idx[1]].parse().map_err(|_| bad("quarter"))?;
        out.push(PairObservation {
            period: YearQuarter::new(year, quarter).ok_or_else(|| bad("quarter"))?,
            market: MarketKey::new(
                rec[idx[2]].parse().map_err(|_| bad("origin"))?,
                rec[idx[3]].parse().map_err(|_| bad("dest"))?,
                &rec[idx[4]] == "1",
            ),
            carrier_lo: rec[idx[5]].parse().map_err(|_| bad("carrier_lo"))?,
            carrier_hi: rec[idx[6]].parse().map_err(|_| bad("carrier_hi"))?,
            dp: f(7, "dp")?,
            mmc_ek_scaled: f(8, "mmc_ek_scaled")?,
            mmc_cw_fwd: f(9, "mmc_cw_fwd")?,
            mmc_cw_rev: f(10, "mmc_cw_rev")?,
            mmc_cw_wgt_fwd: f(11, "mmc_cw_wgt_fwd")?,
            mmc_cw_wgt_rev: f(12, "mmc_cw_wgt_rev")?,
            tp: rec[idx[13]].parse().map_err(|_| bad("tp"))?,
            cs: f(14, "cs")?,
            rs: f(15, "rs")?,
        });
    }
    Ok(out)
}

pub fn write_rigidity_panel<W: Write>(rows: &[RigidityObservation], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut head: Vec<&str> = RIGIDITY_HEADER.to_vec();
    head.push("n_quarters");
    wtr.write_record(&head)?;
    for r in rows {
        wtr.write_record([
            r.market.origin.to_string(),
            r.market.dest.to_string(),
            (r.market.nonstop as u8).to_string(),
            r.carrier_lo.to_string(),
            r.carrier_hi.to_string(),
            r.cv.to_string(),
            r.mmc_ek.to_string(),
            r.mmc_cw_fwd.to_string(),
            r.mmc_cw_rev.to_string(),
            r.mmc_cw_wgt_fwd.to_string(),
            r.mmc_cw_wgt_rev.to_string(),
            r.tp.to_string(),
            r.cs.to_string(),
            r.rs.to_string(),
            r.n_quarters.to_string(),
        ])?;
    }
    flush(wtr)
}

/// Regression frame of the difference panel. Key columns `year`, `quarter`,
/// `city_pair`, `carrier_pair` are included for fixed effects.
pub fn pair_frame(rows: &[PairObservation]) -> Result<Frame> {
    let mut f = Frame::new();
    let num = |g: fn(&PairObservation) -> f64| rows.iter().map(g).collect::<Vec<f64>>();
    f.push_num("year", num(|r| r.period.year as f64))?;
    f.push_num("quarter", num(|r| r.period.quarter as f64))?;
    f.push_num("dp", num(|r| r.dp))?;
    f.push_num("nonstop", num(|r| r.market.nonstop as u8 as f64))?;
    f.push_num("mmc_ek_scaled", num(|r| r.mmc_ek_scaled))?;
    f.push_num("mmc_cw_fwd", num(|r| r.mmc_cw_fwd))?;
    f.push_num("mmc_cw_rev", num(|r| r.mmc_cw_rev))?;
    f.push_num("mmc_cw_wgt_fwd", num(|r| r.mmc_cw_wgt_fwd))?;
    f.push_num("mmc_cw_wgt_rev", num(|r| r.mmc_cw_wgt_rev))?;
    f.push_num("tp", num(|r| r.tp as f64))?;
    f.push_num("cs", num(|r| r.cs))?;
    f.push_num("rs", num(|r| r.rs))?;
    let cp: Vec<String> = rows
        .iter()
        .map(|r| format!("{}|{}", r.market.origin, r.market.dest))
        .collect();
    f.push_text("city_pair", &cp)?;
    let kp: Vec<String> = rows
        .iter()
        .map(|r| format!("{}|{}", r.carrier_lo, r.carrier_hi))
        .collect();
    f.push_text("carrier_pair", &kp)?;
    Ok(f)
}

/// Pearson correlation (two-pass).
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

pub const CORR_VARS: [&str; 6] = ["cs", "rs", "tp", "mmc_ek", "mmc_cw", "mmc_cw_wgt"];

fn corr_columns(rows: &[PairObservation]) -> [Vec<f64>; 6] {
    let col = |g: fn(&PairObservation) -> f64| rows.iter().map(g).collect::<Vec<f64>>();
    [
        col(|r| r.cs),
        col(|r| r.rs),
        col(|r| r.tp as f64),
        col(|r| r.mmc_ek_scaled),
        col(|r| r.mmc_cw_fwd),
        col(|r| r.mmc_cw_wgt_fwd),
    ]
}

/// Pairwise correlations among the regressors; directed measures use the
/// lo→hi direction.
pub fn correlation_matrix(rows: &[PairObservation]) -> [[f64; 6]; 6] {
    let cols = corr_columns(rows);
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i][j] = if i == j { 1.0 } else { pearson(&cols[i], &cols[j]) };
        }
    }
    out
}

pub fn write_correlations<W: Write>(m: &[[f64; 6]; 6], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut head = vec!["variable"];
    head.extend(CORR_VARS);
    wtr.write_record(&head)?;
    for (i, name) in CORR_VARS.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(m[i].iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    flush(wtr)
}

/// Every k-th row so that at most `max_rows` remain, for scatter plots.
pub fn write_scatter_sample<W: Write>(rows: &[PairObservation], max_rows: usize, w: W) -> Result<()> {
    let step = rows.len().div_ceil(max_rows.max(1)).max(1);
    let cols = corr_columns(rows);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CORR_VARS)?;
    for i in (0..rows.len()).step_by(step) {
        wtr.write_record(cols.iter().map(|c| c[i].to_string()))?;
    }
    flush(wtr)
}
