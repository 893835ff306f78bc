//! Multimarket contact between carriers, per quarter.
//!
//! * `ek`: number of directed city pairs both carriers serve (any stopover
//!   structure). Symmetric; the diagonal is the carrier's network size.
//! * `cw`: `ek[h][k] / ek[h][h]`, the share of h's network where it meets k.
//! * `cw_weighted`: like `cw`, but each city pair counts with h's passengers
//!   (or revenue) there.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::codes::Carrier;
use crate::ingest::MarketCell;
use crate::markets::CityPairKey;
use crate::{Error, Result, YearQuarter};

/// Square matrix indexed by a sorted carrier list.
#[derive(Clone, Debug, PartialEq)]
pub struct CarrierMatrix<T> {
    carriers: Vec<Carrier>,
    values: Vec<T>,
}

impl<T: Copy + Default> CarrierMatrix<T> {
    pub fn zeros(mut carriers: Vec<Carrier>) -> Self {
        carriers.sort();
        carriers.dedup();
        let n = carriers.len();
        CarrierMatrix {
            carriers,
            values: vec![T::default(); n * n],
        }
    }

    pub fn from_rows(carriers: Vec<Carrier>, rows: Vec<Vec<T>>) -> Result<Self> {
        let n = carriers.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Schema("matrix is not square over its carriers".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| carriers[i]);
        let sorted: Vec<Carrier> = order.iter().map(|&i| carriers[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate carrier in matrix".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for &i in &order {
            for &j in &order {
                values.push(rows[i][j]);
            }
        }
        Ok(CarrierMatrix {
            carriers: sorted,
            values,
        })
    }

    pub fn carriers(&self) -> &[Carrier] {
        &self.carriers
    }

    pub fn len(&self) -> usize {
        self.carriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carriers.is_empty()
    }

    pub fn position(&self, c: Carrier) -> Option<usize> {
        self.carriers.binary_search(&c).ok()
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.carriers.len() + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        let n = self.carriers.len();
        &mut self.values[i * n + j]
    }

    pub fn get(&self, h: Carrier, k: Carrier) -> Option<T> {
        Some(self.at(self.position(h)?, self.position(k)?))
    }
}

impl<T: Copy + Default + std::fmt::Display> CarrierMatrix<T> {
    /// Row/column headers are carrier codes.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut head = vec!["carrier".to_string()];
        head.extend(self.carriers.iter().map(|c| c.to_string()));
        wtr.write_record(&head)?;
        for (i, h) in self.carriers.iter().enumerate() {
            let mut row = vec![h.to_string()];
            row.extend((0..self.len()).map(|j| self.at(i, j).to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }
}

impl<T: Copy + Default + std::str::FromStr> CarrierMatrix<T> {
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let head = rdr.headers()?.clone();
        let cols: Vec<Carrier> = head
            .iter()
            .skip(1)
            .map(|c| c.parse().map_err(Error::Schema))
            .collect::<Result<_>>()?;
        let mut rows_by: HashMap<Carrier, Vec<T>> = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let h: Carrier = rec[0].parse().map_err(Error::Schema)?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse().map_err(|_| Error::Parse {
                        line: i as u64 + 2,
                        msg: format!("bad matrix entry `{v}`"),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            rows_by.insert(h, vals);
        }
        let rows = cols
            .iter()
            .map(|c| {
                rows_by
                    .remove(c)
                    .ok_or_else(|| Error::Schema(format!("matrix has no row for {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(cols, rows)
    }
}

pub type EkMatrix = CarrierMatrix<u64>;
pub type RatioMatrix = CarrierMatrix<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Weight {
    #[default]
    Passengers,
    Revenue,
}

/// A carrier left out of a ratio matrix because its denominator is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Excluded {
    pub carrier: Carrier,
    pub reason: &'static str,
}

/// All three contact measures for one quarter.
#[derive(Clone, Debug, PartialEq)]
pub struct MmcMatrix {
    pub period: YearQuarter,
    pub ek: EkMatrix,
    pub cw: RatioMatrix,
    pub cw_weighted: RatioMatrix,
}

impl MmcMatrix {
    pub fn carriers(&self) -> &[Carrier] {
        self.ek.carriers()
    }
}

fn city_pair_sets<'a>(cells: impl Iterator<Item = &'a MarketCell>) -> BTreeMap<Carrier, BTreeSet<CityPairKey>> {
    let mut served: BTreeMap<Carrier, BTreeSet<CityPairKey>> = BTreeMap::new();
    for c in cells {
        served.entry(c.carrier).or_default().insert(c.market.city_pair());
    }
    served
}

/// Shared directed city-pair counts among carriers with a cell in `period`.
pub fn compute_mmc_ek(cells: &[MarketCell], period: YearQuarter) -> EkMatrix {
    let served = city_pair_sets(cells.iter().filter(|c| c.period == period));
    let mut by_cp: BTreeMap<CityPairKey, Vec<Carrier>> = BTreeMap::new();
    for (carrier, cps) in &served {
        for cp in cps {
            by_cp.entry(*cp).or_default().push(*carrier);
        }
    }
    let mut m = EkMatrix::zeros(served.keys().copied().collect());
    for present in by_cp.values() {
        let idx: Vec<usize> = present.iter().map(|c| m.position(*c).unwrap()).collect();
        for &i in &idx {
            for &j in &idx {
                *m.at_mut(i, j) += 1;
            }
        }
    }
    m
}

/// Normalizes each row by its diagonal. Carriers with a zero diagonal are
/// dropped from the result and reported.
pub fn compute_mmc_cw(ek: &EkMatrix) -> (RatioMatrix, Vec<Excluded>) {
    let mut excluded = Vec::new();
    let keep: Vec<usize> = (0..ek.len())
        .filter(|&i| {
            let ok = ek.at(i, i) > 0;
            if !ok {
                excluded.push(Excluded {
                    carrier: ek.carriers()[i],
                    reason: "serves no city pair",
                });
            }
            ok
        })
        .collect();
    let mut out = RatioMatrix::zeros(keep.iter().map(|&i| ek.carriers()[i]).collect());
    for (a, &i) in keep.iter().enumerate() {
        let d = ek.at(i, i) as f64;
        for (b, &j) in keep.iter().enumerate() {
            *out.at_mut(a, b) = ek.at(i, j) as f64 / d;
        }
    }
    (out, excluded)
}

/// Weight-based contact: the share of h's passengers (or revenue) carried in
/// city pairs where k is also present.
pub fn compute_mmc_weighted(cells: &[MarketCell], period: YearQuarter, weight: Weight) -> (RatioMatrix, Vec<Excluded>) {
    let mut w: BTreeMap<Carrier, BTreeMap<CityPairKey, f64>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.period == period) {
        let v = match weight {
            Weight::Passengers => c.passengers as f64,
            Weight::Revenue => c.passengers as f64 * c.mean_fare,
        };
        *w.entry(c.carrier).or_default().entry(c.market.city_pair()).or_default() += v;
    }
    let mut excluded = Vec::new();
    let totals: BTreeMap<Carrier, f64> = w
        .iter()
        .filter_map(|(c, m)| {
            let t: f64 = m.values().sum();
            if t > 0.0 {
                Some((*c, t))
            } else {
                excluded.push(Excluded {
                    carrier: *c,
                    reason: "zero total weight",
                });
                None
            }
        })
        .collect();
    let mut by_cp: BTreeMap<CityPairKey, Vec<Carrier>> = BTreeMap::new();
    for (carrier, cps) in &w {
        if totals.contains_key(carrier) {
            for cp in cps.keys() {
                by_cp.entry(*cp).or_default().push(*carrier);
            }
        }
    }
    let mut num = RatioMatrix::zeros(totals.keys().copied().collect());
    for (cp, present) in &by_cp {
        for h in present {
            let wh = w[h][cp];
            let i = num.position(*h).unwrap();
            for k in present {
                let j = num.position(*k).unwrap();
                *num.at_mut(i, j) += wh;
            }
        }
    }
    for (i, h) in num.carriers().to_vec().into_iter().enumerate() {
        let t = totals[&h];
        for j in 0..num.len() {
            let v = num.at(i, j) / t;
            *num.at_mut(i, j) = if i == j { 1.0 } else { v.min(1.0) };
        }
    }
    (num, excluded)
}

pub fn compute_quarter(cells: &[MarketCell], period: YearQuarter, weight: Weight) -> MmcMatrix {
    let ek = compute_mmc_ek(cells, period);
    let (cw, ex) = compute_mmc_cw(&ek);
    for e in ex {
        log::warn!("{period}: {} excluded from cw ({})", e.carrier, e.reason);
    }
    let (cw_weighted, ex) = compute_mmc_weighted(cells, period, weight);
    for e in ex {
        log::warn!("{period}: {} excluded from weighted cw ({})", e.carrier, e.reason);
    }
    MmcMatrix {
        period,
        ek,
        cw,
        cw_weighted,
    }
}

/// Matrices for every quarter present in `cells`, computed in parallel.
pub fn compute_all(cells: &[MarketCell], weight: Weight) -> BTreeMap<YearQuarter, MmcMatrix> {
    let mut by_q: BTreeMap<YearQuarter, Vec<MarketCell>> = BTreeMap::new();
    for c in cells {
        by_q.entry(c.period).or_default().push(*c);
    }
    let groups: Vec<(YearQuarter, Vec<MarketCell>)> = by_q.into_iter().collect();
    groups
        .par_iter()
        .map(|(q, cs)| (*q, compute_quarter(cs, *q, weight)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Long-format contact series (one row per quarter and ordered carrier pair).
pub fn write_series<W: Write>(mats: &BTreeMap<YearQuarter, MmcMatrix>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["year", "quarter", "carrier_h", "carrier_k", "ek", "cw", "cw_wgt"])?;
    for (q, m) in mats {
        for &h in m.carriers() {
            for &k in m.carriers() {
                if h == k {
                    continue;
                }
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                wtr.write_record([
                    q.year.to_string(),
                    q.quarter.to_string(),
                    h.to_string(),
                    k.to_string(),
                    m.ek.get(h, k).unwrap_or(0).to_string(),
                    opt(m.cw.get(h, k)),
                    opt(m.cw_weighted.get(h, k)),
                ])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<series>", e))?;
    Ok(())
}

/// Published 2023Q2 contact tables for eleven carriers.
pub mod fixtures {
    use super::*;

    pub const TABLE1_EK_2023Q2: &str = include_str!("../fixtures/table1_ek_2023q2.csv");
    pub const TABLE2_CW_2023Q2: &str = include_str!("../fixtures/table2_cw_2023q2.csv");

    pub fn table1_ek() -> EkMatrix {
        EkMatrix::read_csv(TABLE1_EK_2023Q2.as_bytes()).expect("embedded fixture parses")
    }

    pub fn table2_cw() -> RatioMatrix {
        RatioMatrix::read_csv(TABLE2_CW_2023Q2.as_bytes()).expect("embedded fixture parses")
    }
}
