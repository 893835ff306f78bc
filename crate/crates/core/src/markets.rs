//! Market and city-pair keys.
//!
//! A market is a directed airport pair split by whether the itinerary is
//! nonstop; a city pair is the same directed pair with the nonstop flag
//! erased. Airport codes are used as they appear in the data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use crate::codes::Airport;
use crate::ingest::{MarketCell, TicketRecord};
use crate::{Error, Result, YearQuarter};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CityPairKey {
    pub origin: Airport,
    pub dest: Airport,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MarketKey {
    pub origin: Airport,
    pub dest: Airport,
    pub nonstop: bool,
}

impl MarketKey {
    pub fn new(origin: Airport, dest: Airport, nonstop: bool) -> Self {
        MarketKey {
            origin,
            dest,
            nonstop,
        }
    }

    pub fn city_pair(&self) -> CityPairKey {
        city_pair_of(self)
    }
}

impl fmt::Display for CityPairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.origin, self.dest)
    }
}

impl fmt::Display for MarketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.nonstop { "nonstop" } else { "connect" };
        write!(f, "{}-{}/{}", self.origin, self.dest, kind)
    }
}

/// A single flight coupon marks a nonstop itinerary.
pub fn market_of(record: &TicketRecord) -> MarketKey {
    MarketKey::new(record.origin, record.dest, record.segments == 1)
}

pub fn city_pair_of(market: &MarketKey) -> CityPairKey {
    CityPairKey {
        origin: market.origin,
        dest: market.dest,
    }
}

/// Both markets that share a city pair.
pub fn markets_of(cp: CityPairKey) -> [MarketKey; 2] {
    [
        MarketKey::new(cp.origin, cp.dest, true),
        MarketKey::new(cp.origin, cp.dest, false),
    ]
}

/// Optional airport-to-city grouping applied before keys are built.
///
/// Ships empty: markets are defined on airports.
#[derive(Clone, Debug, Default)]
pub struct CityGrouping {
    map: BTreeMap<Airport, Airport>,
}

impl CityGrouping {
    pub fn insert(&mut self, airport: Airport, city: Airport) {
        self.map.insert(airport, city);
    }

    pub fn apply(&self, a: Airport) -> Airport {
        self.map.get(&a).copied().unwrap_or(a)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Per-quarter market counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketCountRow {
    pub period: YearQuarter,
    pub markets: usize,
    pub nonstop_markets: usize,
    pub city_pairs: usize,
}

pub fn summarize(cells: &[MarketCell]) -> Vec<MarketCountRow> {
    let mut by_q: BTreeMap<YearQuarter, (BTreeSet<MarketKey>, BTreeSet<CityPairKey>)> =
        BTreeMap::new();
    for c in cells {
        let e = by_q.entry(c.period).or_default();
        e.0.insert(c.market);
        e.1.insert(c.market.city_pair());
    }
    by_q
        .into_iter()
        .map(|(period, (m, cp))| MarketCountRow {
            period,
            markets: m.len(),
            nonstop_markets: m.iter().filter(|k| k.nonstop).count(),
            city_pairs: cp.len(),
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[MarketCountRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["year", "quarter", "markets", "nonstop_markets", "city_pairs"])?;
    for r in rows {
        wtr.write_record([
            r.period.year.to_string(),
            r.period.quarter.to_string(),
            r.markets.to_string(),
            r.nonstop_markets.to_string(),
            r.city_pairs.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<summary>", e))
}
