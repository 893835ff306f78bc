//! Seeded synthetic markets with planted regression coefficients.
//!
//! Carrier networks follow a two-state Markov chain per carrier and city
//! pair; market cells, contact matrices, shares and pair rows are then built
//! with the production code. The price difference of every pair row is drawn
//! from the linear model with planted coefficients, fixed-effect draws and
//! Gaussian noise, plus one constant that keeps all differences non-negative.
//! Cell fares reproduce the planted differences exactly wherever a market
//! quarter has two carriers; with three or more carriers the pairwise
//! differences cannot all be matched by fares and the planted pair rows are
//! authoritative.
//!
//! Randomness comes from ChaCha20 ([`RNG_ALGORITHM`]), one stream per purpose
//! derived from the seed, so outputs are reproducible across platforms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::Deserialize;

use crate::codes::{Airport, Carrier, DEFAULT_CARRIERS};
use crate::events::{tag, MergerEvent, EVENT_COLUMNS};
use crate::ingest::{MarketCell, FARE_MAX, FARE_MIN, MIN_CELL_PASSENGERS};
use crate::markets::MarketKey;
use crate::mmc::{compute_all, Weight};
use crate::panel::{build_pair_diff_panel, PairObservation};
use crate::{Error, Result, YearQuarter};

pub const RNG_ALGORITHM: &str = "chacha20";

/// Covariates that can carry a planted coefficient.
pub const PLANTABLE: [&str; 5] = ["mmc_ek_scaled", "nonstop", "tp", "cs", "rs"];
/// Fixed-effect dimensions that can receive draws.
pub const FE_DIMS: [&str; 4] = ["year", "quarter", "city_pair", "carrier_pair"];

/// Smallest generated price difference.
const DP_FLOOR: f64 = 1.0;

const STREAM_NETWORK: u64 = 1;
const STREAM_PRESENCE: u64 = 2;
const STREAM_FE: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_FARES: u64 = 5;
const STREAM_TICKETS: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthMerger {
    /// Preset name (`ua-co`, `aa-us`).
    pub event: String,
    /// Planted event coefficients keyed by event column name.
    #[serde(default)]
    pub theta: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_carriers: usize,
    pub n_city_pairs: usize,
    pub n_quarters: usize,
    /// First quarter, e.g. `2008Q1`. Merger panels default to two years
    /// before the announcement.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub planted: BTreeMap<String, f64>,
    #[serde(default)]
    pub fe_scales: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise_sd: f64,
    /// Stationary probability that a carrier serves a city pair.
    #[serde(default = "default_presence")]
    pub presence: f64,
    /// Probability that a served city pair stays served next quarter.
    #[serde(default = "default_persistence")]
    pub persistence: f64,
    #[serde(default)]
    pub merger: Option<SynthMerger>,
}

fn default_presence() -> f64 {
    0.35
}

fn default_persistence() -> f64 {
    0.9
}

impl SynthConfig {
    pub fn new(seed: u64, n_carriers: usize, n_city_pairs: usize, n_quarters: usize) -> Self {
        SynthConfig {
            seed,
            n_carriers,
            n_city_pairs,
            n_quarters,
            start: None,
            planted: BTreeMap::new(),
            fe_scales: BTreeMap::new(),
            noise_sd: 0.0,
            presence: default_presence(),
            persistence: default_persistence(),
            merger: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn event(&self) -> Result<Option<MergerEvent>> {
        self.merger
            .as_ref()
            .map(|m| {
                MergerEvent::preset(&m.event).ok_or_else(|| Error::Config(format!("unknown merger preset `{}`", m.event)))
            })
            .transpose()
    }

    pub fn start(&self) -> Result<YearQuarter> {
        match (&self.start, self.event()?) {
            (Some(s), _) => s.parse().map_err(|_| Error::Config(format!("bad start quarter `{s}`"))),
            (None, Some(ev)) => Ok(YearQuarter::from_index(ev.announce.index() - 8)),
            (None, None) => Ok(YearQuarter::new(2008, 1).unwrap()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DegenerateConfig(m));
        if self.n_carriers < 2 {
            return bad(format!("n_carriers = {} (need at least 2)", self.n_carriers));
        }
        if self.n_carriers > DEFAULT_CARRIERS.len() + 100 {
            return bad(format!("n_carriers = {} is too large", self.n_carriers));
        }
        if self.n_city_pairs == 0 || self.n_quarters == 0 {
            return bad("n_city_pairs and n_quarters must be positive".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd = {}", self.noise_sd));
        }
        if !(self.presence > 0.0 && self.presence <= 1.0) || !(0.0..=1.0).contains(&self.persistence) {
            return bad("presence must lie in (0, 1] and persistence in [0, 1]".into());
        }
        for (k, v) in &self.planted {
            if !PLANTABLE.contains(&k.as_str()) {
                return Err(Error::Config(format!("cannot plant a coefficient on `{k}`")));
            }
            if !v.is_finite() {
                return bad(format!("planted `{k}` is not finite"));
            }
        }
        for (k, v) in &self.fe_scales {
            if !FE_DIMS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown fixed-effect dimension `{k}`")));
            }
            if !(*v >= 0.0 && v.is_finite()) {
                return bad(format!("fe scale `{k}` = {v}"));
            }
        }
        if let Some(m) = &self.merger {
            for k in m.theta.keys() {
                if !EVENT_COLUMNS.contains(&k.as_str()) {
                    return Err(Error::Config(format!("unknown event slot `{k}`")));
                }
            }
            let ev = self.event()?.unwrap();
            let first = self.start()?;
            if first >= ev.announce {
                return bad("merger panel needs quarters before the announcement".into());
            }
        }
        Ok(())
    }

    fn periods(&self) -> Result<Vec<YearQuarter>> {
        let s = self.start()?.index();
        Ok((0..self.n_quarters as i64).map(|i| YearQuarter::from_index(s + i)).collect())
    }
}

/// Planted values and draws needed to judge a fit.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub seed: u64,
    pub planted: BTreeMap<String, f64>,
    pub theta: BTreeMap<String, f64>,
    pub noise_sd: f64,
    /// Constant added to every price difference.
    pub shift: f64,
    pub event: Option<MergerEvent>,
}

impl Truth {
    /// Every coefficient of the data-generating model, zero when not planted.
    pub fn coefficient(&self, name: &str) -> f64 {
        self.planted
            .get(name)
            .or_else(|| self.theta.get(name))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["parameter", "value"])?;
        wtr.write_record(["rng", RNG_ALGORITHM])?;
        wtr.write_record(["seed", &self.seed.to_string()])?;
        for (k, v) in self.planted.iter().chain(&self.theta) {
            wtr.write_record([k.as_str(), &v.to_string()])?;
        }
        wtr.write_record(["noise_sd", &self.noise_sd.to_string()])?;
        wtr.write_record(["shift", &self.shift.to_string()])?;
        if let Some(ev) = &self.event {
            wtr.write_record(["event", &ev.name])?;
        }
        wtr.flush().map_err(|e| Error::io("<truth>", e))?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthPanel {
    pub cells: Vec<MarketCell>,
    /// Pair rows carrying the planted price differences.
    pub pairs: Vec<PairObservation>,
    pub truth: Truth,
}

/// `n`-th three-letter code in AAA, AAB, ... order.
pub fn airport_code(n: usize) -> Airport {
    let b = [
        b'A' + (n / 676 % 26) as u8,
        b'A' + (n / 26 % 26) as u8,
        b'A' + (n % 26) as u8,
    ];
    Airport::from_bytes(&b).unwrap()
}

fn pick_carriers(n: usize, event: Option<&MergerEvent>) -> Vec<Carrier> {
    let mut out: Vec<Carrier> = Vec::with_capacity(n);
    if let Some(ev) = event {
        out.push(ev.carrier_a);
        out.push(ev.carrier_b);
    }
    for c in DEFAULT_CARRIERS.iter().map(|c| Carrier::code(c)) {
        if out.len() < n && !out.contains(&c) {
            out.push(c);
        }
    }
    let mut i = 0;
    while out.len() < n {
        out.push(Carrier::code(&format!("Q{i:02}")));
        i += 1;
    }
    out.sort();
    out
}

/// Distinct directed airport pairs, drawn without replacement.
fn city_pairs(n: usize, rng: &mut ChaCha20Rng) -> Vec<(Airport, Airport)> {
    let mut m = 2;
    while m * (m - 1) < 2 * n {
        m += 1;
    }
    let mut all: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    for i in 0..n {
        let j = rng.random_range(i..all.len());
        all.swap(i, j);
    }
    let mut out: Vec<(Airport, Airport)> = all[..n]
        .iter()
        .map(|&(a, b)| (airport_code(a), airport_code(b)))
        .collect();
    out.sort();
    out
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates cells and planted pair rows.
pub fn generate_panel(cfg: &SynthConfig) -> Result<SynthPanel> {
    cfg.validate()?;
    let event = cfg.event()?;
    let carriers = pick_carriers(cfg.n_carriers, event.as_ref());
    let periods = cfg.periods()?;
    let cps = city_pairs(cfg.n_city_pairs, &mut stream(cfg.seed, STREAM_NETWORK));

    let mut cells = generate_cells(cfg, &carriers, &cps, &periods, event.as_ref());
    cells.sort_by_key(MarketCell::sort_key);
    let mats = compute_all(&cells, Weight::Passengers);
    let mut pairs = build_pair_diff_panel(&cells, &mats)?;
    if pairs.is_empty() {
        return Err(Error::DegenerateConfig(
            "no market-quarter has two carriers; raise presence or sizes".into(),
        ));
    }

    let fe = FeDraws::draw(cfg, &carriers, &cps, &periods);
    let theta = cfg.merger.as_ref().map(|m| m.theta.clone()).unwrap_or_default();
    let mut noise = stream(cfg.seed, STREAM_NOISE);
    let raw: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let mut v = 0.0;
            for (name, b) in &cfg.planted {
                v += b * covariate(p, name);
            }
            if let Some(ev) = &event {
                let cols = tag(p.period, p.carrier_lo, p.carrier_hi, ev).columns();
                for (name, x) in EVENT_COLUMNS.iter().zip(cols) {
                    if let Some(t) = theta.get(*name) {
                        v += t * x;
                    }
                }
            }
            v + fe.effect(p) + cfg.noise_sd * normal(&mut noise)
        })
        .collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = DP_FLOOR + (-min).max(0.0);
    for (p, r) in pairs.iter_mut().zip(&raw) {
        p.dp = r + shift;
    }

    set_fares(cfg.seed, &mut cells, &pairs)?;
    Ok(SynthPanel {
        cells,
        pairs,
        truth: Truth {
            seed: cfg.seed,
            planted: cfg.planted.clone(),
            theta,
            noise_sd: cfg.noise_sd,
            shift,
            event,
        },
    })
}

fn covariate(p: &PairObservation, name: &str) -> f64 {
    match name {
        "mmc_ek_scaled" => p.mmc_ek_scaled,
        "nonstop" => p.market.nonstop as u8 as f64,
        "tp" => p.tp as f64,
        "cs" => p.cs,
        "rs" => p.rs,
        _ => unreachable!("validated covariate name"),
    }
}

fn generate_cells(
    cfg: &SynthConfig,
    carriers: &[Carrier],
    cps: &[(Airport, Airport)],
    periods: &[YearQuarter],
    event: Option<&MergerEvent>,
) -> Vec<MarketCell> {
    let mut rng = stream(cfg.seed, STREAM_PRESENCE);
    let pax = LogNormal::new(120f64.ln(), 0.8).unwrap();
    let enter = if cfg.presence < 1.0 {
        (cfg.presence * (1.0 - cfg.persistence) / (1.0 - cfg.presence)).min(1.0)
    } else {
        1.0
    };
    let mut cells = Vec::new();
    for &c in carriers {
        let gone_from = event.filter(|e| e.absorbed() == c).map(|e| e.certificate);
        for &(o, d) in cps {
            let mut on = false;
            for (i, &t) in periods.iter().enumerate() {
                let u: f64 = rng.random();
                on = match (i, on) {
                    (0, _) => u < cfg.presence,
                    (_, true) => u < cfg.persistence,
                    (_, false) => u < enter,
                };
                let kind: f64 = rng.random();
                if !on || gone_from.is_some_and(|g| t >= g) {
                    continue;
                }
                let (ns, so) = match kind {
                    k if k < 0.5 => (true, true),
                    k if k < 0.75 => (true, false),
                    _ => (false, true),
                };
                for (nonstop, served) in [(true, ns), (false, so)] {
                    if served {
                        let extra = pax.sample(&mut rng).min(1e5) as u64;
                        cells.push(MarketCell {
                            period: t,
                            market: MarketKey::new(o, d, nonstop),
                            carrier: c,
                            mean_fare: 0.0,
                            passengers: MIN_CELL_PASSENGERS + extra,
                        });
                    }
                }
            }
        }
    }
    cells
}

struct FeDraws {
    year: BTreeMap<i32, f64>,
    quarter: [f64; 4],
    city_pair: BTreeMap<(Airport, Airport), f64>,
    carrier_pair: BTreeMap<(Carrier, Carrier), f64>,
}

impl FeDraws {
    fn draw(cfg: &SynthConfig, carriers: &[Carrier], cps: &[(Airport, Airport)], periods: &[YearQuarter]) -> Self {
        let mut rng = stream(cfg.seed, STREAM_FE);
        let scale = |k: &str| cfg.fe_scales.get(k).copied().unwrap_or(0.0);
        let mut years: Vec<i32> = periods.iter().map(|p| p.year).collect();
        years.dedup();
        let (sy, sq, sc, sk) = (scale("year"), scale("quarter"), scale("city_pair"), scale("carrier_pair"));
        let year = years.into_iter().map(|y| (y, sy * normal(&mut rng))).collect();
        let quarter = [(); 4].map(|_| sq * normal(&mut rng));
        let city_pair = cps.iter().map(|&cp| (cp, sc * normal(&mut rng))).collect();
        let mut carrier_pair = BTreeMap::new();
        for (i, &a) in carriers.iter().enumerate() {
            for &b in &carriers[i + 1..] {
                carrier_pair.insert((a, b), sk * normal(&mut rng));
            }
        }
        FeDraws {
            year,
            quarter,
            city_pair,
            carrier_pair,
        }
    }

    fn effect(&self, p: &PairObservation) -> f64 {
        self.year[&p.period.year]
            + self.quarter[p.period.quarter as usize - 1]
            + self.city_pair[&(p.market.origin, p.market.dest)]
            + self.carrier_pair[&(p.carrier_lo, p.carrier_hi)]
    }
}

/// Assigns fares so that two-carrier market-quarters reproduce their planted
/// difference. Cells and pairs are both ordered by (quarter, market).
fn set_fares(seed: u64, cells: &mut [MarketCell], pairs: &[PairObservation]) -> Result<()> {
    let mut rng = stream(seed, STREAM_FARES);
    let mut pi = 0;
    for group in cells.chunk_by_mut(|a, b| (a.period, a.market) == (b.period, b.market)) {
        let base: f64 = rng.random_range(120.0..400.0);
        let flip: bool = rng.random();
        let n = group.len();
        if n == 2 {
            let dp = pairs[pi].dp;
            debug_assert_eq!((pairs[pi].period, pairs[pi].market), (group[0].period, group[0].market));
            let (lo, hi) = if flip { (base + dp, base) } else { (base, base + dp) };
            group[0].mean_fare = lo;
            group[1].mean_fare = hi;
        } else {
            for c in group.iter_mut() {
                c.mean_fare = base + rng.random_range(0.0..80.0);
            }
        }
        pi += n * (n - 1) / 2;
        if let Some(c) = group.iter().find(|c| !(FARE_MIN..=FARE_MAX).contains(&c.mean_fare)) {
            return Err(Error::DegenerateConfig(format!(
                "planted price difference pushes fare {} outside [{FARE_MIN}, {FARE_MAX}]",
                c.mean_fare
            )));
        }
    }
    Ok(())
}

/// Parameters of the raw ticket generator.
#[derive(Clone, Debug, PartialEq)]
pub struct TicketSynth {
    pub seed: u64,
    pub rows: u64,
    pub n_airports: usize,
    pub start: YearQuarter,
    pub n_quarters: usize,
    /// Share of rows written with a broken field.
    pub malformed_rate: f64,
}

impl TicketSynth {
    pub fn new(seed: u64, rows: u64) -> Self {
        TicketSynth {
            seed,
            rows,
            n_airports: 40,
            start: YearQuarter::new(2015, 1).unwrap(),
            n_quarters: 8,
            malformed_rate: 1e-4,
        }
    }

    pub fn stream(&self) -> TicketStream {
        let mut carriers: Vec<Carrier> = DEFAULT_CARRIERS.iter().map(|c| Carrier::code(c)).collect();
        // Two codes outside the default allow-list.
        carriers.push(Carrier::code("ZZ"));
        carriers.push(Carrier::code("9X"));
        TicketStream {
            cfg: self.clone(),
            airports: (0..self.n_airports.max(2)).map(airport_code).collect(),
            carriers,
            block: 0,
            emitted: 0,
            buf: b"year,quarter,origin,dest,tkcarrier,passengers,fare,segments\n".to_vec(),
            pos: 0,
        }
    }

    pub fn years(&self) -> (i32, i32) {
        let last = YearQuarter::from_index(self.start.index() + self.n_quarters.max(1) as i64 - 1);
        (self.start.year, last.year)
    }

    /// Annual CPI covering the generated years and the base year.
    pub fn cpi_csv(&self) -> String {
        let (a, b) = self.years();
        let (a, b) = (a.min(crate::ingest::CPI_BASE_YEAR), b.max(crate::ingest::CPI_BASE_YEAR));
        let mut s = String::from("year,index\n");
        for y in a..=b {
            s.push_str(&format!("{y},{:.3}\n", 200.0 * 1.025f64.powi(y - 2000)));
        }
        s
    }
}

const TICKET_BLOCK: u64 = 4096;

/// Ticket CSV produced on the fly. Each block of rows has its own derived
/// stream, so the text is the same however it is read.
pub struct TicketStream {
    cfg: TicketSynth,
    airports: Vec<Airport>,
    carriers: Vec<Carrier>,
    block: u64,
    emitted: u64,
    buf: Vec<u8>,
    pos: usize,
}

impl TicketStream {
    fn refill(&mut self) {
        self.buf.clear();
        self.pos = 0;
        let n = TICKET_BLOCK.min(self.cfg.rows - self.emitted);
        let mut rng = stream(self.cfg.seed, STREAM_TICKETS + self.block);
        let fare = LogNormal::new(220f64.ln(), 0.6).unwrap();
        let na = self.airports.len();
        let nc = self.carriers.len();
        for _ in 0..n {
            let t = YearQuarter::from_index(self.cfg.start.index() + rng.random_range(0..self.cfg.n_quarters.max(1)) as i64);
            let skew = |u: f64| ((u * u) * na as f64) as usize % na;
            let o = skew(rng.random());
            let mut d = skew(rng.random());
            if d == o {
                d = (o + 1 + rng.random_range(0..na - 1)) % na;
            }
            // A few carriers dominate each city pair.
            let u: f64 = rng.random();
            let c = (o * 31 + d * 17 + (u * u * 5.0) as usize) % nc;
            let pax: u32 = if rng.random::<f64>() < 0.85 { 1 } else { rng.random_range(2..=4) };
            let f: f64 = if rng.random::<f64>() < 0.005 { 0.0 } else { fare.sample(&mut rng) };
            let seg: u32 = match rng.random::<f64>() {
                s if s < 0.55 => 1,
                s if s < 0.95 => 2,
                _ => 3,
            };
            if rng.random::<f64>() < self.cfg.malformed_rate {
                let _ = writeln!(self.buf, "{},{},{},,{},x,,", t.year, t.quarter, self.airports[o], self.carriers[c]);
            } else {
                let _ = writeln!(
                    self.buf,
                    "{},{},{},{},{},{},{:.2},{}",
                    t.year, t.quarter, self.airports[o], self.airports[d], self.carriers[c], pax, f, seg
                );
            }
        }
        self.emitted += n;
        self.block += 1;
    }
}

impl Read for TicketStream {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        if self.pos == self.buf.len() {
            if self.emitted >= self.cfg.rows {
                return Ok(0);
            }
            self.refill();
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig::new(seed, 5, 40, 8)
    }

    #[test]
    fn pure_intercept_world() {
        let p = generate_panel(&small(3)).unwrap();
        let dp0 = p.pairs[0].dp;
        assert!(p.pairs.iter().all(|r| r.dp == dp0));
    }

    #[test]
    fn nonstop_effect_is_exact() {
        let mut cfg = small(4);
        cfg.planted.insert("nonstop".into(), -5.0);
        let p = generate_panel(&cfg).unwrap();
        let stop: BTreeMap<_, f64> = p
            .pairs
            .iter()
            .filter(|r| !r.nonstop())
            .map(|r| ((r.period, r.market.city_pair(), r.carrier_lo, r.carrier_hi), r.dp))
            .collect();
        let mut matched = 0;
        for r in p.pairs.iter().filter(|r| r.nonstop()) {
            if let Some(s) = stop.get(&(r.period, r.market.city_pair(), r.carrier_lo, r.carrier_hi)) {
                assert_eq!(s - r.dp, 5.0);
                matched += 1;
            }
        }
        assert!(matched > 0);
    }

    #[test]
    fn same_seed_same_output() {
        let mut cfg = small(9);
        cfg.noise_sd = 1.5;
        cfg.fe_scales.insert("city_pair".into(), 2.0);
        let a = generate_panel(&cfg).unwrap();
        let b = generate_panel(&cfg).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.pairs, b.pairs);
        cfg.seed = 10;
        assert_ne!(generate_panel(&cfg).unwrap().pairs, a.pairs);
    }

    #[test]
    fn cells_respect_ingest_bounds() {
        let mut cfg = small(5);
        cfg.noise_sd = 3.0;
        cfg.fe_scales.insert("carrier_pair".into(), 5.0);
        let p = generate_panel(&cfg).unwrap();
        for c in &p.cells {
            assert!(c.passengers >= MIN_CELL_PASSENGERS);
            assert!((FARE_MIN..=FARE_MAX).contains(&c.mean_fare));
        }
        assert!(p.pairs.iter().all(|r| r.dp >= 0.0));
    }

    #[test]
    fn degenerate_configs() {
        assert!(matches!(
            generate_panel(&SynthConfig::new(1, 1, 10, 4)),
            Err(Error::DegenerateConfig(_))
        ));
        let mut cfg = small(1);
        cfg.planted.insert("hhi".into(), 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_config() {
        let cfg = SynthConfig::from_toml(
            "seed = 1\nn_carriers = 6\nn_city_pairs = 30\nn_quarters = 20\nnoise_sd = 1.0\n\
             [planted]\nnonstop = -1.7\n[merger]\nevent = \"ua-co\"\n[merger.theta]\nannc_both = -3.0\n",
        )
        .unwrap();
        assert_eq!(cfg.start().unwrap(), "2008Q2".parse().unwrap());
        let p = generate_panel(&cfg).unwrap();
        let co = Carrier::code("CO");
        let cert = cfg.event().unwrap().unwrap().certificate;
        assert!(!p.cells.iter().any(|c| c.carrier == co && c.period >= cert));
    }

    #[test]
    fn ticket_stream_is_chunking_independent() {
        let cfg = TicketSynth::new(11, 10_000);
        let mut a = Vec::new();
        cfg.stream().read_to_end(&mut a).unwrap();
        let mut b = Vec::new();
        let mut s = cfg.stream();
        let mut buf = [0u8; 7];
        loop {
            let n = s.read(&mut buf).unwrap();
            if n == 0 {
                break;
            }
            b.extend_from_slice(&buf[..n]);
        }
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 10_001);
    }
}
