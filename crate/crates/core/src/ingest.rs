//! Ticket ingest: parsing, CPI deflation, fare and carrier filters, and
//! passenger-weighted aggregation to time–market–carrier cells.
//!
//! Aggregation accumulates `fare * passengers` in 2^-48 fixed point, so cell
//! means do not depend on record order, batch boundaries, or thread count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::codes::{default_carriers, Airport, Carrier};
use crate::markets::{market_of, MarketKey};
use crate::{Error, Result, YearQuarter};

pub const FARE_MIN: f64 = 25.0;
pub const FARE_MAX: f64 = 2500.0;
pub const MIN_CELL_PASSENGERS: u64 = 30;
pub const CPI_BASE_YEAR: i32 = 2017;

/// One sampled one-way itinerary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TicketRecord {
    pub year: i32,
    pub quarter: u8,
    pub origin: Airport,
    pub dest: Airport,
    pub carrier: Carrier,
    pub passengers: u32,
    /// Per-passenger fare; nominal on input, 2017 dollars after filtering.
    pub fare: f64,
    pub segments: u32,
}

impl TicketRecord {
    pub fn period(&self) -> YearQuarter {
        YearQuarter {
            year: self.year,
            quarter: self.quarter,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        if self.origin == self.dest {
            return Err("origin equals destination");
        }
        if self.passengers < 1 {
            return Err("passengers < 1");
        }
        if self.segments < 1 {
            return Err("segments < 1");
        }
        if !(1..=4).contains(&self.quarter) {
            return Err("quarter out of range");
        }
        if !(self.fare.is_finite() && self.fare >= 0.0) {
            return Err("fare negative or not finite");
        }
        Ok(())
    }
}

/// Price index keyed by year, optionally refined by quarter.
#[derive(Clone, Debug)]
pub struct CpiTable {
    annual: BTreeMap<i32, f64>,
    quarterly: BTreeMap<YearQuarter, f64>,
    pub base_year: i32,
}

impl CpiTable {
    pub fn new(base_year: i32) -> Self {
        CpiTable {
            annual: BTreeMap::new(),
            quarterly: BTreeMap::new(),
            base_year,
        }
    }

    pub fn from_annual(base_year: i32, entries: impl IntoIterator<Item = (i32, f64)>) -> Result<Self> {
        let mut t = CpiTable::new(base_year);
        for (y, v) in entries {
            t.insert_annual(y, v)?;
        }
        Ok(t)
    }

    pub fn insert_annual(&mut self, year: i32, index: f64) -> Result<()> {
        if !(index.is_finite() && index > 0.0) {
            return Err(Error::Config(format!("CPI index for {year} must be positive")));
        }
        self.annual.insert(year, index);
        Ok(())
    }

    pub fn insert_quarterly(&mut self, period: YearQuarter, index: f64) -> Result<()> {
        if !(index.is_finite() && index > 0.0) {
            return Err(Error::Config(format!("CPI index for {period} must be positive")));
        }
        self.quarterly.insert(period, index);
        Ok(())
    }

    fn base_index(&self) -> Result<f64> {
        if let Some(v) = self.annual.get(&self.base_year) {
            return Ok(*v);
        }
        let qs: Vec<f64> = (1..=4)
            .filter_map(|q| {
                self.quarterly
                    .get(&YearQuarter {
                        year: self.base_year,
                        quarter: q,
                    })
                    .copied()
            })
            .collect();
        if qs.len() == 4 {
            Ok(qs.iter().sum::<f64>() / 4.0)
        } else {
            Err(Error::MissingCpi(self.base_year))
        }
    }

    /// Index for a quarter: the quarterly entry when present, else the annual one.
    pub fn index(&self, period: YearQuarter) -> Result<f64> {
        self.quarterly
            .get(&period)
            .or_else(|| self.annual.get(&period.year))
            .copied()
            .ok_or(Error::MissingCpi(period.year))
    }

    /// Multiplier taking a nominal amount in `period` to base-year dollars.
    pub fn factor(&self, period: YearQuarter) -> Result<f64> {
        Ok(self.base_index()? / self.index(period)?)
    }

    /// Reads `year[,quarter],index`.
    pub fn read_csv<R: Read>(reader: R, base_year: i32) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let year_col = col("year").ok_or_else(|| Error::Schema("CPI file lacks `year` column".into()))?;
        let index_col = col("index").ok_or_else(|| Error::Schema("CPI file lacks `index` column".into()))?;
        let quarter_col = col("quarter");
        let mut table = CpiTable::new(base_year);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let perr = |msg: &str| Error::Parse {
                line,
                msg: format!("CPI: {msg}"),
            };
            let year: i32 = rec[year_col].parse().map_err(|_| perr("bad year"))?;
            let index: f64 = rec[index_col].parse().map_err(|_| perr("bad index"))?;
            match quarter_col.map(|c| &rec[c]).filter(|q| !q.is_empty()) {
                Some(q) => {
                    let q: u8 = q.parse().map_err(|_| perr("bad quarter"))?;
                    let p = YearQuarter::new(year, q).ok_or_else(|| perr("quarter out of range"))?;
                    table.insert_quarterly(p, index)?;
                }
                None => table.insert_annual(year, index)?,
            }
        }
        Ok(table)
    }

    pub fn read_path(path: &Path, base_year: i32) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, base_year)
    }
}

/// Converts a nominal fare to base-year dollars.
pub fn deflate_fare(fare: f64, year: i32, cpi: &CpiTable) -> Result<f64> {
    let idx = cpi
        .annual
        .get(&year)
        .copied()
        .ok_or(Error::MissingCpi(year))?;
    Ok(fare * cpi.base_index()? / idx)
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub carriers: HashSet<Carrier>,
    /// Apply the fare bounds to nominal rather than deflated fares.
    pub filter_nominal: bool,
    pub fare_min: f64,
    pub fare_max: f64,
    pub min_cell_passengers: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            carriers: default_carriers().into_iter().collect(),
            filter_nominal: false,
            fare_min: FARE_MIN,
            fare_max: FARE_MAX,
            min_cell_passengers: MIN_CELL_PASSENGERS,
        }
    }
}

impl IngestOptions {
    pub fn with_carriers(carriers: impl IntoIterator<Item = Carrier>) -> Self {
        IngestOptions {
            carriers: carriers.into_iter().collect(),
            ..Default::default()
        }
    }
}

/// Counters for one ingest run. Passenger counters cover well-formed rows and
/// satisfy `pax_read = pax_carrier_filtered + pax_fare_filtered +
/// pax_dropped_cells + pax_in_cells`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub rows_fare_filtered: u64,
    pub rows_carrier_filtered: u64,
    pub cells_emitted: u64,
    pub cells_dropped_min_pax: u64,
    pub pax_read: u64,
    pub pax_carrier_filtered: u64,
    pub pax_fare_filtered: u64,
    pub pax_dropped_cells: u64,
    pub pax_in_cells: u64,
}

impl IngestSummary {
    fn merge(&mut self, o: &IngestSummary) {
        self.rows_read += o.rows_read;
        self.rows_malformed += o.rows_malformed;
        self.rows_fare_filtered += o.rows_fare_filtered;
        self.rows_carrier_filtered += o.rows_carrier_filtered;
        self.cells_emitted += o.cells_emitted;
        self.cells_dropped_min_pax += o.cells_dropped_min_pax;
        self.pax_read += o.pax_read;
        self.pax_carrier_filtered += o.pax_carrier_filtered;
        self.pax_fare_filtered += o.pax_fare_filtered;
        self.pax_dropped_cells += o.pax_dropped_cells;
        self.pax_in_cells += o.pax_in_cells;
    }

    pub fn counters(&self) -> [(&'static str, u64); 11] {
        [
            ("rows_read", self.rows_read),
            ("rows_malformed", self.rows_malformed),
            ("rows_fare_filtered", self.rows_fare_filtered),
            ("rows_carrier_filtered", self.rows_carrier_filtered),
            ("cells_emitted", self.cells_emitted),
            ("cells_dropped_min_pax", self.cells_dropped_min_pax),
            ("pax_read", self.pax_read),
            ("pax_carrier_filtered", self.pax_carrier_filtered),
            ("pax_fare_filtered", self.pax_fare_filtered),
            ("pax_dropped_cells", self.pax_dropped_cells),
            ("pax_in_cells", self.pax_in_cells),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["counter", "value"])?;
        for (k, v) in self.counters() {
            wtr.write_record([k, &v.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<summary>", e))?;
        Ok(())
    }
}

/// Outcome of filtering one record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterOutcome {
    Keep(TicketRecord),
    CarrierFiltered,
    FareFiltered,
}

/// Applies the carrier allow-list, then deflates and applies the fare bounds.
pub fn filter_ticket(rec: &TicketRecord, opts: &IngestOptions, cpi: &CpiTable) -> Result<FilterOutcome> {
    if !opts.carriers.contains(&rec.carrier) {
        return Ok(FilterOutcome::CarrierFiltered);
    }
    let real = rec.fare * cpi.factor(rec.period())?;
    let tested = if opts.filter_nominal { rec.fare } else { real };
    if tested < opts.fare_min || tested > opts.fare_max {
        return Ok(FilterOutcome::FareFiltered);
    }
    Ok(FilterOutcome::Keep(TicketRecord { fare: real, ..*rec }))
}

/// Filters and deflates a record stream, updating the row and passenger counters.
pub fn filter_tickets<I>(
    records: I,
    opts: &IngestOptions,
    cpi: &CpiTable,
    summary: &mut IngestSummary,
) -> Result<Vec<TicketRecord>>
where
    I: IntoIterator<Item = TicketRecord>,
{
    let mut out = Vec::new();
    for rec in records {
        summary.rows_read += 1;
        if rec.validate().is_err() {
            summary.rows_malformed += 1;
            continue;
        }
        summary.pax_read += rec.passengers as u64;
        match filter_ticket(&rec, opts, cpi)? {
            FilterOutcome::Keep(r) => out.push(r),
            FilterOutcome::CarrierFiltered => {
                summary.rows_carrier_filtered += 1;
                summary.pax_carrier_filtered += rec.passengers as u64;
            }
            FilterOutcome::FareFiltered => {
                summary.rows_fare_filtered += 1;
                summary.pax_fare_filtered += rec.passengers as u64;
            }
        }
    }
    Ok(out)
}

/// Aggregate for one time–market–carrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketCell {
    pub period: YearQuarter,
    pub market: MarketKey,
    pub carrier: Carrier,
    /// Passenger-weighted mean fare in base-year dollars.
    pub mean_fare: f64,
    pub passengers: u64,
}

impl MarketCell {
    pub fn sort_key(&self) -> (YearQuarter, MarketKey, Carrier) {
        (self.period, self.market, self.carrier)
    }
}

type CellKey = (YearQuarter, MarketKey, Carrier);

const FIXED_SCALE: f64 = (1u64 << 48) as f64;

#[derive(Clone, Copy, Debug, Default)]
struct CellSum {
    fare_pax: i128,
    pax: u64,
}

/// Order-independent accumulator of filtered records.
#[derive(Clone, Debug, Default)]
pub struct CellAccumulator {
    sums: HashMap<CellKey, CellSum>,
}

impl CellAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rec: &TicketRecord) {
        let key = (rec.period(), market_of(rec), rec.carrier);
        let s = self.sums.entry(key).or_default();
        let product = rec.fare * rec.passengers as f64;
        s.fare_pax += (product * FIXED_SCALE).round() as i128;
        s.pax += rec.passengers as u64;
    }

    pub fn merge(&mut self, other: CellAccumulator) {
        if self.sums.len() < other.sums.len() {
            let mine = std::mem::replace(&mut self.sums, other.sums);
            return self.merge(CellAccumulator { sums: mine });
        }
        for (k, v) in other.sums {
            let s = self.sums.entry(k).or_default();
            s.fare_pax += v.fare_pax;
            s.pax += v.pax;
        }
    }

    /// Emits cells with at least `min_pax` passengers, sorted by key.
    pub fn finish(self, min_pax: u64, summary: &mut IngestSummary) -> Vec<MarketCell> {
        let mut cells: Vec<MarketCell> = Vec::with_capacity(self.sums.len());
        for ((period, market, carrier), s) in self.sums {
            if s.pax < min_pax {
                summary.cells_dropped_min_pax += 1;
                summary.pax_dropped_cells += s.pax;
                continue;
            }
            summary.cells_emitted += 1;
            summary.pax_in_cells += s.pax;
            cells.push(MarketCell {
                period,
                market,
                carrier,
                mean_fare: (s.fare_pax as f64 / FIXED_SCALE) / s.pax as f64,
                passengers: s.pax,
            });
        }
        cells.sort_unstable_by_key(|c| c.sort_key());
        cells
    }
}

/// Aggregates filtered, deflated records into cells.
pub fn aggregate_cells<'a, I>(records: I, min_pax: u64, summary: &mut IngestSummary) -> Vec<MarketCell>
where
    I: IntoIterator<Item = &'a TicketRecord>,
{
    let mut acc = CellAccumulator::new();
    for r in records {
        acc.add(r);
    }
    acc.finish(min_pax, summary)
}

/// Column positions of the ticket file.
#[derive(Clone, Copy, Debug)]
struct TicketColumns {
    year: usize,
    quarter: usize,
    origin: usize,
    dest: usize,
    carrier: usize,
    passengers: usize,
    fare: usize,
    segments: usize,
}

impl TicketColumns {
    fn from_headers(h: &csv::ByteRecord) -> Result<Self> {
        let find = |names: &[&str]| {
            h.iter()
                .position(|c| names.iter().any(|n| c.trim_ascii().eq_ignore_ascii_case(n.as_bytes())))
                .ok_or_else(|| Error::Schema(format!("ticket file lacks `{}` column", names[0])))
        };
        Ok(TicketColumns {
            year: find(&["year"])?,
            quarter: find(&["quarter"])?,
            origin: find(&["origin"])?,
            dest: find(&["dest"])?,
            carrier: find(&["tkcarrier", "ticketing_carrier"])?,
            passengers: find(&["passengers"])?,
            fare: find(&["fare"])?,
            segments: find(&["segments"])?,
        })
    }

    fn parse(&self, r: &csv::ByteRecord) -> Option<TicketRecord> {
        fn num<T: std::str::FromStr>(b: &[u8]) -> Option<T> {
            std::str::from_utf8(b).ok()?.trim().parse().ok()
        }
        let rec = TicketRecord {
            year: num(r.get(self.year)?)?,
            quarter: num(r.get(self.quarter)?)?,
            origin: Airport::from_bytes(r.get(self.origin)?.trim_ascii())?,
            dest: Airport::from_bytes(r.get(self.dest)?.trim_ascii())?,
            carrier: Carrier::from_bytes(r.get(self.carrier)?.trim_ascii())?,
            passengers: num(r.get(self.passengers)?)?,
            fare: num(r.get(self.fare)?)?,
            segments: num(r.get(self.segments)?)?,
        };
        rec.validate().ok()?;
        Some(rec)
    }
}

const BATCH_ROWS: usize = 1 << 17;
const CHUNK_ROWS: usize = 1 << 13;

fn process_chunk(
    chunk: &[csv::ByteRecord],
    cols: &TicketColumns,
    opts: &IngestOptions,
    cpi: &CpiTable,
) -> Result<(CellAccumulator, IngestSummary)> {
    let mut acc = CellAccumulator::new();
    let mut s = IngestSummary::default();
    for raw in chunk {
        s.rows_read += 1;
        let Some(rec) = cols.parse(raw) else {
            s.rows_malformed += 1;
            continue;
        };
        s.pax_read += rec.passengers as u64;
        match filter_ticket(&rec, opts, cpi)? {
            FilterOutcome::Keep(r) => acc.add(&r),
            FilterOutcome::CarrierFiltered => {
                s.rows_carrier_filtered += 1;
                s.pax_carrier_filtered += rec.passengers as u64;
            }
            FilterOutcome::FareFiltered => {
                s.rows_fare_filtered += 1;
                s.pax_fare_filtered += rec.passengers as u64;
            }
        }
    }
    Ok((acc, s))
}

/// Streams one ticket CSV into `acc`. Parsing and filtering run in parallel
/// over fixed-size chunks; the result does not depend on the thread count.
pub fn ingest_reader<R: Read>(
    reader: R,
    cpi: &CpiTable,
    opts: &IngestOptions,
    acc: &mut CellAccumulator,
    summary: &mut IngestSummary,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .buffer_capacity(1 << 20)
        .from_reader(reader);
    let cols = TicketColumns::from_headers(rdr.byte_headers()?)?;
    let mut batch: Vec<csv::ByteRecord> = vec![csv::ByteRecord::new(); BATCH_ROWS];
    loop {
        let mut n = 0;
        while n < BATCH_ROWS {
            match rdr.read_byte_record(&mut batch[n]) {
                Ok(true) => n += 1,
                Ok(false) => break,
                // Undecodable row: count as malformed and keep going.
                Err(e) if !matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                    summary.rows_read += 1;
                    summary.rows_malformed += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if n == 0 {
            break;
        }
        let parts: Vec<Result<(CellAccumulator, IngestSummary)>> = batch[..n]
            .par_chunks(CHUNK_ROWS)
            .map(|c| process_chunk(c, &cols, opts, cpi))
            .collect();
        let mut missing: Option<i32> = None;
        for p in parts {
            match p {
                Ok((a, s)) => {
                    acc.merge(a);
                    summary.merge(&s);
                }
                Err(Error::MissingCpi(y)) => missing = Some(missing.map_or(y, |m| m.min(y))),
                Err(e) => return Err(e),
            }
        }
        if let Some(y) = missing {
            return Err(Error::MissingCpi(y));
        }
        if n < BATCH_ROWS {
            break;
        }
    }
    Ok(())
}

/// Opens a possibly gzip-compressed file.
pub fn open_input(path: &Path, gzip: bool) -> Result<Box<dyn Read + Send>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let gz = gzip || path.extension().is_some_and(|e| e == "gz");
    Ok(if gz {
        Box::new(flate2::read::MultiGzDecoder::new(BufReader::new(f)))
    } else {
        Box::new(BufReader::with_capacity(1 << 20, f))
    })
}

/// Ingests ticket files into sorted market cells.
pub fn ingest_paths(
    paths: &[impl AsRef<Path>],
    gzip: bool,
    cpi: &CpiTable,
    opts: &IngestOptions,
) -> Result<(Vec<MarketCell>, IngestSummary)> {
    let mut acc = CellAccumulator::new();
    let mut summary = IngestSummary::default();
    for p in paths {
        let r = open_input(p.as_ref(), gzip)?;
        ingest_reader(r, cpi, opts, &mut acc, &mut summary)?;
    }
    let cells = acc.finish(opts.min_cell_passengers, &mut summary);
    Ok((cells, summary))
}

/// Reads an allow-list: codes separated by newlines, commas or whitespace;
/// `#` starts a comment.
pub fn read_carrier_list<R: Read>(reader: R) -> Result<Vec<Carrier>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<carriers>", e))?;
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let c = tok.parse().map_err(|msg| Error::Parse {
                line: i as u64 + 1,
                msg,
            })?;
            out.push(c);
        }
    }
    Ok(out)
}

pub const CELL_HEADER: [&str; 8] = [
    "year", "quarter", "origin", "dest", "nonstop", "carrier", "mean_fare", "passengers",
];

pub fn write_cells<W: Write>(cells: &[MarketCell], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CELL_HEADER)?;
    for c in cells {
        wtr.write_record([
            c.period.year.to_string(),
            c.period.quarter.to_string(),
            c.market.origin.to_string(),
            c.market.dest.to_string(),
            (c.market.nonstop as u8).to_string(),
            c.carrier.to_string(),
            c.mean_fare.to_string(),
            c.passengers.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<cells>", e))?;
    Ok(())
}

/// Reads a cell file; extra columns (e.g. distance metadata) are ignored.
pub fn read_cells<R: Read>(reader: R) -> Result<Vec<MarketCell>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(CELL_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema(format!("cell file lacks `{name}` column")))?;
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("cell file: bad {what}"),
        };
        let year: i32 = rec[idx[0]].parse().map_err(|_| bad("year"))?;
        let quarter: u8 = rec[idx[1]].parse().map_err(|_| bad("quarter"))?;
        let period = YearQuarter::new(year, quarter).ok_or_else(|| bad("quarter"))?;
        let origin: Airport = rec[idx[2]].parse().map_err(|_| bad("origin"))?;
        let dest: Airport = rec[idx[3]].parse().map_err(|_| bad("dest"))?;
        let nonstop = match &rec[idx[4]] {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad("nonstop")),
        };
        let carrier: Carrier = rec[idx[5]].parse().map_err(|_| bad("carrier"))?;
        let mean_fare: f64 = rec[idx[6]].parse().map_err(|_| bad("mean_fare"))?;
        let passengers: u64 = rec[idx[7]].parse().map_err(|_| bad("passengers"))?;
        out.push(MarketCell {
            period,
            market: MarketKey::new(origin, dest, nonstop),
            carrier,
            mean_fare,
            passengers,
        });
    }
    Ok(out)
}

pub fn read_cells_path(path: &Path) -> Result<Vec<MarketCell>> {
    read_cells(open_input(path, false)?)
}
