//! Merger event windows and the difference-in-differences design.
//!
//! Three consecutive windows start at the announcement, approval and
//! operating-certificate quarters. A carrier pair is `either` when exactly one
//! of its carriers is a merging carrier and `both` when it is the merging pair
//! itself. The design has eight slots: each window alone and interacted with
//! `either` and `both`, except certificate × both, which cannot occur because
//! one merging code disappears at the certificate.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::codes::Carrier;
use crate::frame::Frame;
use crate::hdfe::{fit_hdfe, fmt_num, linear_combination_test, FitResult, LinearCombination, RegressionSpec, SeKind};
use crate::panel::{pair_frame, PairObservation};
use crate::{Error, Result, YearQuarter};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergerEvent {
    pub name: String,
    pub carrier_a: Carrier,
    pub carrier_b: Carrier,
    pub announce: YearQuarter,
    pub approve: YearQuarter,
    pub certificate: YearQuarter,
    pub surviving: Carrier,
}

impl MergerEvent {
    pub fn new(
        name: &str,
        (a, b): (&str, &str),
        announce: YearQuarter,
        approve: YearQuarter,
        certificate: YearQuarter,
        surviving: &str,
    ) -> Result<Self> {
        let ev = MergerEvent {
            name: name.to_string(),
            carrier_a: parse_carrier(a)?,
            carrier_b: parse_carrier(b)?,
            announce,
            approve,
            certificate,
            surviving: parse_carrier(surviving)?,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_a == self.carrier_b {
            return Err(Error::Config("merging carriers must differ".into()));
        }
        if !(self.announce <= self.approve && self.approve <= self.certificate) {
            return Err(Error::Config(format!(
                "event `{}` milestones out of order: {} {} {}",
                self.name, self.announce, self.approve, self.certificate
            )));
        }
        if self.surviving != self.carrier_a && self.surviving != self.carrier_b {
            return Err(Error::Config(format!(
                "surviving code {} is not one of the merging carriers",
                self.surviving
            )));
        }
        Ok(())
    }

    /// United/Continental: announced May 2010, cleared August 2010, single
    /// certificate November 2011.
    pub fn ua_co() -> Self {
        let q = |y, n| YearQuarter::new(y, n).unwrap();
        MergerEvent::new("ua-co", ("UA", "CO"), q(2010, 2), q(2010, 3), q(2011, 4), "UA").unwrap()
    }

    /// American/US Airways: announced February 2013, settlement November
    /// 2013, single certificate April 2015.
    pub fn aa_us() -> Self {
        let q = |y, n| YearQuarter::new(y, n).unwrap();
        MergerEvent::new("aa-us", ("AA", "US"), q(2013, 1), q(2013, 4), q(2015, 2), "AA").unwrap()
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ua-co" => Some(Self::ua_co()),
            "aa-us" => Some(Self::aa_us()),
            _ => None,
        }
    }

    /// The code that disappears at the certificate.
    pub fn absorbed(&self) -> Carrier {
        if self.surviving == self.carrier_a {
            self.carrier_b
        } else {
            self.carrier_a
        }
    }

    /// Parses `key = value` lines with keys name, carrier_a, carrier_b,
    /// surviving_code, announce, approve, certificate (quarters as `2010Q2`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n as u64 + 1,
                msg: format!("expected key = value, got `{line}`"),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("event file is missing `{k}`")))
        };
        let quarter = |k: &str| -> Result<YearQuarter> {
            let v = get(k)?;
            v.parse()
                .map_err(|_| Error::Config(format!("`{k}` must look like 2010Q2, got `{v}`")))
        };
        for k in kv.keys() {
            if !matches!(
                k.as_str(),
                "name" | "carrier_a" | "carrier_b" | "surviving_code" | "announce" | "approve" | "certificate"
            ) {
                return Err(Error::Config(format!("unknown event key `{k}`")));
            }
        }
        MergerEvent::new(
            get("name")?,
            (get("carrier_a")?, get("carrier_b")?),
            quarter("announce")?,
            quarter("approve")?,
            quarter("certificate")?,
            get("surviving_code")?,
        )
    }

    pub fn to_text(&self) -> String {
        format!(
            "name = {}\ncarrier_a = {}\ncarrier_b = {}\nsurviving_code = {}\nannounce = {}\napprove = {}\ncertificate = {}\n",
            self.name, self.carrier_a, self.carrier_b, self.surviving, self.announce, self.approve, self.certificate
        )
    }
}

fn parse_carrier(s: &str) -> Result<Carrier> {
    Carrier::from_str(s.trim()).map_err(|_| Error::Config(format!("bad carrier code `{s}`")))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventDummies {
    pub annc: bool,
    pub appro: bool,
    pub cert: bool,
    pub either: bool,
    pub both: bool,
}

pub const EVENT_COLUMNS: [&str; 8] = [
    "annc",
    "annc_either",
    "annc_both",
    "appro",
    "appro_either",
    "appro_both",
    "cert",
    "cert_either",
];

impl EventDummies {
    /// Values for [`EVENT_COLUMNS`].
    pub fn columns(&self) -> [f64; 8] {
        let f = |b: bool| b as u8 as f64;
        [
            f(self.annc),
            f(self.annc && self.either),
            f(self.annc && self.both),
            f(self.appro),
            f(self.appro && self.either),
            f(self.appro && self.both),
            f(self.cert),
            f(self.cert && self.either),
        ]
    }
}

pub fn tag(period: YearQuarter, lo: Carrier, hi: Carrier, event: &MergerEvent) -> EventDummies {
    let merging = |c: Carrier| c == event.carrier_a || c == event.carrier_b;
    let n = merging(lo) as u8 + merging(hi) as u8;
    EventDummies {
        annc: event.announce <= period && period < event.approve,
        appro: event.approve <= period && period < event.certificate,
        cert: period >= event.certificate,
        either: n == 1,
        both: n == 2 && lo != hi,
    }
}

pub fn tag_observation(obs: &PairObservation, event: &MergerEvent) -> EventDummies {
    tag(obs.period, obs.carrier_lo, obs.carrier_hi, event)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmcMeasure {
    Ek,
    Cw,
    CwWgt,
}

impl MmcMeasure {
    pub fn column(&self) -> &'static str {
        match self {
            MmcMeasure::Ek => "mmc_ek_scaled",
            MmcMeasure::Cw => "mmc_cw",
            MmcMeasure::CwWgt => "mmc_cw_wgt",
        }
    }

    /// Directed columns stacked into [`Self::column`], if any.
    pub fn directed(&self) -> Option<(&'static str, &'static str)> {
        match self {
            MmcMeasure::Ek => None,
            MmcMeasure::Cw => Some(("mmc_cw_fwd", "mmc_cw_rev")),
            MmcMeasure::CwWgt => Some(("mmc_cw_wgt_fwd", "mmc_cw_wgt_rev")),
        }
    }
}

impl FromStr for MmcMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ek" => Ok(MmcMeasure::Ek),
            "cw" => Ok(MmcMeasure::Cw),
            "cw-wgt" | "cw_wgt" => Ok(MmcMeasure::CwWgt),
            _ => Err(Error::Config(format!("unknown contact measure `{s}` (ek, cw, cw-wgt)"))),
        }
    }
}

impl fmt::Display for MmcMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmcMeasure::Ek => "ek",
            MmcMeasure::Cw => "cw",
            MmcMeasure::CwWgt => "cw-wgt",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EventDesign {
    pub frame: Frame,
    pub spec: RegressionSpec,
    /// Post-certificate rows still carrying the absorbed code.
    pub dropped_absorbed: usize,
    /// Rows with `both` set inside the announcement or approval window.
    pub both_rows: usize,
}

/// Appends the eight event columns to the difference panel and returns the
/// regression spec: dp on the contact measure, nonstop, tp, cs, rs and the
/// event slots, with quarter and city-pair fixed effects.
pub fn build_event_design(rows: &[PairObservation], event: &MergerEvent, mmc: MmcMeasure) -> Result<EventDesign> {
    event.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    if !rows.iter().any(|r| r.period < event.announce) {
        return Err(Error::NoBaseline(event.announce));
    }
    let absorbed = event.absorbed();
    let kept: Vec<PairObservation> = rows
        .iter()
        .filter(|r| !(r.period >= event.certificate && r.involves(absorbed)))
        .copied()
        .collect();
    let dropped_absorbed = rows.len() - kept.len();
    if dropped_absorbed > 0 {
        log::warn!(
            "dropped {dropped_absorbed} post-certificate rows carrying the absorbed code {absorbed}"
        );
    }

    let mut cols: Vec<Vec<f64>> = (0..8).map(|_| Vec::with_capacity(kept.len())).collect();
    let mut both_rows = 0;
    for r in &kept {
        let d = tag_observation(r, event);
        assert!(!(d.cert && d.both), "certificate window row tagged as both merging carriers");
        both_rows += (d.both && (d.annc || d.appro)) as usize;
        for (c, v) in cols.iter_mut().zip(d.columns()) {
            c.push(v);
        }
    }
    let mut frame = pair_frame(&kept)?;
    for (name, c) in EVENT_COLUMNS.iter().zip(cols) {
        frame.push_num(name, c)?;
    }

    let mut covariates = vec![mmc.column(), "nonstop", "tp", "cs", "rs"];
    covariates.extend(EVENT_COLUMNS);
    let mut spec = RegressionSpec::new("dp", &covariates, &["quarter", "city_pair"]);
    spec.directed = mmc.directed().map(|(fwd, rev)| crate::hdfe::Directed {
        fwd: fwd.into(),
        rev: rev.into(),
        name: mmc.column().into(),
    });
    Ok(EventDesign {
        frame,
        spec,
        dropped_absorbed,
        both_rows,
    })
}

/// Sums reported with confidence intervals, by name.
pub const HYPOTHESES: [(&str, [&str; 2]); 5] = [
    ("theta11+theta12", ["annc", "annc_either"]),
    ("theta21+theta22", ["appro", "appro_either"]),
    ("theta31+theta32", ["cert", "cert_either"]),
    ("theta11+theta13", ["annc", "annc_both"]),
    ("theta21+theta23", ["appro", "appro_both"]),
];

#[derive(Clone, Debug)]
pub struct EventStudy {
    pub design: EventDesign,
    pub fit: FitResult,
    pub tests: Vec<(String, LinearCombination)>,
}

pub fn run_event_study(
    rows: &[PairObservation],
    event: &MergerEvent,
    mmc: MmcMeasure,
    se_kind: SeKind,
    level: f64,
) -> Result<EventStudy> {
    let mut design = build_event_design(rows, event, mmc)?;
    design.spec.se_kind = se_kind;
    let fit = fit_hdfe(&design.frame, &design.spec)?;
    let tests = hypothesis_tests(&fit, level)?;
    Ok(EventStudy { design, fit, tests })
}

/// Evaluates [`HYPOTHESES`]; a sum involving a dropped slot is skipped.
pub fn hypothesis_tests(fit: &FitResult, level: f64) -> Result<Vec<(String, LinearCombination)>> {
    let mut out = Vec::new();
    for (name, [a, b]) in HYPOTHESES {
        if fit.coef(a).is_none() || fit.coef(b).is_none() {
            log::warn!("hypothesis {name} skipped: slot not identified");
            continue;
        }
        out.push((name.to_string(), linear_combination_test(fit, &[(a, 1.0), (b, 1.0)], level)?));
    }
    Ok(out)
}

pub fn write_hypotheses<W: Write>(tests: &[(String, LinearCombination)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["hypothesis", "estimate", "se", "ci_lo", "ci_hi", "p"])?;
    for (name, t) in tests {
        wtr.write_record([
            name.clone(),
            fmt_num(t.estimate),
            fmt_num(t.se),
            fmt_num(t.ci_lo),
            fmt_num(t.ci_hi),
            fmt_num(t.p),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<hypotheses>", e))?;
    Ok(())
}
