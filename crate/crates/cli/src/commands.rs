use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmclab::events::{run_event_study, write_hypotheses, MergerEvent, MmcMeasure};
use mmclab::ingest::{ingest_paths, open_input, read_carrier_list, read_cells_path};
use mmclab::markets::{summarize as market_counts, write_summary};
use mmclab::mmc::{compute_all, compute_mmc_cw, write_series, EkMatrix};
use mmclab::panel::{
    build_pair_diff_panel, build_rigidity_panel, correlation_matrix, read_pair_panel, write_correlations,
    write_pair_panel, write_rigidity_panel, write_scatter_sample,
};
use mmclab::synth::{generate_panel, SynthConfig, TicketSynth};
use mmclab::{fit_hdfe, CpiTable, Error, Frame, IngestOptions, PairObservation, RegressionSpec, Result, YearQuarter};
use serde::Serialize;
use serde_json::Value;

use crate::{CorrArgs, EventArgs, FitArgs, IngestArgs, MeasureArg, MmcArgs, PanelArgs, SummarizeArgs, SynthArgs};

/// Files touched by one command, for the manifest.
#[derive(Default, Debug)]
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub stats: BTreeMap<String, Value>,
}

impl Run {
    pub fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|q| q == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    pub fn stat(&mut self, key: &str, v: impl Serialize) {
        self.stats.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    /// Creates `path` (and its directory), hands a buffered writer to `f`
    /// and records the file as an output.
    pub fn write(&mut self, path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}

/// Runs one subcommand and writes its manifest: `<dir>/manifest.json` for
/// directory outputs, `<file>.manifest.json` next to a single output file.
pub fn single<A: Serialize>(
    command: &str,
    args: &A,
    out: &Path,
    out_is_dir: bool,
    f: impl FnOnce(&mut Run) -> Result<()>,
) -> Result<()> {
    let mut run = Run::default();
    f(&mut run)?;
    let (root, path) = if out_is_dir {
        (out.to_path_buf(), out.join("manifest.json"))
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        (out.parent().unwrap_or(Path::new("")).to_path_buf(), out.with_file_name(name))
    };
    let config = serde_json::to_value(args).unwrap_or(Value::Null);
    crate::manifest::write(&path, command, config, &run, &root)
}

pub fn read_text(path: &Path, run: &mut Run) -> Result<String> {
    run.input(path);
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_quarter(s: &str) -> Result<YearQuarter> {
    s.parse().map_err(Error::Config)
}

fn load_cells(path: &Path, run: &mut Run) -> Result<Vec<mmclab::MarketCell>> {
    run.input(path);
    read_cells_path(path)
}

fn load_pairs(path: &Path, run: &mut Run) -> Result<Vec<PairObservation>> {
    run.input(path);
    read_pair_panel(open_input(path, false)?)
}

/// `cells.csv` -> `cells.summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.csv")
}

pub fn ingest(a: &IngestArgs, run: &mut Run) -> Result<()> {
    for t in &a.tickets {
        run.input(t);
    }
    run.input(&a.cpi);
    let cpi = CpiTable::read_path(&a.cpi, a.base_year)?;
    let mut opts = if a.carriers == "default" {
        IngestOptions::default()
    } else {
        let p = Path::new(&a.carriers);
        run.input(p);
        IngestOptions::with_carriers(read_carrier_list(open_input(p, false)?)?)
    };
    opts.filter_nominal = a.filter_nominal;
    opts.min_cell_passengers = a.min_pax;
    let (cells, summary) = ingest_paths(&a.tickets, a.gzip, &cpi, &opts)?;
    log::info!("ingest: {} rows read, {} cells", summary.rows_read, cells.len());
    run.write(&a.out, |w| mmclab::ingest::write_cells(&cells, w))?;
    run.write(&summary_path(&a.out), |w| summary.write_csv(w))?;
    run.stat("ingest", summary.counters().into_iter().collect::<BTreeMap<_, _>>());
    Ok(())
}

pub fn summarize(a: &SummarizeArgs, run: &mut Run) -> Result<()> {
    let cells = load_cells(&a.cells, run)?;
    let rows = market_counts(&cells);
    run.write(&a.out, |w| write_summary(&rows, w))
}

pub fn mmc(a: &MmcArgs, run: &mut Run) -> Result<()> {
    let quarter = a.quarter.as_deref().map(parse_quarter).transpose()?;
    if let Some(path) = &a.ek {
        if !matches!(a.measure, MeasureArg::Cw | MeasureArg::All) {
            return Err(Error::Config("only cw can be derived from an EK matrix".into()));
        }
        run.input(path);
        let ek = EkMatrix::read_csv(open_input(path, false)?)?;
        let (cw, excluded) = compute_mmc_cw(&ek);
        for x in &excluded {
            log::warn!("carrier {} left out of cw: {}", x.carrier, x.reason);
        }
        let name = quarter.map_or("cw.csv".to_string(), |q| format!("cw_{q}.csv"));
        return run.write(&a.out.join(name), |w| cw.write_csv(w));
    }
    let path = a.cells.as_ref().expect("clap requires --cells or --ek");
    let mut cells = load_cells(path, run)?;
    if let Some(q) = quarter {
        cells.retain(|c| c.period == q);
    }
    if cells.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mats = compute_all(&cells, a.weight.into());
    let want = |m: MeasureArg| a.measure == m || a.measure == MeasureArg::All;
    for (q, m) in &mats {
        if want(MeasureArg::Ek) {
            run.write(&a.out.join(format!("ek_{q}.csv")), |w| m.ek.write_csv(w))?;
        }
        if want(MeasureArg::Cw) {
            run.write(&a.out.join(format!("cw_{q}.csv")), |w| m.cw.write_csv(w))?;
        }
        if want(MeasureArg::CwWgt) {
            run.write(&a.out.join(format!("cw_wgt_{q}.csv")), |w| m.cw_weighted.write_csv(w))?;
        }
    }
    run.write(&a.out.join("series.csv"), |w| write_series(&mats, w))?;
    run.stat("quarters", mats.len());
    Ok(())
}

/// 2023Q2 when it is present, otherwise the last quarter.
pub fn default_pinned(quarters: impl DoubleEndedIterator<Item = YearQuarter> + Clone) -> Option<YearQuarter> {
    let fixture = YearQuarter::new(2023, 2).unwrap();
    if quarters.clone().any(|q| q == fixture) {
        Some(fixture)
    } else {
        quarters.last()
    }
}

pub fn panel(a: &PanelArgs, run: &mut Run) -> Result<()> {
    if a.min_quarters == 0 {
        return Err(Error::Config("min_quarters must be at least 1".into()));
    }
    let cells = load_cells(&a.cells, run)?;
    if cells.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mats = compute_all(&cells, a.weight.into());
    let pinned = match &a.pinned {
        Some(s) => parse_quarter(s)?,
        None => default_pinned(mats.keys().copied()).ok_or(Error::EmptyPanel)?,
    };
    let pm = mats
        .get(&pinned)
        .ok_or_else(|| Error::Config(format!("pinned quarter {pinned} has no cells")))?;
    let diff = build_pair_diff_panel(&cells, &mats)?;
    let (rig, stats) = build_rigidity_panel(&cells, pm, a.min_quarters);
    log::info!("panel: {} pair rows, {} rigidity rows, pinned {pinned}", diff.len(), rig.len());
    run.write(&a.out.join("panel_diff.csv"), |w| write_pair_panel(&diff, w))?;
    run.write(&a.out.join("panel_cv.csv"), |w| write_rigidity_panel(&rig, w))?;
    run.write(&a.out.join("panel_stats.csv"), |w| stats.write_csv(w))?;
    run.stat("pinned", pinned.to_string());
    run.stat("pair_rows", diff.len());
    run.stat("rigidity_rows", rig.len());
    Ok(())
}

pub fn corr(a: &CorrArgs, run: &mut Run) -> Result<()> {
    let rows = load_pairs(&a.panel, run)?;
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let m = correlation_matrix(&rows);
    run.write(&a.out.join("correlations.csv"), |w| write_correlations(&m, w))?;
    run.write(&a.out.join("scatter_sample.csv"), |w| write_scatter_sample(&rows, a.scatter_rows, w))
}

pub fn fit(a: &FitArgs, run: &mut Run) -> Result<()> {
    let mut spec = RegressionSpec::parse(&read_text(&a.spec, run)?)?;
    if let Some(se) = a.se {
        spec.se_kind = se.into();
    }
    run.input(&a.panel);
    let mut frame = Frame::read_csv(open_input(&a.panel, false)?)?;
    frame.derive_keys()?;
    let fit = fit_hdfe(&frame, &spec)?;
    if !fit.converged {
        log::warn!("demeaning stopped after {} iterations without converging", fit.iterations);
    }
    for d in &fit.dropped {
        log::warn!("dropped unidentified covariate `{d}`");
    }
    run.stat("n_obs", fit.n_obs);
    run.stat("converged", fit.converged);
    run.write(&a.out, |w| fit.write_csv(w))
}

pub fn load_event(name: &str, run: &mut Run) -> Result<MergerEvent> {
    match MergerEvent::preset(name) {
        Some(e) => Ok(e),
        None => MergerEvent::parse(&read_text(Path::new(name), run)?),
    }
}

pub fn event_study(a: &EventArgs, run: &mut Run) -> Result<()> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {}", a.level)));
    }
    let event = load_event(&a.event, run)?;
    let mmc: MmcMeasure = a.mmc.parse()?;
    let rows = load_pairs(&a.panel, run)?;
    let st = run_event_study(&rows, &event, mmc, a.se.into(), a.level)?;
    if st.design.dropped_absorbed > 0 {
        log::info!(
            "dropped {} post-certificate rows carrying {}",
            st.design.dropped_absorbed,
            event.absorbed()
        );
    }
    run.write(&a.out.join("event.txt"), |w| {
        w.write_all(event.to_text().as_bytes()).map_err(|e| Error::io("event.txt", e))
    })?;
    run.write(&a.out.join("fit.csv"), |w| st.fit.write_csv(w))?;
    run.write(&a.out.join("hypotheses.csv"), |w| write_hypotheses(&st.tests, w))?;
    run.stat("dropped_absorbed", st.design.dropped_absorbed);
    run.stat("both_rows", st.design.both_rows);
    run.stat("n_obs", st.fit.n_obs);
    Ok(())
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let cfg = SynthConfig::from_toml(&read_text(&a.config, run)?)?;
    let p = generate_panel(&cfg)?;
    run.write(&a.out.join("cells.csv"), |w| mmclab::ingest::write_cells(&p.cells, w))?;
    run.write(&a.out.join("panel_diff.csv"), |w| write_pair_panel(&p.pairs, w))?;
    run.write(&a.out.join("truth.csv"), |w| p.truth.write_csv(w))?;
    if a.tickets > 0 {
        let ts = TicketSynth::new(a.ticket_seed.unwrap_or(cfg.seed), a.tickets);
        run.write(&a.out.join("tickets.csv"), |w| {
            std::io::copy(&mut ts.stream(), w).map(drop).map_err(|e| Error::io("tickets.csv", e))
        })?;
        run.write(&a.out.join("cpi.csv"), |w| {
            w.write_all(ts.cpi_csv().as_bytes()).map_err(|e| Error::io("cpi.csv", e))
        })?;
    }
    run.stat("cells", p.cells.len());
    run.stat("pair_rows", p.pairs.len());
    Ok(())
}
