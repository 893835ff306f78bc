//! Config-driven runs of several stages into one output directory.
//!
//! Layout under the output directory:
//!
//! ```text
//! synth/        cells.csv, panel_diff.csv, truth.csv[, tickets.csv, cpi.csv]
//! cells.csv     ingested cells, with cells.summary.csv
//! markets.csv
//! mmc/          per-quarter matrices and series.csv
//! panel/        panel_diff.csv, panel_cv.csv, panel_stats.csv
//! corr/         correlations.csv, scatter_sample.csv
//! fit/<name>.csv
//! event/<name>/ event.txt, fit.csv, hypotheses.csv
//! manifest.json
//! ```

use std::path::{Path, PathBuf};

use mmclab::events::MergerEvent;
use mmclab::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::commands::{self, Run};
use crate::{
    CorrArgs, EventArgs, FitArgs, IngestArgs, MeasureArg, MmcArgs, PanelArgs, PipelineArgs, SeArg, SummarizeArgs,
    SynthArgs, WeightArg,
};

#[derive(Deserialize, Serialize, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Synth,
    Ingest,
    Markets,
    Mmc,
    Panel,
    Corr,
    Fit,
    EventStudy,
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct SynthStage {
    pub config: PathBuf,
    #[serde(default)]
    pub tickets: u64,
    pub ticket_seed: Option<u64>,
}

fn default_base_year() -> i32 {
    2017
}

fn default_min_pax() -> u64 {
    30
}

fn default_min_quarters() -> usize {
    3
}

fn default_scatter_rows() -> usize {
    5000
}

fn default_level() -> f64 {
    0.95
}

fn default_mmc() -> String {
    "ek".into()
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct IngestStage {
    /// Empty means the tickets written by the synth stage.
    #[serde(default)]
    pub tickets: Vec<PathBuf>,
    pub cpi: Option<PathBuf>,
    pub carriers: Option<String>,
    #[serde(default = "default_base_year")]
    pub base_year: i32,
    #[serde(default)]
    pub filter_nominal: bool,
    #[serde(default = "default_min_pax")]
    pub min_pax: u64,
    #[serde(default)]
    pub gzip: bool,
}

#[derive(Deserialize, Serialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct MmcStage {
    #[serde(default)]
    pub measure: MeasureArg,
    #[serde(default)]
    pub weight: WeightArg,
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct PanelStage {
    pub pinned: Option<String>,
    #[serde(default = "default_min_quarters")]
    pub min_quarters: usize,
    #[serde(default)]
    pub weight: WeightArg,
}

impl Default for PanelStage {
    fn default() -> Self {
        PanelStage {
            pinned: None,
            min_quarters: default_min_quarters(),
            weight: WeightArg::default(),
        }
    }
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct CorrStage {
    #[serde(default = "default_scatter_rows")]
    pub scatter_rows: usize,
}

impl Default for CorrStage {
    fn default() -> Self {
        CorrStage {
            scatter_rows: default_scatter_rows(),
        }
    }
}

/// `panel` is `pair` (the panel stage), `synth` (the planted panel) or a
/// file; unset picks the panel stage when it runs, else the synth panel.
#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct FitStage {
    pub name: String,
    pub spec: PathBuf,
    pub panel: Option<String>,
    pub se: Option<SeArg>,
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct EventStage {
    pub name: String,
    pub event: String,
    #[serde(default = "default_mmc")]
    pub mmc: String,
    #[serde(default)]
    pub se: SeArg,
    #[serde(default = "default_level")]
    pub level: f64,
    pub panel: Option<String>,
}

#[derive(Deserialize, Serialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    /// Stages to run; empty means every configured stage. Stages always run
    /// in pipeline order.
    #[serde(default)]
    pub stages: Vec<Stage>,
    pub threads: Option<u16>,
    pub log: Option<String>,
    /// Existing cells file, used when neither ingest nor synth runs.
    pub cells: Option<PathBuf>,
    pub synth: Option<SynthStage>,
    pub ingest: Option<IngestStage>,
    #[serde(default)]
    pub mmc: MmcStage,
    #[serde(default)]
    pub panel: PanelStage,
    #[serde(default)]
    pub corr: CorrStage,
    #[serde(default)]
    pub fit: Vec<FitStage>,
    #[serde(default)]
    pub event_study: Vec<EventStage>,
    /// Directory of the run file; relative paths are resolved against it.
    #[serde(skip)]
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    fn stage_list(&self) -> Vec<Stage> {
        let mut s = if self.stages.is_empty() {
            let mut s = Vec::new();
            if self.synth.is_some() {
                s.push(Stage::Synth);
            }
            if self.ingest.is_some() {
                s.push(Stage::Ingest);
            }
            if !s.is_empty() || self.cells.is_some() {
                s.extend([Stage::Markets, Stage::Mmc, Stage::Panel, Stage::Corr]);
            }
            if !self.fit.is_empty() {
                s.push(Stage::Fit);
            }
            if !self.event_study.is_empty() {
                s.push(Stage::EventStudy);
            }
            s
        } else {
            self.stages.clone()
        };
        s.sort();
        s.dedup();
        s
    }
}

fn must_exist(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist")))
    }
}

/// Where each stage reads from and writes to.
struct Plan {
    stages: Vec<Stage>,
    out: PathBuf,
    cells: Option<PathBuf>,
}

impl Plan {
    fn has(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }

    fn synth_dir(&self) -> PathBuf {
        self.out.join("synth")
    }

    fn panel_for(&self, cfg: &RunConfig, choice: Option<&str>) -> Result<PathBuf> {
        let pair = self.out.join("panel").join("panel_diff.csv");
        let synth = self.synth_dir().join("panel_diff.csv");
        match choice {
            Some("pair") if self.has(Stage::Panel) => Ok(pair),
            Some("synth") if self.has(Stage::Synth) => Ok(synth),
            Some(c @ ("pair" | "synth")) => Err(Error::Config(format!("panel `{c}` needs its stage in this run"))),
            Some(path) => Ok(cfg.resolve(Path::new(path))),
            None if self.has(Stage::Panel) => Ok(pair),
            None if self.has(Stage::Synth) => Ok(synth),
            None => Err(Error::Config("no panel source: run the panel or synth stage, or name a file".into())),
        }
    }
}

/// Checks that every referenced file exists or is produced earlier in the
/// run, before anything is written.
fn plan(cfg: &RunConfig, out: PathBuf) -> Result<Plan> {
    let stages = cfg.stage_list();
    if stages.is_empty() {
        return Err(Error::Config("nothing to run".into()));
    }
    let has = |s| stages.contains(&s);
    if has(Stage::Synth) {
        let s = cfg.synth.as_ref().ok_or_else(|| Error::Config("stage synth needs a [synth] table".into()))?;
        must_exist(&cfg.resolve(&s.config))?;
    }
    if has(Stage::Ingest) {
        let i = cfg.ingest.as_ref().ok_or_else(|| Error::Config("stage ingest needs an [ingest] table".into()))?;
        let synth_tickets = has(Stage::Synth) && cfg.synth.as_ref().is_some_and(|s| s.tickets > 0);
        if i.tickets.is_empty() && !synth_tickets {
            return Err(Error::Config("ingest has no tickets and synth writes none".into()));
        }
        for t in &i.tickets {
            must_exist(&cfg.resolve(t))?;
        }
        match &i.cpi {
            Some(c) => must_exist(&cfg.resolve(c))?,
            None if synth_tickets => {}
            None => return Err(Error::Config("ingest needs a cpi file".into())),
        }
        if let Some(c) = i.carriers.as_deref().filter(|c| *c != "default") {
            must_exist(&cfg.resolve(Path::new(c)))?;
        }
    }
    let cells = if has(Stage::Ingest) {
        Some(out.join("cells.csv"))
    } else if has(Stage::Synth) {
        Some(out.join("synth").join("cells.csv"))
    } else {
        cfg.cells.as_ref().map(|c| cfg.resolve(c))
    };
    let needs_cells = [Stage::Markets, Stage::Mmc, Stage::Panel].into_iter().any(has);
    match &cells {
        None if needs_cells => return Err(Error::Config("no cells source for markets/mmc/panel".into())),
        Some(c) if needs_cells && !has(Stage::Ingest) && !has(Stage::Synth) => must_exist(c)?,
        _ => {}
    }
    let p = Plan { stages, out, cells };
    if p.has(Stage::Corr) {
        p.panel_for(cfg, None)?;
    }
    let external = |x: &Path| if x.starts_with(&p.out) { Ok(()) } else { must_exist(x) };
    if p.has(Stage::Fit) {
        for f in &cfg.fit {
            must_exist(&cfg.resolve(&f.spec))?;
            external(&p.panel_for(cfg, f.panel.as_deref())?)?;
        }
    }
    if p.has(Stage::EventStudy) {
        for e in &cfg.event_study {
            if MergerEvent::preset(&e.event).is_none() {
                must_exist(&cfg.resolve(Path::new(&e.event)))?;
            }
            external(&p.panel_for(cfg, e.panel.as_deref())?)?;
        }
    }
    Ok(p)
}

pub fn run(args: &PipelineArgs, cfg: RunConfig) -> Result<()> {
    let out = match (&args.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => return Err(Error::Config("no output directory: set `out` or pass --out".into())),
    };
    let p = plan(&cfg, out)?;
    let mut run = Run::default();
    run.input(&args.config);
    for &stage in &p.stages {
        log::info!("stage {stage:?}");
        match stage {
            Stage::Synth => {
                let s = cfg.synth.as_ref().expect("checked in plan");
                let a = SynthArgs {
                    config: cfg.resolve(&s.config),
                    tickets: s.tickets,
                    ticket_seed: s.ticket_seed,
                    out: p.synth_dir(),
                };
                commands::synth(&a, &mut run)?;
            }
            Stage::Ingest => {
                let i = cfg.ingest.as_ref().expect("checked in plan");
                let tickets = if i.tickets.is_empty() {
                    vec![p.synth_dir().join("tickets.csv")]
                } else {
                    i.tickets.iter().map(|t| cfg.resolve(t)).collect()
                };
                let a = IngestArgs {
                    tickets,
                    cpi: i.cpi.as_ref().map_or_else(|| p.synth_dir().join("cpi.csv"), |c| cfg.resolve(c)),
                    carriers: match i.carriers.as_deref() {
                        None | Some("default") => "default".into(),
                        Some(c) => cfg.resolve(Path::new(c)).to_string_lossy().into_owned(),
                    },
                    base_year: i.base_year,
                    filter_nominal: i.filter_nominal,
                    min_pax: i.min_pax,
                    gzip: i.gzip,
                    out: p.out.join("cells.csv"),
                };
                commands::ingest(&a, &mut run)?;
            }
            Stage::Markets => {
                let a = SummarizeArgs {
                    cells: p.cells.clone().expect("checked in plan"),
                    out: p.out.join("markets.csv"),
                };
                commands::summarize(&a, &mut run)?;
            }
            Stage::Mmc => {
                let a = MmcArgs {
                    cells: p.cells.clone(),
                    ek: None,
                    measure: cfg.mmc.measure,
                    weight: cfg.mmc.weight,
                    quarter: None,
                    out: p.out.join("mmc"),
                };
                commands::mmc(&a, &mut run)?;
            }
            Stage::Panel => {
                let a = PanelArgs {
                    cells: p.cells.clone().expect("checked in plan"),
                    pinned: cfg.panel.pinned.clone(),
                    min_quarters: cfg.panel.min_quarters,
                    weight: cfg.panel.weight,
                    out: p.out.join("panel"),
                };
                commands::panel(&a, &mut run)?;
            }
            Stage::Corr => {
                let a = CorrArgs {
                    panel: p.panel_for(&cfg, None)?,
                    scatter_rows: cfg.corr.scatter_rows,
                    out: p.out.join("corr"),
                };
                commands::corr(&a, &mut run)?;
            }
            Stage::Fit => {
                for f in &cfg.fit {
                    let a = FitArgs {
                        panel: p.panel_for(&cfg, f.panel.as_deref())?,
                        spec: cfg.resolve(&f.spec),
                        se: f.se,
                        out: p.out.join("fit").join(format!("{}.csv", f.name)),
                    };
                    commands::fit(&a, &mut run)?;
                }
            }
            Stage::EventStudy => {
                for e in &cfg.event_study {
                    let event = if MergerEvent::preset(&e.event).is_some() {
                        e.event.clone()
                    } else {
                        cfg.resolve(Path::new(&e.event)).to_string_lossy().into_owned()
                    };
                    let a = EventArgs {
                        panel: p.panel_for(&cfg, e.panel.as_deref())?,
                        event,
                        mmc: e.mmc.clone(),
                        se: e.se,
                        level: e.level,
                        out: p.out.join("event").join(&e.name),
                    };
                    commands::event_study(&a, &mut run)?;
                }
            }
        }
    }
    // Files produced by earlier stages are outputs, not inputs.
    run.inputs.retain(|i| !i.starts_with(&p.out));
    let mut resolved = cfg.clone();
    resolved.stages = p.stages.clone();
    let config = serde_json::to_value(&resolved).unwrap_or_default();
    crate::manifest::write(&p.out.join("manifest.json"), "pipeline", config, &run, &p.out)
}
