mod commands;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmclab::Error;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "mmc-lab", version, about = "Multimarket contact panels and fixed-effects fare regressions")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "MMC_LAB_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    /// Log filter, e.g. `info` or `mmclab=debug`.
    #[arg(long, global = true, env = "MMC_LAB_LOG")]
    log: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deflate, filter and aggregate ticket records into market cells.
    Ingest(IngestArgs),
    /// Market-level summaries.
    Markets {
        #[command(subcommand)]
        command: MarketsCommand,
    },
    /// Contact matrices per quarter.
    Mmc(MmcArgs),
    /// Pairwise price-difference and rigidity panels.
    Panel(PanelArgs),
    /// Correlations among the regressors of a pair panel.
    Corr(CorrArgs),
    /// Fixed-effects regression from a plain-text spec.
    Fit(FitArgs),
    /// Merger event-study regression and window hypothesis tests.
    EventStudy(EventArgs),
    /// Synthetic cells and panels with planted coefficients.
    Synth(SynthArgs),
    /// Run several stages from a TOML run file.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand, Debug)]
enum MarketsCommand {
    /// Per-quarter market, nonstop-market and city-pair counts.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IngestArgs {
    /// Ticket CSV files (optionally gzip-compressed).
    #[arg(long, required = true, num_args = 1..)]
    pub tickets: Vec<PathBuf>,
    /// CPI table with columns year[,quarter],index.
    #[arg(long)]
    pub cpi: PathBuf,
    /// Carrier allow-list file, or `default` for the built-in list.
    #[arg(long, default_value = "default")]
    pub carriers: String,
    #[arg(long, default_value_t = 2017)]
    pub base_year: i32,
    /// Apply fare bounds to nominal fares instead of deflated ones.
    #[arg(long)]
    pub filter_nominal: bool,
    /// Minimum passengers per market-carrier-quarter cell.
    #[arg(long, default_value_t = 30)]
    pub min_pax: u64,
    /// Treat every ticket file as gzip, whatever its extension.
    #[arg(long)]
    pub gzip: bool,
    /// Cells CSV; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, serde::Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureArg {
    Ek,
    Cw,
    CwWgt,
    #[default]
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, serde::Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    #[default]
    Pax,
    Revenue,
}

impl From<WeightArg> for mmclab::Weight {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Pax => mmclab::Weight::Passengers,
            WeightArg::Revenue => mmclab::Weight::Revenue,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, serde::Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SeArg {
    #[default]
    Robust,
    Classical,
}

impl From<SeArg> for mmclab::SeKind {
    fn from(s: SeArg) -> Self {
        match s {
            SeArg::Robust => mmclab::SeKind::Robust,
            SeArg::Classical => mmclab::SeKind::Classical,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MmcArgs {
    /// Market cells CSV.
    #[arg(long, required_unless_present = "ek", conflicts_with = "ek")]
    pub cells: Option<PathBuf>,
    /// An existing EK matrix CSV; only the CW measure is derived from it.
    #[arg(long)]
    pub ek: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value_t)]
    pub weight: WeightArg,
    /// Restrict to one quarter, e.g. 2023Q2.
    #[arg(long)]
    pub quarter: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PanelArgs {
    #[arg(long)]
    pub cells: PathBuf,
    /// Quarter whose contact matrices feed the rigidity panel
    /// (default 2023Q2 when present, else the last quarter).
    #[arg(long)]
    pub pinned: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub min_quarters: usize,
    #[arg(long, value_enum, default_value_t)]
    pub weight: WeightArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CorrArgs {
    /// Pair panel CSV (`panel_diff.csv`).
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub scatter_rows: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub panel: PathBuf,
    /// Regression spec: `key = value` lines naming response, covariates,
    /// fe, se, tol, max_iter and optionally directed.
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the `se` line of the regression file.
    #[arg(long, value_enum)]
    pub se: Option<SeArg>,
    /// Result CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EventArgs {
    #[arg(long)]
    pub panel: PathBuf,
    /// `ua-co`, `aa-us`, or a file of `key = value` event dates.
    #[arg(long)]
    pub event: String,
    #[arg(long, default_value = "ek", value_parser = ["ek", "cw", "cw-wgt"])]
    pub mmc: String,
    #[arg(long, value_enum, default_value_t)]
    pub se: SeArg,
    /// Confidence level of the hypothesis intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    /// Generator config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Also write this many raw ticket rows plus a matching CPI table.
    #[arg(long, default_value_t = 0)]
    pub tickets: u64,
    /// Seed for the ticket rows (default: the config seed).
    #[arg(long)]
    pub ticket_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PipelineArgs {
    /// Run file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the run file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        Error::Csv(_) | Error::Schema(_) | Error::Parse { .. } | Error::UnknownColumn(_) | Error::MissingCpi(_) => 4,
        Error::EmptyPanel
        | Error::TooFewObservations { .. }
        | Error::NoIdentifiedCovariates
        | Error::NoBaseline(_)
        | Error::DegenerateConfig(_)
        | Error::UnknownCoefficient(_) => 5,
        Error::Config(_) => 6,
    }
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn init(threads: Option<u16>, log: Option<&str>) {
    let filter = log.unwrap_or("warn");
    let _ = env_logger::Builder::new().parse_filters(filter).format_timestamp(None).try_init();
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
}

fn dispatch(cli: Cli) -> mmclab::Result<()> {
    if let Command::Pipeline(a) = &cli.command {
        let cfg = pipeline::RunConfig::load(&a.config)?;
        init(
            cli.threads.or(cfg.threads),
            cli.log.as_deref().or(cfg.log.as_deref()),
        );
        return pipeline::run(a, cfg);
    }
    init(cli.threads, cli.log.as_deref());
    match cli.command {
        Command::Ingest(a) => commands::single("ingest", &a, &a.out, false, |r| commands::ingest(&a, r)),
        Command::Markets {
            command: MarketsCommand::Summarize(a),
        } => commands::single("markets summarize", &a, &a.out, false, |r| commands::summarize(&a, r)),
        Command::Mmc(a) => commands::single("mmc", &a, &a.out, true, |r| commands::mmc(&a, r)),
        Command::Panel(a) => commands::single("panel", &a, &a.out, true, |r| commands::panel(&a, r)),
        Command::Corr(a) => commands::single("corr", &a, &a.out, true, |r| commands::corr(&a, r)),
        Command::Fit(a) => commands::single("fit", &a, &a.out, false, |r| commands::fit(&a, r)),
        Command::EventStudy(a) => commands::single("event-study", &a, &a.out, true, |r| commands::event_study(&a, r)),
        Command::Synth(a) => commands::single("synth", &a, &a.out, true, |r| commands::synth(&a, r)),
        Command::Pipeline(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    let msg = e.render().to_string();
                    report("usage", msg.lines().next().unwrap_or("usage error").trim_start_matches("error: "));
                    ExitCode::from(2)
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::from(exit_code(&e))
        }
    }
}
