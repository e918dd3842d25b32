//! `wattline`: meter experiment phases through a smart plug and turn the
//! energy into carbon figures and reports.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wattline_core::telemetry::{DEFAULT_FAILURE_LIMIT, DEFAULT_INTERVAL_MS};

#[derive(Parser, Debug)]
#[command(name = "wattline", version, about = "Measure, account and report the energy and carbon of experiments")]
pub struct Cli {
    /// Session directory (samples.jsonl, markers.jsonl, session.json).
    #[arg(long, global = true, env = "WATTLINE_SESSION_DIR")]
    pub session_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PlugArgs {
    /// Plug base URL, e.g. http://10.0.0.7 or 127.0.0.1:8080.
    #[arg(long)]
    pub endpoint: String,
    /// JSON field mapping for a vendor status payload; canonical schema if omitted.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Polling interval in milliseconds (at least 100).
    #[arg(long, default_value_t = DEFAULT_INTERVAL_MS)]
    pub interval_ms: u64,
    /// Consecutive failed polls tolerated before giving up.
    #[arg(long, default_value_t = DEFAULT_FAILURE_LIMIT)]
    pub failure_limit: u32,
}

#[derive(Args, Debug, Clone)]
pub struct FactorArgs {
    /// Emission-factor CSV (region,year,gco2e_per_kwh,source); bundled table if omitted.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long, default_value = "world")]
    pub region: String,
    #[arg(long, default_value_t = 2023)]
    pub year: i32,
    /// Literal factor in gCO₂e/kWh; overrides --region/--year.
    #[arg(long)]
    pub factor: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Serve a simulated plug for a trace profile until interrupted.
    Simulate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Keep the profile's start time instead of anchoring a zero start to now.
        #[arg(long)]
        no_anchor: bool,
    },
    /// Append samples from the plug to the session until stopped.
    Meter {
        #[command(flatten)]
        plug: PlugArgs,
        /// Stop after this many seconds; runs until interrupted otherwise.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Clock-offset probes taken before metering; 0 skips synchronisation.
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
    /// Measure idle power. Run it with no experiments or background
    /// applications on the machine; that is the operator's responsibility.
    Baseline {
        #[command(flatten)]
        plug: PlugArgs,
        #[arg(long, default_value_t = 120.0)]
        window_s: f64,
    },
    /// Record a phase marker stamped with host time.
    Mark {
        label: String,
        /// begin or end
        kind: String,
        /// Use this host timestamp instead of now.
        #[arg(long)]
        ts_ms: Option<i64>,
    },
    /// Estimate and store the plug's clock offset.
    Sync {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
    /// Merge markers from an experiment log (JSON lines of ts_ms, label, kind).
    IngestMarkers { file: PathBuf },
    /// Attach key=value metadata (hardware, location, checklist.N answers).
    Annotate {
        #[arg(required = true)]
        pairs: Vec<String>,
    },
    /// Compute per-phase energies and write analysis.json.
    Analyze {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use marker times as device times.
        #[arg(long)]
        no_offset_correction: bool,
        /// Do not subtract the idle baseline.
        #[arg(long)]
        gross_only: bool,
    },
    /// Convert energy to CO₂e, with what-ifs, equivalents and offset plans.
    Carbon {
        #[arg(long, conflicts_with = "analysis")]
        kwh: Option<f64>,
        /// analysis.json whose total energy is converted.
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[command(flatten)]
        factor: FactorArgs,
        /// KWH@REGION[:YEAR] usage line; repeatable, replaces --kwh.
        #[arg(long = "usage", conflicts_with_all = ["kwh", "analysis"])]
        usages: Vec<String>,
        /// REGION[:YEAR] to compare the same energy against; repeatable.
        #[arg(long = "whatif")]
        whatif: Vec<String>,
        #[arg(long)]
        equivalents: bool,
        #[arg(long, requires = "equivalents")]
        flight_kg: Option<f64>,
        #[arg(long, requires = "equivalents")]
        tree_kg_per_year: Option<f64>,
        #[arg(long)]
        offset_trees: Option<u32>,
        #[arg(long, default_value_t = wattline_core::carbon::DEFAULT_TREE_KG_PER_YEAR)]
        offset_tree_kg: f64,
        #[arg(long, requires = "era_later_g")]
        era_earlier_g: Option<f64>,
        #[arg(long, requires = "era_earlier_g")]
        era_later_g: Option<f64>,
        /// Place the first factor among generation technologies.
        #[arg(long)]
        lifecycle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extrapolate per-run energy to pipeline, paper and event scale.
    Estimate {
        #[arg(long)]
        models: u64,
        #[arg(long)]
        datasets: u64,
        #[arg(long)]
        configs: u64,
        #[arg(long, required_unless_present = "analysis", conflicts_with = "analysis")]
        per_run_kwh: Option<f64>,
        /// analysis.json of one measured run; its phase total is the per-run energy.
        #[arg(long)]
        analysis: Option<PathBuf>,
        /// Only count phases with this label.
        #[arg(long, requires = "analysis")]
        label: Option<String>,
        #[arg(long, default_value_t = wattline_core::footprint::DEFAULT_OVERHEAD)]
        overhead: f64,
        #[command(flatten)]
        factor: FactorArgs,
        #[arg(long)]
        submissions: u64,
        /// Comma-separated overheads for a sensitivity table.
        #[arg(long, value_delimiter = ',')]
        sensitivity_overheads: Vec<f64>,
        /// Comma-separated factors (g/kWh) for a sensitivity table.
        #[arg(long, value_delimiter = ',')]
        sensitivity_factors: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render analysis, carbon and estimate files into a report.
    Report {
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[arg(long)]
        carbon: Option<PathBuf>,
        #[arg(long)]
        estimate: Option<PathBuf>,
        /// md, json or csv
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generation time recorded in the report; defaults to SOURCE_DATE_EPOCH if set.
        #[arg(long)]
        generated_at_ms: Option<i64>,
    },
    /// Print bundled reference tables.
    Reference {
        /// factors, lifecycle, stats or hardware
        table: String,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", exit::describe(&e));
            ExitCode::from(exit::code_for(&e))
        }
    }
}
