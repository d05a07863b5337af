//! Command-line front end: single runs, the three sweep families, and
//! plot-ready tables from result CSVs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;

use crate::error::{ConfigError, MetricsError};
use crate::metrics::{self, export_csv, export_mean_csv, mean_record, RunRecord, Table};
use crate::scenario::{expand_sweep, parse_scenario, Scenario, SweepRun};
use crate::sim::{self, SimOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Sensor counts swept by families 1 and 2.
pub const N_STA_GRID: [usize; 10] = [1, 5, 10, 15, 20, 25, 30, 40, 50, 60];
/// UAV speeds (m/s) swept by family 3.
pub const SPEED_GRID: [f64; 9] = [1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
/// Per-sensor offered loads (bit/s) swept by family 3.
pub const RATE_GRID: [f64; 3] = [0.5e6, 3e6, 6e6];

#[derive(Debug, Parser)]
#[command(
    name = "uavsim",
    version,
    about = "UAV access point / sensor grid 802.11 DCF simulator"
)]
pub struct Args {
    /// Scenario file (`key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one scenario key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Run a sweep family instead of a single scenario.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub family: Option<u8>,
    /// Seeds per sweep point.
    #[arg(long, default_value_t = 5)]
    pub replications: u32,
    /// CSV file for a single run (appended), directory for a family.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the event trace of a single run to this file.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write the per-exchange MAC trace of a single run to this file.
    #[arg(long, value_name = "PATH")]
    pub mac_trace: Option<PathBuf>,
    /// Write the UAV trajectory of a single run to this file.
    #[arg(long, value_name = "PATH")]
    pub mobility_trace: Option<PathBuf>,
    /// Turn a result CSV into `<x> <y>` tables, one per series value.
    #[arg(long, value_name = "CSV")]
    pub plotdata: Option<PathBuf>,
    #[arg(long, default_value = "n_sta", requires = "plotdata")]
    pub x: String,
    #[arg(long, default_value = "access", requires = "plotdata")]
    pub series: String,
    #[arg(long, default_value = "throughput_bps", requires = "plotdata")]
    pub y: String,
    /// Suppress per-run progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Base scenario from an optional file plus overrides, validated.
pub fn load_scenario<S: AsRef<str>>(
    config: Option<&Path>,
    overrides: &[S],
) -> Result<Scenario, CliError> {
    let mut sc = match config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_scenario(&text)?
        }
        None => Scenario::default(),
    };
    sc.apply_overrides(overrides)?;
    sc.validate()?;
    Ok(sc)
}

/// Trace destinations for a single run.
#[derive(Debug, Clone, Default)]
pub struct TracePaths {
    pub events: Option<PathBuf>,
    pub mac: Option<PathBuf>,
    pub mobility: Option<PathBuf>,
}

/// Runs one scenario and appends its row to `out`.
pub fn run_single(sc: &Scenario, out: &Path, traces: &TracePaths) -> Result<RunRecord, CliError> {
    let opts = SimOptions {
        event_trace: traces.events.is_some(),
        mac_trace: traces.mac.is_some(),
        mobility_trace: traces.mobility.is_some(),
        ..SimOptions::default()
    };
    let report = sim::run(sc, &opts);
    let record = report.record("run");
    for (path, body) in [
        (&traces.events, &report.event_trace),
        (&traces.mac, &report.mac_trace),
        (&traces.mobility, &report.mobility_trace),
    ] {
        if let (Some(p), Some(b)) = (path, body) {
            fs::write(p, b).map_err(|e| io_err(p, e))?;
        }
    }
    metrics::append_csv(out, std::slice::from_ref(&record))?;
    Ok(record)
}

/// One sweep point of a family: its id and its replications.
#[derive(Debug, Clone)]
pub struct FamilyPoint {
    pub id: String,
    pub runs: Vec<SweepRun>,
}

fn with(base: &Scenario, key: &str, value: &str) -> Result<Scenario, ConfigError> {
    let mut sc = base.clone();
    sc.set(key, value)?;
    Ok(sc)
}

/// Outer key and values, inner key and values, and fixed settings.
type FamilyAxes = (
    &'static str,
    Vec<String>,
    &'static str,
    Vec<String>,
    Vec<(&'static str, &'static str)>,
);

/// Sweep points of `family` in canonical order (outer axis, then inner).
pub fn family_points(
    family: u8,
    base: &Scenario,
    replications: u32,
) -> Result<Vec<FamilyPoint>, CliError> {
    let n_grid: Vec<String> = N_STA_GRID.iter().map(|n| n.to_string()).collect();
    let (outer_key, outer, inner_key, inner, fixed): FamilyAxes = match family {
        1 => (
            "rts_threshold",
            vec!["0".into(), "65535".into()],
            "n_sta",
            n_grid,
            vec![
                ("uav_mobility", "gauss_markov"),
                ("uav_mean_speed", "50"),
                ("traffic_rate_per_sta", "6e6"),
            ],
        ),
        2 => (
            "uav_mobility",
            vec!["gauss_markov".into(), "random_direction_2d".into()],
            "n_sta",
            n_grid,
            vec![
                ("rts_threshold", "0"),
                ("uav_mean_speed", "50"),
                ("traffic_rate_per_sta", "6e6"),
            ],
        ),
        3 => (
            "traffic_rate_per_sta",
            RATE_GRID.iter().map(|r| r.to_string()).collect(),
            "uav_mean_speed",
            SPEED_GRID.iter().map(|v| v.to_string()).collect(),
            vec![
                ("n_sta", "25"),
                ("uav_mobility", "gauss_markov"),
                ("rts_threshold", "0"),
            ],
        ),
        f => return Err(CliError::Config(format!("unknown family {f}"))),
    };
    let mut fam_base = base.clone();
    for (k, v) in fixed {
        fam_base = with(&fam_base, k, v)?;
    }
    let mut points = Vec::new();
    for o in &outer {
        let sc = with(&fam_base, outer_key, o)?;
        let runs = expand_sweep(&sc, inner_key, &inner, replications)?;
        for chunk in runs.chunks(replications.max(1) as usize) {
            points.push(FamilyPoint {
                id: format!("f{family}-{:03}", points.len()),
                runs: chunk.to_vec(),
            });
        }
    }
    Ok(points)
}

/// Runs every point of `family` (in parallel) and writes
/// `family<N>_runs.csv` and `family<N>_mean.csv` into `out_dir`.
pub fn run_scenario_family(
    family: u8,
    base: &Scenario,
    replications: u32,
    out_dir: &Path,
    quiet: bool,
) -> Result<(Vec<RunRecord>, Vec<metrics::MeanRecord>), CliError> {
    if replications == 0 {
        return Err(CliError::Config("replications must be at least 1".into()));
    }
    let points = family_points(family, base, replications)?;
    let jobs: Vec<(&str, &Scenario)> = points
        .iter()
        .flat_map(|p| p.runs.iter().map(move |r| (p.id.as_str(), &r.scenario)))
        .collect();
    let total = jobs.len();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|(id, sc)| {
            let rec = sim::run(sc, &SimOptions::default()).record(id);
            if !quiet {
                eprintln!(
                    "{id} seed={} n_sta={} throughput={:.0} bit/s",
                    rec.seed, rec.n_sta, rec.throughput_bps
                );
            }
            rec
        })
        .collect();
    debug_assert_eq!(records.len(), total);
    let means: Vec<_> = records
        .chunks(replications as usize)
        .map(mean_record)
        .collect();
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let runs_path = out_dir.join(format!("family{family}_runs.csv"));
    let mean_path = out_dir.join(format!("family{family}_mean.csv"));
    fs::write(&runs_path, export_csv(&records)).map_err(|e| io_err(&runs_path, e))?;
    fs::write(&mean_path, export_mean_csv(&means)).map_err(|e| io_err(&mean_path, e))?;
    Ok((records, means))
}

/// `# series <name>` blocks of `<x> <y>` lines; empty CSV gives empty output.
pub fn emit_plotdata(csv: &Path, x: &str, series: &str, y: &str) -> Result<String, CliError> {
    let text = fs::read_to_string(csv).map_err(|e| io_err(csv, e))?;
    let table =
        Table::parse(&text).map_err(|m| CliError::Config(format!("{}: {m}", csv.display())))?;
    let tables = metrics::plot_tables(&table, x, series, y)?;
    let mut out = String::new();
    for (name, pts) in &tables {
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        out.push_str(&format!("# {series}={name}\n"));
        out.push_str(&metrics::render_plot_table(pts));
    }
    Ok(out)
}

/// Dispatches parsed arguments; returns the process exit code.
pub fn execute(args: &Args) -> i32 {
    match dispatch(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("uavsim: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: &Args) -> Result<(), CliError> {
    if let Some(csv) = &args.plotdata {
        let text = emit_plotdata(csv, &args.x, &args.series, &args.y)?;
        return match &args.out {
            Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let base = load_scenario(args.config.as_deref(), &args.set)?;
    match args.family {
        Some(f) => {
            let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            run_scenario_family(f, &base, args.replications, &dir, args.quiet)?;
            if !args.quiet {
                eprintln!("wrote {}", dir.display());
            }
        }
        None => {
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("results.csv"));
            let traces = TracePaths {
                events: args.trace.clone(),
                mac: args.mac_trace.clone(),
                mobility: args.mobility_trace.clone(),
            };
            let rec = run_single(&base, &out, &traces)?;
            if !args.quiet {
                println!("{}", metrics::csv_header());
                println!("{}", rec.csv_fields().join(","));
            }
        }
    }
    Ok(())
}
