//! The `tmspc` command line: `train`, `monitor`, `diagnose`, `simulate` and
//! `export`.
//!
//! Exit status is 0 on success (including runs that detect faults), 1 for
//! data or numerical errors, and 2 for invalid arguments.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, FixedOffset, NaiveDate};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnose::{contributions, detect_events, Diagnosis};
use crate::error::Error;
use crate::ingest::{
    fill_and_assemble, grid_day, parse_log, parse_offset, read_header, read_log_dir, split_by_day,
    DayGrid, LogSchema, TrainingTensor,
};
use crate::monitor::{monitor_series, observations_from_grid, MonitorPoint, Observation};
use crate::persist::{export_jsonl, load_from_path, save_to_path};
use crate::plot::{contribution_chart, t2_chart};
use crate::preprocess::{slice_stats, EPSILON};
use crate::synthgen::{generate_days, inject_fault, write_day_csv, FaultSpec, ScenarioSpec};
use crate::train::{train, TpcaModel, TrainConfig};
use crate::SECONDS_PER_DAY;

/// `print!` that exits quietly when stdout is closed (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {
        stdout_or_exit(std::io::stdout().lock().write_fmt(format_args!($($arg)*)))
    };
}

macro_rules! outln {
    () => {
        out!("\n")
    };
    ($($arg:tt)*) => {{
        out!($($arg)*);
        out!("\n");
    }};
}

fn stdout_or_exit(r: std::io::Result<()>) {
    if let Err(e) = r {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing to stdout: {e}");
        std::process::exit(1);
    }
}

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "TVSPC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tmspc", version, about = "Time-varying multivariate statistical process control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a time-varying PCA model from normal-operation days.
    Train(TrainArgs),
    /// Score one day of logs against a model.
    Monitor(MonitorArgs),
    /// Contribution analysis for one second or for every fault event.
    Diagnose(DiagnoseArgs),
    /// Write synthetic daily logs, optionally with injected faults.
    Simulate(SimulateArgs),
    /// Dump a model as JSON lines for inspection.
    Export(ExportArgs),
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie strictly between 0 and 1"))
    }
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie in (0, 1]"))
    }
}

fn parse_tz(s: &str) -> Result<FixedOffset, String> {
    parse_offset(s).map_err(|e| e.to_string())
}

fn parse_fault(s: &str) -> Result<FaultSpec, String> {
    s.parse::<FaultSpec>().map_err(|e| e.to_string())
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| format!("{s:?} is not a YYYY-MM-DD date"))
}

/// A date or an inclusive `start..end` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaySpec {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

fn parse_day_spec(s: &str) -> Result<DaySpec, String> {
    match s.split_once("..") {
        Some((a, b)) => {
            let (first, last) = (parse_date(a)?, parse_date(b)?);
            if last < first {
                return Err(format!("empty day range {s:?}"));
            }
            Ok(DaySpec { first, last })
        }
        None => {
            let d = parse_date(s)?;
            Ok(DaySpec { first: d, last: d })
        }
    }
}

fn expand_days(specs: &[DaySpec]) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    for s in specs {
        let mut d = s.first;
        while d <= s.last {
            out.push(d);
            d += Duration::days(1);
        }
    }
    out
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of CSV logs.
    #[arg(long)]
    pub logs: PathBuf,
    /// Normal-operation days to train on: dates or inclusive ranges,
    /// comma separated (2019-06-01,2019-06-03..2019-06-12).
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_day_spec)]
    pub days: Vec<DaySpec>,
    /// Output model file (.tvspc).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "0.95", value_parser = parse_fraction)]
    pub confidence: f64,
    /// Minimum explained variance every slice must reach.
    #[arg(long, default_value = "0.75", value_parser = parse_threshold)]
    pub threshold: f64,
    /// Fix the number of retained components instead of selecting it.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rank: Option<u32>,
    /// Variable names overriding the log headers (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub vars: Option<Vec<String>>,
    /// Fixed UTC offset defining the local day.
    #[arg(long, default_value = "+00:00", value_parser = parse_tz, allow_hyphen_values = true)]
    pub tz_offset: FixedOffset,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One day of logs.
    #[arg(long)]
    pub log: PathBuf,
    /// Monitoring CSV (k,t2,ucl,fault,score_1..score_R).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional T² chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, default_value = "+00:00", value_parser = parse_tz, allow_hyphen_values = true)]
    pub tz_offset: FixedOffset,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Diagnose the observation at this second of day.
    #[arg(long, conflicts_with = "events")]
    pub at: Option<usize>,
    /// Group fault seconds into events (default when --at is absent).
    #[arg(long)]
    pub events: bool,
    /// Seconds of in-control data tolerated inside one event.
    #[arg(long, default_value_t = 0)]
    pub gap: usize,
    /// Contribution bar chart (for --events: at the highest peak).
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Diagnosis CSV (k,t2,root_cause,C_1..C_J).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "+00:00", value_parser = parse_tz, allow_hyphen_values = true)]
    pub tz_offset: FixedOffset,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file; the built-in solar PV scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory for the daily CSV logs.
    #[arg(long)]
    pub out: PathBuf,
    /// Fault on the first verification day: kind:var:start:dur:mag.
    #[arg(long, value_parser = parse_fault)]
    pub fault: Vec<FaultSpec>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the effective scenario file and exit.
    #[arg(long)]
    pub print_scenario: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn io_context(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("{}: {e}", path.display()))
}

fn configure_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Monitor(a) => cmd_monitor(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let days = expand_days(&a.days);
    let schema = a.vars.clone().map(LogSchema::overriding);
    let (schema, by_day) = read_log_dir(&a.logs, schema, a.tz_offset)?;

    let mut grids = Vec::with_capacity(days.len());
    for day in &days {
        let records = by_day.get(day).ok_or(Error::MissingDay(*day))?;
        grids.push(grid_day(records, *day, a.tz_offset));
    }
    let filled: usize = grids.iter().map(DayGrid::missing_count).sum();
    let tensor: TrainingTensor = fill_and_assemble(grids, schema.names.clone())?;
    let config = TrainConfig {
        confidence: a.confidence,
        threshold: a.threshold,
        epsilon: EPSILON,
        rank: a.rank.map(|r| r as usize),
    };
    let model = train(&tensor, &config)?;
    let bytes = save_to_path(&model, &a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;

    outln!("training days (I): {}", model.n_days);
    outln!("variables (J): {} [{}]", model.n_vars, model.variable_names.join(", "));
    outln!("slices (K): {}", model.n_slices);
    if filled > 0 {
        outln!("gap-filled cells: {filled}");
    }
    let inactive: usize = model
        .slices
        .iter()
        .map(|s| s.stats.n_vars() - s.n_active())
        .sum();
    if inactive > 0 {
        outln!("inactive (zero-variance) variable-slices: {inactive}");
    }
    outln!("retained components (R): {}", model.rank);
    let explained: Vec<String> = model
        .min_explained()
        .iter()
        .enumerate()
        .map(|(r, e)| format!("{}: {:.4}", r + 1, e))
        .collect();
    outln!("min explained variance by component: {}", explained.join("  "));
    outln!(
        "control limit (UCL, {}% confidence): {:.4}",
        model.confidence * 100.0,
        model.ucl
    );
    outln!("model written to {} ({bytes} bytes)", a.out.display());
    Ok(())
}

struct LoadedDay {
    observations: Vec<Observation>,
    skipped: usize,
}

/// Reads one day of logs and turns every fully observed second into an
/// observation. `Ok(None)` means the log has no data rows.
fn load_day(model: &TpcaModel, log: &Path, offset: FixedOffset) -> CliResult<Option<LoadedDay>> {
    if model.n_slices != SECONDS_PER_DAY {
        return Err(Failure::Data(format!(
            "model has {} slices; daily logs need {SECONDS_PER_DAY}",
            model.n_slices
        )));
    }
    let bytes = fs::read(log).map_err(io_context(log))?;
    let header = read_header(&bytes)?;
    if header.len() != model.n_vars {
        return Err(Failure::Data(format!(
            "log has {} variables, model expects {}",
            header.len(),
            model.n_vars
        )));
    }
    if header != model.variable_names {
        eprintln!(
            "warning: log header {:?} differs from model variables {:?}; matching by position",
            header, model.variable_names
        );
    }
    let schema = LogSchema::overriding(model.variable_names.clone()).with_offset(offset);
    let records = match parse_log(&bytes, &schema) {
        Ok(r) => r,
        Err(Error::EmptyInput) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let days = split_by_day(records, offset);
    if days.len() > 1 {
        let list: Vec<String> = days.keys().map(|d| d.to_string()).collect();
        return Err(Failure::Data(format!(
            "log spans several days ({}); monitor one day at a time",
            list.join(", ")
        )));
    }
    let (day, records) = days.into_iter().next().expect("non-empty log");
    let grid = grid_day(&records, day, offset);
    let observations = observations_from_grid(&grid);
    let present = (0..grid.n_slices())
        .filter(|&k| (0..grid.n_vars()).any(|j| !grid.is_missing(k, j)))
        .count();
    Ok(Some(LoadedDay {
        skipped: present - observations.len(),
        observations,
    }))
}

fn write_monitor_csv(path: &Path, rank: usize, points: &[MonitorPoint]) -> CliResult {
    let mut w = BufWriter::new(File::create(path).map_err(io_context(path))?);
    write!(w, "k,t2,ucl,fault")?;
    for r in 1..=rank {
        write!(w, ",score_{r}")?;
    }
    writeln!(w)?;
    for p in points {
        write!(w, "{},{},{},{}", p.k, p.t2, p.ucl, p.fault)?;
        for s in &p.scores {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_diagnosis_csv(path: &Path, names: &[String], diags: &[&Diagnosis]) -> CliResult {
    let mut w = BufWriter::new(File::create(path).map_err(io_context(path))?);
    write!(w, "k,t2,root_cause")?;
    for j in 1..=names.len() {
        write!(w, ",C_{j}")?;
    }
    writeln!(w)?;
    for d in diags {
        write!(w, "{},{},{}", d.k, d.t2, names[d.root_cause])?;
        for c in &d.contributions {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(io_context(path))
}

fn cmd_monitor(a: MonitorArgs) -> CliResult {
    let model = load_from_path(&a.model)?;
    let Some(day) = load_day(&model, &a.log, a.tz_offset)? else {
        eprintln!("warning: {} has no data rows", a.log.display());
        write_monitor_csv(&a.out, model.rank, &[])?;
        outln!("observations: 0");
        outln!("faults: 0");
        return Ok(());
    };
    if day.skipped > 0 {
        eprintln!("warning: skipped {} seconds with missing values", day.skipped);
    }
    let points = monitor_series(&model, &day.observations)?;
    write_monitor_csv(&a.out, model.rank, &points)?;
    if let Some(svg) = &a.svg {
        let title = format!("Hotelling T² — {}", a.log.display());
        write_text(svg, &t2_chart(&points, model.ucl, &title))?;
    }

    let faults = points.iter().filter(|p| p.fault).count();
    let frac = if points.is_empty() {
        0.0
    } else {
        faults as f64 / points.len() as f64
    };
    outln!("observations: {}", points.len());
    outln!("UCL: {:.4}", model.ucl);
    outln!("faults: {faults} ({:.2}%)", 100.0 * frac);
    if let Some(first) = points.iter().find(|p| p.fault) {
        outln!("first fault at k={} (T² = {:.3})", first.k, first.t2);
    }
    let flagged = points.iter().filter(|p| p.any_inactive_deviation()).count();
    if flagged > 0 {
        outln!("seconds with deviations on inactive variables: {flagged}");
    }
    Ok(())
}

fn print_diagnosis(model: &TpcaModel, d: &Diagnosis) {
    let state = if d.t2 > d.ucl { "OUT OF CONTROL" } else { "in control" };
    outln!("k = {}  T² = {:.4}  UCL = {:.4}  ({state})", d.k, d.t2, d.ucl);
    out!("{:<5} {:<20} {:>14}", "rank", "variable", "contribution");
    for r in 1..=model.rank {
        out!(" {:>12}", format!("score_{r}"));
    }
    outln!();
    for (pos, &j) in d.ranking.iter().enumerate() {
        out!("{:<5} {:<20} {:>14.6}", pos + 1, model.variable_names[j], d.contributions[j]);
        for r in 0..model.rank {
            out!(" {:>12.6}", d.variable_scores[(j, r)]);
        }
        outln!();
    }
    let sum: f64 = d.contributions.iter().sum();
    let cmp = if sum > d.ucl { ">" } else { "<=" };
    outln!("sum of contributions = {sum:.4} {cmp} UCL = {:.4}", d.ucl);
    outln!("root cause: {}", model.variable_names[d.root_cause]);
}

fn cmd_diagnose(a: DiagnoseArgs) -> CliResult {
    let model = load_from_path(&a.model)?;
    if let Some(k) = a.at {
        if k >= model.n_slices {
            return Err(Failure::Usage(format!(
                "--at {k} out of range (model covers 0..{})",
                model.n_slices
            )));
        }
    }
    let day = load_day(&model, &a.log, a.tz_offset)?;
    let observations = day.map(|d| d.observations).unwrap_or_default();

    if let Some(k) = a.at {
        let obs = observations
            .iter()
            .find(|o| o.k == k)
            .ok_or_else(|| Failure::Data(format!("no complete observation at k = {k}")))?;
        let d = contributions(&model, obs)?;
        print_diagnosis(&model, &d);
        if let Some(svg) = &a.svg {
            let title = format!("Contributions at k = {k}");
            write_text(svg, &contribution_chart(&d, &model.variable_names, &title))?;
        }
        if let Some(out) = &a.out {
            write_diagnosis_csv(out, &model.variable_names, &[&d])?;
        }
        return Ok(());
    }

    let points = monitor_series(&model, &observations)?;
    let diagnoses: Vec<Diagnosis> = observations
        .par_iter()
        .map(|o| contributions(&model, o))
        .collect::<Result<_, Error>>()?;
    let events = detect_events(&points, &diagnoses, a.gap);
    outln!("{} events", events.len());
    for (i, ev) in events.iter().enumerate() {
        outln!(
            "event {}: k {}..{} ({} fault s), peak T² {:.3} at k {}, root cause {} (share {:.2})",
            i + 1,
            ev.start_k,
            ev.end_k,
            ev.fault_seconds,
            ev.peak_t2,
            ev.peak_k,
            model.variable_names[ev.root_cause],
            ev.root_cause_share
        );
    }
    if let Some(out) = &a.out {
        let faulty: Vec<&Diagnosis> = points
            .iter()
            .zip(&diagnoses)
            .filter(|(p, _)| p.fault)
            .map(|(_, d)| d)
            .collect();
        write_diagnosis_csv(out, &model.variable_names, &faulty)?;
    }
    if let Some(svg) = &a.svg {
        match events.iter().max_by(|x, y| x.peak_t2.total_cmp(&y.peak_t2)) {
            Some(ev) => {
                let d = diagnoses
                    .iter()
                    .find(|d| d.k == ev.peak_k)
                    .expect("peak has a diagnosis");
                let title = format!("Contributions at k = {} (event peak)", ev.peak_k);
                write_text(svg, &contribution_chart(d, &model.variable_names, &title))?;
            }
            None => eprintln!("warning: no events, {} not written", svg.display()),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestFault<'a> {
    #[serde(flatten)]
    fault: &'a FaultSpec,
    variable_name: &'a str,
    /// Exclusive end of the fault window.
    end_k: usize,
}

#[derive(Serialize)]
struct ManifestDay<'a> {
    date: String,
    file: String,
    role: &'static str,
    faults: Vec<ManifestFault<'a>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    n_slices: usize,
    variables: Vec<String>,
    days: Vec<ManifestDay<'a>>,
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let mut spec = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            ScenarioSpec::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => ScenarioSpec::solar_pv(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if a.print_scenario {
        out!("{}", spec.to_text());
        return Ok(());
    }
    if spec.train_days < 1 {
        return Err(Failure::Usage("scenario needs train_days >= 1".into()));
    }
    if !a.fault.is_empty() && spec.verify_days == 0 {
        return Err(Failure::Usage("--fault needs a scenario with verify_days >= 1".into()));
    }
    for f in &a.fault {
        if f.variable >= spec.n_vars() || f.duration == 0 || f.start_k + f.duration > SECONDS_PER_DAY {
            return Err(Failure::Usage(format!(
                "fault {f:?} outside {} variables × {SECONDS_PER_DAY} seconds",
                spec.n_vars()
            )));
        }
    }

    fs::create_dir_all(&a.out).map_err(io_context(&a.out))?;
    let k_len = SECONDS_PER_DAY;
    let mut days = generate_days(&spec, 0..spec.total_days(), k_len);

    if !a.fault.is_empty() {
        let train_days = TrainingTensor::new(days[..spec.train_days].to_vec(), spec.variable_names());
        let noc_std: Vec<Vec<f64>> = match train_days {
            Ok(t) => {
                let per_slice: Vec<Vec<f64>> = (0..k_len)
                    .into_par_iter()
                    .map(|k| {
                        slice_stats(k, &t.slice(k), EPSILON)
                            .map(|s| s.std)
                            .unwrap_or_else(|_| vec![1.0; spec.n_vars()])
                    })
                    .collect();
                (0..spec.n_vars())
                    .map(|j| per_slice.iter().map(|s| s[j]).collect())
                    .collect()
            }
            // A single training day has no spread; fall back to unit std.
            Err(_) => vec![vec![1.0; k_len]; spec.n_vars()],
        };
        let target = spec.train_days;
        for f in &a.fault {
            days[target] = inject_fault(&days[target], f, &noc_std[f.variable])?;
        }
    }

    let names = spec.variable_names();
    days.par_iter()
        .map(|d| -> CliResult {
            let path = a.out.join(format!("{}.csv", d.day.format("%Y-%m-%d")));
            let file = File::create(&path).map_err(io_context(&path))?;
            let mut w = BufWriter::new(file);
            write_day_csv(d, &names, &mut w).map_err(io_context(&path))?;
            w.flush().map_err(io_context(&path))?;
            Ok(())
        })
        .collect::<CliResult<Vec<()>>>()?;

    let manifest = Manifest {
        seed: spec.seed,
        n_slices: k_len,
        variables: names.clone(),
        days: days
            .iter()
            .enumerate()
            .map(|(i, d)| ManifestDay {
                date: d.day.format("%Y-%m-%d").to_string(),
                file: format!("{}.csv", d.day.format("%Y-%m-%d")),
                role: if i < spec.train_days { "train" } else { "verify" },
                faults: if i == spec.train_days {
                    a.fault
                        .iter()
                        .map(|f| ManifestFault {
                            fault: f,
                            variable_name: &names[f.variable],
                            end_k: f.start_k + f.duration,
                        })
                        .collect()
                } else {
                    Vec::new()
                },
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Data(e.to_string()))?;
    write_text(&a.out.join("manifest.json"), &json)?;
    outln!("{json}");
    Ok(())
}

fn cmd_export(a: ExportArgs) -> CliResult {
    let model = load_from_path(&a.model)?;
    let file = File::create(&a.out).map_err(io_context(&a.out))?;
    export_jsonl(&model, BufWriter::new(file))?;
    outln!("exported {} slices to {}", model.n_slices, a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_specs() {
        let d = parse_day_spec("2019-06-01..2019-06-03").unwrap();
        assert_eq!(expand_days(&[d]).len(), 3);
        assert!(parse_day_spec("2019-06-03..2019-06-01").is_err());
        assert!(parse_day_spec("June 1").is_err());
    }

    #[test]
    fn fraction_bounds() {
        assert!(parse_fraction("1.5").is_err());
        assert!(parse_fraction("0").is_err());
        assert_eq!(parse_fraction("0.95").unwrap(), 0.95);
        assert!(parse_threshold("1").is_ok());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
