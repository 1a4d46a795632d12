//! Command-line front end: `simulate`, `detect`, `evaluate`, `compare`.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input or config,
//! 3 unreadable or corrupt cube, 4 no target present, 5 recording id
//! mismatch between events and truth.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::detection::{EventList, Method};
use crate::error::Error;
use crate::evaluation::{compare_methods, evaluate, EvalReport};
use crate::io;
use crate::pipeline::{run_detection, Diagnostics, Methods};
use crate::scene_sim::{synthesize_cube, ScenePlan, TruthRecord};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CORRUPT_CUBE: i32 = 3;
pub const EXIT_NO_TARGET: i32 = 4;
pub const EXIT_ID_MISMATCH: i32 = 5;

pub const CUBE_FILE: &str = "cube.rdc";
pub const TRUTH_FILE: &str = "truth.json";
pub const TRUTH_EVENTS_FILE: &str = "truth_events.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const COMPARISON_FILE: &str = "comparison.json";

pub fn events_file(m: Method) -> String {
    format!("events_{m}.csv")
}

pub fn report_file(m: Method) -> String {
    format!("report_{m}.json")
}

pub fn windows_file(m: Method) -> String {
    format!("windows_{m}.csv")
}

#[derive(Debug, Parser)]
#[command(name = "apnea", version, about = "Radar-based sleep apnea detection")]
pub struct Cli {
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a cube and its truth record from a scene plan.
    Simulate(SimulateArgs),
    /// Detect apnea-hypopnea events in a cube.
    Detect(DetectArgs),
    /// Score event files against a truth record.
    Evaluate(EvaluateArgs),
    /// Detect with both methods and evaluate them side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene plan (JSON).
    pub scene: PathBuf,
    /// Overrides the scene's `rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Em,
    Abm,
    Both,
}

impl MethodArg {
    fn methods(self) -> Methods {
        match self {
            MethodArg::Em => Methods::EM,
            MethodArg::Abm => Methods::ABM,
            MethodArg::Both => Methods::BOTH,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input cube (.rdc).
    pub cube: PathBuf,
    #[arg(long, value_enum, default_value = "em")]
    pub method: MethodArg,
    /// Truth record supplying sleep intervals; the whole recording counts as
    /// sleep without it.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Event CSV files (one per method).
    #[arg(required = true)]
    pub events: Vec<PathBuf>,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub cube: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_) | Error::Config(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) => EXIT_INVALID,
            Error::NoTarget => EXIT_NO_TARGET,
            Error::RecordingMismatch { .. } => EXIT_ID_MISMATCH,
            _ => EXIT_FAILURE,
        };
        CliError { code, message: e.to_string() }
    }
}

fn with_context(code: i32, what: impl fmt::Display) -> impl FnOnce(Error) -> CliError {
    move |e| CliError { code, message: format!("{what}: {e}") }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(with_context(EXIT_INVALID, "config")),
        None => Ok(RunConfig::default()),
    }
}

fn out_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError {
        code: EXIT_FAILURE,
        message: format!("cannot create {}: {e}", path.display()),
    })
}

fn load_truth(path: &Path) -> CliResult<TruthRecord> {
    io::read_json(path).map_err(with_context(EXIT_INVALID, path.display()))
}

pub fn simulate(args: &SimulateArgs, cfg: &RunConfig) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.scene)
        .map_err(|e| CliError { code: EXIT_INVALID, message: format!("{}: {e}", args.scene.display()) })?;
    let mut plan: ScenePlan = serde_json::from_str(&text)
        .map_err(|e| CliError { code: EXIT_INVALID, message: format!("{}: {e}", args.scene.display()) })?;
    if let Some(seed) = args.seed {
        plan.rng_seed = seed;
    }
    let (cube, mut truth) =
        synthesize_cube(&plan, &cfg.radar).map_err(with_context(EXIT_INVALID, args.scene.display()))?;
    out_dir(&args.out)?;
    let cube_path = args.out.join(CUBE_FILE);
    io::save_rdc(&cube_path, &cube)?;
    truth.recording_id = Some(io::file_sha256(&cube_path)?);
    io::write_json(&args.out.join(TRUTH_FILE), &truth)?;
    io::write_truth_events_csv(BufWriter::new(File::create(args.out.join(TRUTH_EVENTS_FILE)).map_err(Error::from)?), &truth)?;
    log::info!("wrote {} slow-time samples to {}", cube.n_slow, cube_path.display());
    Ok(())
}

fn detect_into(cube_path: &Path, truth: Option<&TruthRecord>, methods: Methods, cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let cube = io::load_rdc(cube_path).map_err(with_context(EXIT_CORRUPT_CUBE, cube_path.display()))?;
    let id = io::file_sha256(cube_path)?;
    if let Some(t) = truth {
        if let Some(tid) = &t.recording_id {
            if *tid != id {
                return Err(Error::RecordingMismatch { events: id, truth: tid.clone() }.into());
            }
        }
    }
    let sleep = truth.map(|t| t.sleep_intervals.as_slice());
    let mut det = run_detection(cube, sleep, &cfg.pipeline, methods)?;
    det.diagnostics.recording_id = Some(id);
    out_dir(out)?;
    for m in [Method::Em, Method::Abm] {
        if let Some(ev) = det.events(m) {
            io::save_events_csv(&out.join(events_file(m)), ev)?;
            log::info!("{m}: {} events", ev.len());
        }
    }
    io::write_json(&out.join(DIAGNOSTICS_FILE), &det.diagnostics)?;
    if methods.abm && det.abm.is_none() {
        let why = det.diagnostics.abm.as_ref().and_then(|a| a.error.clone()).unwrap_or_default();
        return Err(CliError { code: EXIT_FAILURE, message: format!("ABM produced no events file: {why}") });
    }
    Ok(())
}

pub fn detect(args: &DetectArgs, cfg: &RunConfig) -> CliResult<()> {
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    detect_into(&args.cube, truth.as_ref(), args.method.methods(), cfg, &args.out)
}

/// Method of an events file: from its rows, else from its name.
fn infer_method(path: &Path, events: &EventList) -> Method {
    match events.events.first() {
        Some(e) => e.method,
        None if path.file_name().is_some_and(|n| n.to_string_lossy().contains("abm")) => Method::Abm,
        None => Method::Em,
    }
}

fn check_recording(events_path: &Path, truth: &TruthRecord) -> CliResult<()> {
    let diag_path = events_path.with_file_name(DIAGNOSTICS_FILE);
    if !diag_path.exists() {
        return Ok(());
    }
    let diag: Diagnostics = io::read_json(&diag_path).map_err(with_context(EXIT_INVALID, diag_path.display()))?;
    if let (Some(ev), Some(tr)) = (&diag.recording_id, &truth.recording_id) {
        if ev != tr {
            return Err(Error::RecordingMismatch { events: ev.clone(), truth: tr.clone() }.into());
        }
    }
    Ok(())
}

fn write_report(out: &Path, r: &EvalReport) -> CliResult<()> {
    io::write_json(&out.join(report_file(r.method)), r)?;
    let w = BufWriter::new(File::create(out.join(windows_file(r.method))).map_err(Error::from)?);
    io::write_window_counts_csv(w, &r.window_counts)?;
    Ok(())
}

pub fn evaluate_files(events: &[PathBuf], truth_path: &Path, cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let truth = load_truth(truth_path)?;
    let mut lists: Vec<(Method, EventList)> = Vec::new();
    for p in events {
        let list = io::load_events_csv(p).map_err(with_context(EXIT_INVALID, p.display()))?;
        check_recording(p, &truth)?;
        let m = infer_method(p, &list);
        if lists.iter().any(|(k, _)| *k == m) {
            return Err(CliError { code: EXIT_INVALID, message: format!("two event files for method {m}") });
        }
        lists.push((m, list));
    }
    out_dir(out)?;
    let window = cfg.pipeline.count_window_s;
    let find = |m: Method| lists.iter().find(|(k, _)| *k == m).map(|(_, l)| l);
    match (find(Method::Em), find(Method::Abm)) {
        (Some(em), Some(abm)) => {
            let c = compare_methods(&truth, em, abm, window)?;
            write_report(out, &c.em)?;
            write_report(out, &c.abm)?;
            io::write_json(&out.join(COMPARISON_FILE), &c)?;
            log::info!("RMS error em {:.3}, abm {:.3}", c.em.rms_error, c.abm.rms_error);
        }
        _ => {
            for (m, l) in &lists {
                let r = evaluate(&truth, l, *m, window)?;
                log::info!("{m}: AHI {:.2} vs truth {:.2}", r.ahi_est, r.ahi_true);
                write_report(out, &r)?;
            }
        }
    }
    Ok(())
}

pub fn compare(args: &CompareArgs, cfg: &RunConfig) -> CliResult<()> {
    let truth = load_truth(&args.truth)?;
    detect_into(&args.cube, Some(&truth), Methods::BOTH, cfg, &args.out)?;
    let files: Vec<PathBuf> = [Method::Em, Method::Abm].iter().map(|&m| args.out.join(events_file(m))).collect();
    evaluate_files(&files, &args.truth, cfg, &args.out)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => simulate(a, &cfg),
        Command::Detect(a) => detect(a, &cfg),
        Command::Evaluate(a) => evaluate_files(&a.events, &a.truth, &cfg, &a.out),
        Command::Compare(a) => compare(a, &cfg),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
