//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, Figure};
use crate::error::Error;
use crate::experiment::{self, Cell, PlanOverrides, ResultsTable, SweepPlan, RESULTS_FILE};
use crate::optim::OptimizerKind;
use crate::theory;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optscale", version, about = "Optimizer-dependent scaling laws in random-feature regression")]
pub struct Cli {
    /// 0 is silent; 1 prints one line per finished cell; 2 also prints per-run failures.
    #[arg(long, global = true, default_value_t = 0)]
    pub verbosity: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a sweep and write results.csv plus manifest.toml.
    Run(RunArgs),
    /// Render fitted tables from a results file.
    Report(ReportArgs),
    /// Evaluate the effective-capacity claims on idealized spectra.
    TheoryCheck(TheoryArgs),
    /// Estimate the spectral exponent of a measured eigenvalue file.
    Diagnose(DiagnoseArgs),
    /// Write per-panel CSV data for one figure.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// One of main, robustness_D5000, robustness_b2, reduced.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML plan whose keys override the preset (main if no preset is given).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the plan size and exit without running.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Alpha,
    R2,
    Delta,
    Multiplier,
    Gaps,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// results.csv, or a directory containing it.
    pub results: PathBuf,
    #[arg(long, value_enum)]
    pub which: Which,
    /// Smallest N entering the power-law fits.
    #[arg(long, default_value_t = 200)]
    pub n_min: usize,
    /// Directory for the machine-readable copy of the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 1.5, 2.0])]
    pub s_grid: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Add a flat spectrum (labelled s = 0) to the grid.
    #[arg(long)]
    pub flat: bool,
    /// Directory for theory.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Plain text file with one eigenvalue per line.
    pub eigenvalues: PathBuf,
    /// 1-based inclusive index range `lo:hi` of the sorted eigenvalues to fit.
    #[arg(long, value_parser = parse_range)]
    pub range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureArg {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Fig1 => Figure::LossCurves,
            FigureArg::Fig2 => Figure::AlphaVsS,
            FigureArg::Fig3 => Figure::Multipliers,
            FigureArg::Fig4 => Figure::Gaps,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// results.csv, or a directory containing it.
    pub results: PathBuf,
    #[arg(long, value_enum)]
    pub figure: FigureArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_min: usize,
}

fn parse_range(text: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{text}`"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo == 0 || lo >= hi {
        return Err(format!("range `{text}` must satisfy 1 ≤ lo < hi"));
    }
    Ok((lo, hi))
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownPreset(_) => EXIT_USAGE,
        Error::NumericFailure { .. }
        | Error::DegenerateSpectrum(_)
        | Error::DivergentMode { .. }
        | Error::Divergence { .. } => EXIT_NUMERIC,
        Error::InvalidInput(_)
        | Error::DegenerateTarget
        | Error::InsufficientData { .. }
        | Error::InvalidLoss { .. }
        | Error::Schema { .. }
        | Error::Io { .. } => EXIT_DATA,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn io_fail(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: format!("writing output: {e}"),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<O: Write, E: Write>(args: impl IntoIterator<Item = OsString>, out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let text = e.to_string();
                    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
                    let _ = writeln!(err, "{line}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message.replace('\n', " "));
            f.code
        }
    }
}

fn dispatch<O: Write, E: Write>(cli: &Cli, out: &mut O, err: &mut E) -> CmdResult {
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.verbosity, out, err),
        Command::Report(a) => cmd_report(a, out),
        Command::TheoryCheck(a) => cmd_theory_check(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::PlotData(a) => cmd_plot_data(a, out),
    }
}

/// Resolves the preset and plan-file overrides into a validated plan.
pub fn resolve_plan(preset: Option<&str>, plan: Option<&Path>, seed: Option<u64>) -> Result<SweepPlan, Failure> {
    if preset.is_none() && plan.is_none() {
        return Err(Failure::usage("run needs --preset or --plan"));
    }
    let mut p = experiment::preset(preset.unwrap_or("main"))?;
    if let Some(path) = plan {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        p = PlanOverrides::parse(&text)?.apply(p);
    }
    if let Some(s) = seed {
        p.master_seed = s;
    }
    p.validate()?;
    Ok(p)
}

fn cmd_run<O: Write, E: Write>(a: &RunArgs, verbosity: u8, out: &mut O, err: &mut E) -> CmdResult {
    let plan = resolve_plan(a.preset.as_deref(), a.plan.as_deref(), a.seed)?;
    let workers = match a.workers {
        Some(0) => return Err(Failure::usage("--workers must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let cells = experiment::plan_cells(&plan).len();
    writeln!(out, "planned runs: {} ({} cells x {} optimizers)", plan.run_count(), cells, plan.optimizers.len())
        .map_err(io_fail)?;
    if a.dry_run {
        return Ok(EXIT_OK);
    }
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let progress = |c: &Cell, done: usize, total: usize| {
        eprintln!("[{done}/{total}] s={} seed={} N={}", c.s, c.seed, c.n);
    };
    let sweep = experiment::run_sweep(&plan, workers, (verbosity >= 1).then_some(&progress as _))?;
    experiment::write_outputs(&a.out, &plan, &sweep.table)?;
    if verbosity >= 2 {
        for note in &sweep.notes {
            writeln!(err, "{note}").map_err(io_fail)?;
        }
    }
    writeln!(
        out,
        "cells run: {}, failed cells: {}, failed runs: {}, wall time: {:.1}s",
        sweep.cells_run,
        sweep.failed_cells,
        sweep.failed_runs,
        sweep.elapsed.as_secs_f64()
    )
    .map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn results_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(RESULTS_FILE)
    } else {
        p.to_path_buf()
    }
}

fn load_results(p: &Path) -> Result<ResultsTable, Failure> {
    let table = ResultsTable::read_path(&results_path(p))?;
    if table.is_empty() {
        return Err(Error::Schema {
            path: results_path(p),
            reason: "results file has no rows".into(),
        }
        .into());
    }
    Ok(table)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, Failure> {
    let mut wtr = csv::Writer::from_writer(vec![]);
    let fail = |e: csv::Error| Failure::from(Error::invalid(e.to_string()));
    wtr.write_record(header).map_err(fail)?;
    for r in rows {
        wtr.write_record(r).map_err(fail)?;
    }
    wtr.into_inner().map_err(|e| Failure::from(Error::invalid(e.to_string())))
}

fn cmd_report<O: Write>(a: &ReportArgs, out: &mut O) -> CmdResult {
    let table = load_results(&a.results)?;
    let (text, name, bytes) = match a.which {
        Which::Gaps => {
            let gaps = analysis::convergence_summary(&table);
            let rows = gaps
                .iter()
                .map(|g| vec![g.optimizer.to_string(), g.s.to_string(), g.n.to_string(), g.mean_gap.to_string(), g.seeds.to_string()])
                .collect();
            (
                analysis::render_gaps(&gaps),
                "gaps.csv",
                csv_bytes(&["optimizer", "s", "N", "mean_gap", "seeds"], rows)?,
            )
        }
        which => {
            let alphas = analysis::alpha_table(&table, a.n_min)?;
            if let Some(e) = alphas.first_error() {
                return Err(Failure {
                    code: EXIT_DATA,
                    message: e,
                });
            }
            match which {
                Which::Alpha => {
                    let mut buf = vec![];
                    alphas.write_csv(&mut buf)?;
                    (alphas.render(), "alpha.csv", buf)
                }
                Which::R2 => {
                    let mut buf = vec![];
                    alphas.write_csv(&mut buf)?;
                    (alphas.render_r2(), "r2.csv", buf)
                }
                Which::Delta => {
                    let mut lines = String::new();
                    let mut rows = vec![];
                    for &k in alphas.optimizers.iter().filter(|&&k| k != OptimizerKind::Gd) {
                        for (s, d) in analysis::delta_alpha(&alphas, k, OptimizerKind::Gd)? {
                            lines.push_str(&format!("{k} - GD at s={s}: {d:+.3}\n"));
                            rows.push(vec![k.to_string(), s.to_string(), d.to_string()]);
                        }
                    }
                    (lines, "delta.csv", csv_bytes(&["optimizer", "s", "delta_alpha"], rows)?)
                }
                Which::Multiplier => {
                    let entries = analysis::multiplier_table(&alphas)?;
                    let rows = entries
                        .iter()
                        .map(|e| {
                            vec![
                                e.optimizer.to_string(),
                                e.s.to_string(),
                                e.n_ref.to_string(),
                                e.multiplier.value().map(|v| v.to_string()).unwrap_or_default(),
                            ]
                        })
                        .collect();
                    (
                        analysis::render_multipliers(&entries),
                        "multiplier.csv",
                        csv_bytes(&["optimizer", "s", "N_ref", "multiplier"], rows)?,
                    )
                }
                Which::Gaps => unreachable!(),
            }
        }
    };
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    if let Some(dir) = &a.out {
        write_file(dir, name, &bytes)?;
    }
    Ok(EXIT_OK)
}

fn cmd_theory_check<O: Write>(a: &TheoryArgs, out: &mut O) -> CmdResult {
    if a.s_grid.is_empty() || a.s_grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Failure::usage("--s-grid needs positive, finite exponents"));
    }
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(Failure::usage(format!("--epsilon {} is outside (0, 1)", a.epsilon)));
    }
    if a.n == 0 || a.steps == 0 {
        return Err(Failure::usage("--n and --steps must be at least 1"));
    }
    let mut spectra = a
        .s_grid
        .iter()
        .map(|&s| Ok((s, crate::datagen::power_law_eigenvalues(&crate::datagen::SpectrumConfig::new(a.n, s)?)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    if a.flat {
        spectra.push((0.0, vec![1.0; a.n]));
    }
    let report = theory::proposition_check_spectra(&spectra, a.n, a.steps, a.epsilon)?;
    out.write_all(report.render().as_bytes()).map_err(io_fail)?;
    if let Some(dir) = &a.out {
        let mut buf = vec![];
        report.write_csv(&mut buf)?;
        write_file(dir, "theory.csv", &buf)?;
    }
    Ok(if report.all_satisfied() { EXIT_OK } else { EXIT_DATA })
}

fn cmd_diagnose<O: Write>(a: &DiagnoseArgs, out: &mut O) -> CmdResult {
    let eigs = analysis::read_eigenvalue_file(&a.eigenvalues)?;
    let d = analysis::estimate_spectral_exponent(&eigs, a.range)?;
    out.write_all(d.render().as_bytes()).map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn cmd_plot_data<O: Write>(a: &PlotArgs, out: &mut O) -> CmdResult {
    let table = load_results(&a.results)?;
    let files = analysis::write_plot_data(&table, a.figure.into(), a.n_min, &a.out)?;
    for f in files {
        writeln!(out, "{}", f.display()).map_err(io_fail)?;
    }
    Ok(EXIT_OK)
}
