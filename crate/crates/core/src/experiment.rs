//! Sweep orchestration: plan the (s, seed, N) grid, realize each cell's
//! data once, train every optimizer on it, and persist the results table
//! together with a manifest.
//!
//! Every random draw comes from a stream keyed by the master seed, a purpose
//! tag and the cell coordinates, so results do not depend on scheduling.
//! Teacher streams omit N, which makes the teacher shared across model sizes.

use std::fs;
use std::io::{Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{
    derive_stream, power_law_eigenvalues, realize_cell, sample_teacher, train_size, CellStreams, DatasetCell,
    Purpose, SpectrumConfig, Teacher, TeacherConfig,
};
use crate::error::{Error, Result};
use crate::optim::{self, OptimizerKind, TrainConfig, TrainProblem};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Column names of the results file, in order.
pub const RESULTS_COLUMNS: [&str; 10] = [
    "s",
    "N",
    "optimizer",
    "seed",
    "test_loss",
    "train_residual_norm",
    "lr_used",
    "oracle_test_loss",
    "convergence_gap",
    "diverged",
];

pub const PRESET_NAMES: [&str; 4] = ["main", "robustness_D5000", "robustness_b2", "reduced"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub s_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    pub seeds: Vec<u64>,
    /// Input dimension D.
    pub dim: usize,
    /// Teacher width K*.
    pub teacher_width: usize,
    /// Source exponent b.
    pub source_exponent: f64,
    /// Step budget T.
    pub steps: usize,
    pub lambda_reg: f64,
    pub n_test: usize,
    pub master_seed: u64,
}

/// Partial plan read from a plan file; present fields replace the base plan's.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverrides {
    pub s_values: Option<Vec<f64>>,
    pub n_values: Option<Vec<usize>>,
    pub optimizers: Option<Vec<OptimizerKind>>,
    pub seeds: Option<Vec<u64>>,
    pub dim: Option<usize>,
    pub teacher_width: Option<usize>,
    pub source_exponent: Option<f64>,
    pub steps: Option<usize>,
    pub lambda_reg: Option<f64>,
    pub n_test: Option<usize>,
    pub master_seed: Option<u64>,
}

impl PlanOverrides {
    /// Parses either a bare key-value plan or a manifest's `[plan]` table.
    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::invalid(format!("plan file: {e}")))?;
        let table = match value.get("plan") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => value,
        };
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("plan file: {e}")))
    }

    pub fn apply(self, mut plan: SweepPlan) -> SweepPlan {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { plan.$f = v; } )* };
        }
        take!(s_values, n_values, optimizers, seeds, dim, teacher_width, source_exponent, steps, lambda_reg, n_test, master_seed);
        plan
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() || self.n_values.is_empty() || self.optimizers.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("plan lists (s_values, n_values, optimizers, seeds) must be nonempty"));
        }
        if self.s_values.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("spectral exponents must be positive and finite"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) || self.n_values[0] == 0 {
            return Err(Error::invalid("n_values must be positive and strictly increasing"));
        }
        let mut opts = self.optimizers.clone();
        opts.sort();
        opts.dedup();
        if opts.len() != self.optimizers.len() {
            return Err(Error::invalid("optimizer list has duplicates"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::invalid("seed list has duplicates"));
        }
        let mut s = self.s_values.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("s_values has duplicates"));
        }
        if self.dim == 0 || self.teacher_width == 0 || self.steps == 0 || self.n_test == 0 {
            return Err(Error::invalid("dim, teacher_width, steps and n_test must be at least 1"));
        }
        if !(self.source_exponent > 0.0) || !self.source_exponent.is_finite() {
            return Err(Error::invalid("source exponent must be positive"));
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return Err(Error::invalid("lambda_reg must be finite and nonnegative"));
        }
        // TOML integers are signed 64-bit.
        if self.master_seed > i64::MAX as u64 || self.seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(Error::invalid("seeds must fit in a signed 64-bit integer"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            lambda_reg: self.lambda_reg,
            ..TrainConfig::default()
        }
    }

    /// |s| · |N| · |optimizers| · |seeds|.
    pub fn run_count(&self) -> usize {
        self.s_values.len() * self.n_values.len() * self.optimizers.len() * self.seeds.len()
    }
}

pub fn preset(name: &str) -> Result<SweepPlan> {
    let main = SweepPlan {
        s_values: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
        n_values: vec![25, 50, 100, 200, 500, 1000, 2000, 5000],
        optimizers: OptimizerKind::ALL.to_vec(),
        seeds: (0..10).collect(),
        dim: 1000,
        teacher_width: 100,
        source_exponent: 1.0,
        steps: 2000,
        lambda_reg: 1e-6,
        n_test: 5000,
        master_seed: 0,
    };
    match name {
        "main" => Ok(main),
        "robustness_D5000" => Ok(SweepPlan { dim: 5000, ..main }),
        "robustness_b2" => Ok(SweepPlan { source_exponent: 2.0, ..main }),
        "reduced" => Ok(SweepPlan {
            s_values: vec![0.25, 1.0],
            n_values: vec![100, 200, 400, 800],
            seeds: (0..5).collect(),
            dim: 400,
            teacher_width: 50,
            ..main
        }),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// One (s, seed, N) problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub s_index: usize,
    pub s: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub n_index: usize,
    pub n: usize,
}

/// Cells in loop order: s outer, seed middle, N inner.
pub fn plan_cells(plan: &SweepPlan) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(plan.s_values.len() * plan.seeds.len() * plan.n_values.len());
    for (s_index, &s) in plan.s_values.iter().enumerate() {
        for (seed_index, &seed) in plan.seeds.iter().enumerate() {
            for (n_index, &n) in plan.n_values.iter().enumerate() {
                cells.push(Cell {
                    s_index,
                    s,
                    seed_index,
                    seed,
                    n_index,
                    n,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub s: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub test_loss: Option<f64>,
    pub train_residual_norm: Option<f64>,
    pub lr_used: Option<f64>,
    pub oracle_test_loss: Option<f64>,
    pub convergence_gap: Option<f64>,
    pub diverged: bool,
}

impl CellResult {
    fn failed(cell: &Cell, optimizer: OptimizerKind, oracle_test_loss: Option<f64>) -> Self {
        CellResult {
            s: cell.s,
            n: cell.n,
            optimizer,
            seed: cell.seed,
            test_loss: None,
            train_residual_norm: None,
            lr_used: None,
            oracle_test_loss,
            convergence_gap: None,
            diverged: true,
        }
    }

    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        self.s
            .total_cmp(&other.s)
            .then(self.n.cmp(&other.n))
            .then(self.optimizer.cmp(&other.optimizer))
            .then(self.seed.cmp(&other.seed))
    }
}

/// Output of [`run_cell`].
#[derive(Debug, Clone)]
pub struct CellRun {
    pub cell: Cell,
    pub results: Vec<CellResult>,
    /// Hash of the training features and targets every optimizer saw.
    pub problem_digest: String,
    pub teacher_digest: String,
    /// Human-readable notes about optimizers that failed.
    pub notes: Vec<String>,
}

fn teacher_for(plan: &SweepPlan, s: f64, seed: u64) -> Result<Teacher> {
    let mut rng = derive_stream(plan.master_seed, Purpose::Teacher, &[s.to_bits(), seed]);
    sample_teacher(
        &mut rng,
        &TeacherConfig::new(plan.teacher_width, plan.source_exponent)?,
        plan.dim,
    )
}

/// Regenerates the teacher and dataset of `cell` from the plan's streams.
pub fn realize(plan: &SweepPlan, cell: &Cell) -> Result<(Teacher, DatasetCell)> {
    let eigs = power_law_eigenvalues(&SpectrumConfig::new(plan.dim, cell.s)?)?;
    let teacher = teacher_for(plan, cell.s, cell.seed)?;
    let coords = [cell.s.to_bits(), cell.seed, cell.n as u64];
    let streams = CellStreams {
        train_inputs: derive_stream(plan.master_seed, Purpose::TrainInputs, &coords),
        test_inputs: derive_stream(plan.master_seed, Purpose::TestInputs, &coords),
        student_weights: derive_stream(plan.master_seed, Purpose::StudentWeights, &coords),
    };
    let data = realize_cell(&teacher, &eigs, cell.n, train_size(cell.n), plan.n_test, streams)?;
    Ok((teacher, data))
}

/// Trains every planned optimizer on one shared realization of `cell`.
pub fn run_cell(plan: &SweepPlan, cell: &Cell) -> Result<CellRun> {
    let (teacher, data) = realize(plan, cell)?;
    let problem = TrainProblem::new(data.f_train.view(), data.y_train.view())?;
    let cfg = plan.train_config();
    let (f_test, y_test) = (data.f_test.view(), data.y_test.view());
    let mut notes = vec![];

    let oracle = optim::solve_full_ng(&problem, plan.lambda_reg);
    let oracle_loss = match &oracle {
        Ok(r) => Some(r.test_loss(f_test, y_test)?),
        Err(e) => {
            notes.push(format!("ridge oracle failed: {e}"));
            None
        }
    };

    let mut results = Vec::with_capacity(plan.optimizers.len());
    for &kind in &plan.optimizers {
        let trained = match kind {
            OptimizerKind::FullNg => oracle.as_ref().map(Clone::clone).map_err(|e| Error::NumericFailure {
                reason: e.to_string(),
                iterations: 0,
            }),
            _ => optim::train_iterative(kind, &problem, &cfg),
        };
        let row = match trained {
            Ok(r) => {
                let loss = r.test_loss(f_test, y_test)?;
                let gap = match oracle_loss {
                    Some(o) if o > 0.0 => Some((loss - o) / o),
                    _ => None,
                };
                CellResult {
                    s: cell.s,
                    n: cell.n,
                    optimizer: kind,
                    seed: cell.seed,
                    test_loss: Some(loss),
                    train_residual_norm: Some(r.train_residual_norm),
                    lr_used: Some(r.lr_used),
                    oracle_test_loss: oracle_loss,
                    convergence_gap: gap,
                    diverged: false,
                }
            }
            Err(e) => {
                notes.push(format!("{kind}: {e}"));
                CellResult::failed(cell, kind, oracle_loss)
            }
        };
        results.push(row);
    }

    Ok(CellRun {
        cell: *cell,
        results,
        problem_digest: data.problem_digest(),
        teacher_digest: teacher.digest(),
        notes,
    })
}

/// Results sorted by (s, N, optimizer, seed).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<CellResult>,
}

impl ResultsTable {
    pub fn new(mut rows: Vec<CellResult>) -> Self {
        rows.sort_by(CellResult::sort_key);
        ResultsTable { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("writing results: {e}"));
        if self.rows.is_empty() {
            wtr.write_record(RESULTS_COLUMNS).map_err(err)?;
        }
        for row in &self.rows {
            wtr.serialize(row).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::invalid(format!("writing results: {e}")))
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = vec![];
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn read_csv<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let schema = |reason: String| Error::Schema {
            path: origin.to_path_buf(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
        if headers.is_empty() {
            return Err(schema("file is empty".into()));
        }
        if headers.iter().ne(RESULTS_COLUMNS.iter().copied()) {
            return Err(schema(format!(
                "expected columns {}, found {}",
                RESULTS_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = vec![];
        for rec in rdr.deserialize::<CellResult>() {
            rows.push(rec.map_err(|e| schema(e.to_string()))?);
        }
        Ok(ResultsTable::new(rows))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, path)
    }

    /// Distinct s values, ascending.
    pub fn s_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.s).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Distinct optimizers in canonical order.
    pub fn optimizers(&self) -> Vec<OptimizerKind> {
        let mut v: Vec<OptimizerKind> = self.rows.iter().map(|r| r.optimizer).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn select(&self, s: f64, optimizer: OptimizerKind) -> impl Iterator<Item = &CellResult> {
        self.rows.iter().filter(move |r| r.s == s && r.optimizer == optimizer)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Seconds since the Unix epoch when the manifest was written.
    pub timestamp: u64,
    pub results_file: String,
    pub results_sha256: String,
    pub plan: SweepPlan,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Checks the recorded digest against the results file next to the manifest.
    pub fn verify(&self, dir: &Path) -> Result<bool> {
        let path = dir.join(&self.results_file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(sha256_hex(&bytes) == self.results_sha256)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: ResultsTable,
    pub cells_run: usize,
    /// Cells whose data generation failed or whose worker panicked.
    pub failed_cells: usize,
    /// Individual optimizer runs that diverged or failed.
    pub failed_runs: usize,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

/// Progress callback: `(cell, completed, total)`.
pub type Progress<'a> = &'a (dyn Fn(&Cell, usize, usize) + Sync);

/// Executes every cell of `plan` on a pool of `workers` threads.
pub fn run_sweep(plan: &SweepPlan, workers: usize, progress: Option<Progress<'_>>) -> Result<SweepOutput> {
    plan.validate()?;
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let start = Instant::now();
    let cells = plan_cells(plan);
    let total = cells.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    let outcomes: Vec<(Cell, std::result::Result<CellRun, String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let out = match catch_unwind(AssertUnwindSafe(|| run_cell(plan, cell))) {
                    Ok(Ok(run)) => Ok(run),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(panic) => Err(panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "worker panicked".into())),
                };
                let k = done.fetch_add(1, Ordering::SeqCst) + 1;
                if let Some(p) = progress {
                    p(cell, k, total);
                }
                (*cell, out)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(plan.run_count());
    let mut notes = vec![];
    let mut failed_cells = 0;
    for (cell, out) in outcomes {
        match out {
            Ok(run) => {
                notes.extend(run.notes.into_iter().map(|n| format!("s={} seed={} N={}: {n}", cell.s, cell.seed, cell.n)));
                rows.extend(run.results);
            }
            Err(msg) => {
                failed_cells += 1;
                notes.push(format!("s={} seed={} N={}: cell failed: {msg}", cell.s, cell.seed, cell.n));
                rows.extend(plan.optimizers.iter().map(|&k| CellResult::failed(&cell, k, None)));
            }
        }
    }
    let failed_runs = rows.iter().filter(|r| r.diverged).count();
    Ok(SweepOutput {
        table: ResultsTable::new(rows),
        cells_run: total,
        failed_cells,
        failed_runs,
        notes,
        elapsed: start.elapsed(),
    })
}

/// Writes `results.csv` and `manifest.toml` into `out_dir`.
pub fn write_outputs(out_dir: &Path, plan: &SweepPlan, table: &ResultsTable) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let bytes = table.to_csv_bytes()?;
    let results_path = out_dir.join(RESULTS_FILE);
    fs::write(&results_path, &bytes).map_err(|e| Error::io(&results_path, e))?;

    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp,
        results_file: RESULTS_FILE.to_string(),
        results_sha256: sha256_hex(&bytes),
        plan: plan.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::invalid(format!("manifest: {e}")))?;
    let manifest_path: PathBuf = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> SweepPlan {
        SweepPlan {
            s_values: vec![0.5, 1.0],
            n_values: vec![4, 8, 12],
            optimizers: vec![OptimizerKind::Gd, OptimizerKind::FullNg],
            seeds: vec![0, 1],
            dim: 12,
            teacher_width: 4,
            source_exponent: 1.0,
            steps: 50,
            lambda_reg: 1e-6,
            n_test: 100,
            master_seed: 7,
        }
    }

    #[test]
    fn main_preset_counts() {
        let p = preset("main").unwrap();
        assert_eq!(p.run_count(), 2400);
        assert_eq!(p.n_values, vec![25, 50, 100, 200, 500, 1000, 2000, 5000]);
        assert_eq!(p.n_test, 5000);
        assert_eq!(plan_cells(&p).len() * p.optimizers.len(), 2400);
    }

    #[test]
    fn robustness_presets_change_one_knob() {
        let main = preset("main").unwrap();
        let b2 = preset("robustness_b2").unwrap();
        assert_eq!(b2.source_exponent, 2.0);
        assert_eq!(SweepPlan { source_exponent: 1.0, ..b2 }, main);
        let d = preset("robustness_D5000").unwrap();
        assert_eq!(d.dim, 5000);
        assert_eq!(SweepPlan { dim: 1000, ..d }, main);
        assert!(matches!(preset("nosuch"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn reduced_preset_shape() {
        let r = preset("reduced").unwrap();
        assert_eq!((r.dim, r.teacher_width, r.source_exponent), (400, 50, 1.0));
        assert_eq!(r.s_values, vec![0.25, 1.0]);
        assert_eq!(r.n_values, vec![100, 200, 400, 800]);
        assert_eq!(r.seeds.len(), 5);
        assert_eq!(r.steps, 2000);
    }

    #[test]
    fn plan_order_and_counts() {
        let plan = SweepPlan {
            s_values: vec![0.5, 1.0],
            n_values: vec![10, 20, 30],
            optimizers: vec![OptimizerKind::Gd, OptimizerKind::FullNg],
            seeds: vec![0, 1],
            ..tiny_plan()
        };
        assert_eq!(plan.run_count(), 24);
        let cells = plan_cells(&plan);
        assert_eq!(cells.len(), 12);
        assert_eq!((cells[0].s, cells[0].seed, cells[0].n), (0.5, 0, 10));
        assert_eq!((cells[1].s, cells[1].seed, cells[1].n), (0.5, 0, 20));
        assert_eq!((cells[3].s, cells[3].seed, cells[3].n), (0.5, 1, 10));
        assert_eq!((cells[6].s, cells[6].seed, cells[6].n), (1.0, 0, 10));

        let single = SweepPlan {
            s_values: vec![1.0],
            n_values: vec![10],
            optimizers: vec![OptimizerKind::Gd],
            seeds: vec![3],
            ..tiny_plan()
        };
        assert_eq!(single.run_count(), 1);
    }

    #[test]
    fn validation_rejects_bad_plans() {
        let p = tiny_plan();
        assert!(p.validate().is_ok());
        assert!(SweepPlan { optimizers: vec![], ..p.clone() }.validate().is_err());
        assert!(SweepPlan { n_values: vec![8, 4], ..p.clone() }.validate().is_err());
        assert!(SweepPlan { s_values: vec![0.0], ..p.clone() }.validate().is_err());
        assert!(SweepPlan { seeds: vec![1, 1], ..p.clone() }.validate().is_err());
        assert!(run_sweep(&SweepPlan { optimizers: vec![], ..p }, 1, None).is_err());
    }

    #[test]
    fn cell_run_is_deterministic_and_shared() {
        let plan = SweepPlan {
            optimizers: OptimizerKind::ALL.to_vec(),
            ..tiny_plan()
        };
        let cells = plan_cells(&plan);
        let a = run_cell(&plan, &cells[1]).unwrap();
        let b = run_cell(&plan, &cells[1]).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.problem_digest, b.problem_digest);
        assert_eq!(a.results.len(), 5);
        let ng = a.results.iter().find(|r| r.optimizer == OptimizerKind::FullNg).unwrap();
        assert_eq!(ng.convergence_gap, Some(0.0));
        assert_eq!(ng.test_loss, ng.oracle_test_loss);
    }

    #[test]
    fn teacher_shared_across_n_but_not_seeds() {
        let plan = tiny_plan();
        let cells = plan_cells(&plan);
        let digests: Vec<_> = cells.iter().map(|c| run_cell(&plan, c).unwrap()).collect();
        for run in &digests {
            let same = digests.iter().filter(|r| r.cell.s == run.cell.s && r.cell.seed == run.cell.seed);
            assert!(same.clone().all(|r| r.teacher_digest == run.teacher_digest));
        }
        assert_ne!(digests[0].teacher_digest, digests[3].teacher_digest);
        assert_ne!(digests[0].problem_digest, digests[1].problem_digest);
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let plan = tiny_plan();
        let out = run_sweep(&plan, 2, None).unwrap();
        assert_eq!(out.table.rows.len(), plan.run_count());
        let bytes = out.table.to_csv_bytes().unwrap();
        let header = std::str::from_utf8(&bytes).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, RESULTS_COLUMNS.join(","));
        let back = ResultsTable::read_csv(&bytes[..], Path::new("mem")).unwrap();
        assert_eq!(back, out.table);

        let bad = b"s,N,optimizer\n1,2,GD\n";
        assert!(matches!(ResultsTable::read_csv(&bad[..], Path::new("x")), Err(Error::Schema { .. })));
        assert!(matches!(ResultsTable::read_csv(&b""[..], Path::new("x")), Err(Error::Schema { .. })));
    }

    #[test]
    fn failed_rows_persist_with_empty_losses() {
        let cell = Cell { s_index: 0, s: 1.0, seed_index: 0, seed: 0, n_index: 0, n: 4 };
        let table = ResultsTable::new(vec![CellResult::failed(&cell, OptimizerKind::Gd, None)]);
        let text = String::from_utf8(table.to_csv_bytes().unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,,,,true"), "{text}");
        let back = ResultsTable::read_csv(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let plan = tiny_plan();
        let one = run_sweep(&plan, 1, None).unwrap().table.to_csv_bytes().unwrap();
        let four = run_sweep(&plan, 4, None).unwrap().table.to_csv_bytes().unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn manifest_records_plan_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let plan = tiny_plan();
        let out = run_sweep(&plan, 1, None).unwrap();
        let m = write_outputs(dir.path(), &plan, &out.table).unwrap();
        let back = Manifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.plan, plan);
        assert!(back.verify(dir.path()).unwrap());
        fs::write(dir.path().join(RESULTS_FILE), b"tampered").unwrap();
        assert!(!back.verify(dir.path()).unwrap());
    }

    #[test]
    fn plan_overrides_from_manifest_or_bare_keys() {
        let base = preset("main").unwrap();
        let o = PlanOverrides::parse("dim = 50\nseeds = [1, 2]\n").unwrap();
        let p = o.apply(base.clone());
        assert_eq!((p.dim, p.seeds.clone()), (50, vec![1, 2]));
        assert_eq!(p.n_values, base.n_values);

        let text = toml::to_string(&Manifest {
            version: "x".into(),
            timestamp: 0,
            results_file: RESULTS_FILE.into(),
            results_sha256: String::new(),
            plan: tiny_plan(),
        })
        .unwrap();
        assert_eq!(PlanOverrides::parse(&text).unwrap().apply(base), tiny_plan());
        assert!(PlanOverrides::parse("dimension = 3").is_err());
    }
}
