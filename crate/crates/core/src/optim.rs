//! Full-batch training of the linear readout `a` under five preconditioners.
//!
//! All iterative variants minimize the mean-squared training loss starting
//! from `a = 0`, with gradient `g = (1/n)·Fᵀ(Fa − y)` (no factor 2). The
//! loop works in Gram form, `g = K·a − Fᵀy/n` with `K = FᵀF/n`, which is the
//! same quantity without touching `F` on every step.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inv_sqrt_from_eig, ridge_solve, sym_eig, sym_eigenvalues, EigFloor, SymMatrix};

/// Constant in the spectral step-size rules `1.5/λ_max` and `1.5/√λ_max`.
pub const STEP_SCALE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "GD")]
    Gd,
    Diagonal,
    #[serde(rename = "FullNG")]
    FullNg,
    #[serde(rename = "SignGD")]
    SignGd,
    MatrixSign,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Gd,
        OptimizerKind::Diagonal,
        OptimizerKind::FullNg,
        OptimizerKind::SignGd,
        OptimizerKind::MatrixSign,
    ];

    /// Stable serialized name.
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Gd => "GD",
            OptimizerKind::Diagonal => "Diagonal",
            OptimizerKind::FullNg => "FullNG",
            OptimizerKind::SignGd => "SignGD",
            OptimizerKind::MatrixSign => "MatrixSign",
        }
    }

    pub fn is_iterative(self) -> bool {
        self != OptimizerKind::FullNg
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown optimizer `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lambda_reg: f64,
    pub sign_lr_grid: Vec<f64>,
    pub eig_floor: EigFloor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            lambda_reg: 1e-6,
            sign_lr_grid: vec![1e-4, 1e-3, 1e-2],
            eig_floor: EigFloor::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("step budget must be at least 1"));
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return Err(Error::invalid("lambda_reg must be finite and nonnegative"));
        }
        if self.sign_lr_grid.is_empty() {
            return Err(Error::invalid("Sign-GD learning-rate grid is empty"));
        }
        if self.sign_lr_grid.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::invalid("Sign-GD learning rates must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub kind: OptimizerKind,
    pub weights: Array1<f64>,
    /// Step size used; 0 for the direct solve.
    pub lr_used: f64,
    /// `‖F·a − y‖` on the training split.
    pub train_residual_norm: f64,
    pub steps_run: usize,
}

impl TrainResult {
    pub fn test_loss(&self, f_test: ArrayView2<'_, f64>, y_test: ArrayView1<'_, f64>) -> Result<f64> {
        test_loss(f_test, self.weights.view(), y_test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Identity,
    Diagonal(Array1<f64>),
    Dense(SymMatrix),
    /// Full NG bypasses iteration and solves the ridge system directly.
    DirectSolve,
}

impl Preconditioner {
    pub fn apply(&self, g: &Array1<f64>) -> Array1<f64> {
        match self {
            Preconditioner::Identity | Preconditioner::DirectSolve => g.clone(),
            Preconditioner::Diagonal(p) => g * p,
            Preconditioner::Dense(p) => p.view().dot(g),
        }
    }
}

/// Training data for one cell with its Gram quantities computed once.
#[derive(Debug, Clone)]
pub struct TrainProblem<'a> {
    f: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    /// `FᵀF`
    gram_raw: SymMatrix,
    /// `FᵀF / n`
    gram: SymMatrix,
    /// `Fᵀy`
    fty: Array1<f64>,
}

impl<'a> TrainProblem<'a> {
    pub fn new(f: ArrayView2<'a, f64>, y: ArrayView1<'a, f64>) -> Result<Self> {
        let (n, width) = f.dim();
        if n == 0 || width == 0 {
            return Err(Error::invalid("feature matrix is empty"));
        }
        if y.len() != n {
            return Err(Error::invalid(format!(
                "targets have length {}, feature matrix has {n} rows",
                y.len()
            )));
        }
        let gram_raw = SymMatrix::symmetrize(f.t().dot(&f))?;
        let gram = SymMatrix::new(gram_raw.view().mapv(|v| v / n as f64))?;
        let fty = f.t().dot(&y);
        Ok(TrainProblem {
            f,
            y,
            gram_raw,
            gram,
            fty,
        })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn width(&self) -> usize {
        self.f.ncols()
    }

    /// `K = FᵀF / n`.
    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn residual_norm(&self, a: ArrayView1<'_, f64>) -> f64 {
        let r = self.f.dot(&a) - &self.y;
        r.dot(&r).sqrt()
    }

    /// Mean-squared training loss `(1/n)‖Fa − y‖²`.
    pub fn train_loss(&self, a: ArrayView1<'_, f64>) -> f64 {
        self.residual_norm(a).powi(2) / self.n() as f64
    }

    fn grad(&self, a: &Array1<f64>) -> Array1<f64> {
        let inv_n = 1.0 / self.n() as f64;
        let mut g = self.gram.view().dot(a);
        Zip::from(&mut g).and(&self.fty).for_each(|g, &b| *g -= b * inv_n);
        g
    }
}

/// `K = FᵀF / n`.
pub fn gram(f: ArrayView2<'_, f64>, n: usize) -> Result<SymMatrix> {
    if f.nrows() != n || n == 0 {
        return Err(Error::invalid(format!(
            "feature matrix has {} rows, expected n = {n}",
            f.nrows()
        )));
    }
    let k = f.t().dot(&f).mapv(|v| v / n as f64);
    SymMatrix::symmetrize(k)
}

/// `(1/n)·Fᵀ(Fa − y)`.
pub fn gradient(
    f: ArrayView2<'_, f64>,
    a: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    n: usize,
) -> Result<Array1<f64>> {
    if f.ncols() != a.len() || f.nrows() != y.len() || n == 0 {
        return Err(Error::invalid("gradient: inconsistent shapes"));
    }
    let r = f.dot(&a) - &y;
    Ok(f.t().dot(&r) / n as f64)
}

/// Mean over test rows of `(F_test·a − y_test)²`.
pub fn test_loss(f_test: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>, y_test: ArrayView1<'_, f64>) -> Result<f64> {
    if f_test.ncols() != a.len() || f_test.nrows() != y_test.len() || y_test.is_empty() {
        return Err(Error::invalid("test_loss: inconsistent shapes"));
    }
    let r = f_test.dot(&a) - &y_test;
    Ok(r.dot(&r) / y_test.len() as f64)
}

fn largest(vals: &Array1<f64>) -> Result<f64> {
    let top = vals[0];
    if !(top > 0.0) {
        return Err(Error::DegenerateSpectrum(format!("largest eigenvalue is {top}")));
    }
    Ok(top)
}

fn diagonal_scales(k: &SymMatrix, floor: EigFloor) -> Result<Array1<f64>> {
    let d = k.diag();
    let top = d.iter().fold(0.0f64, |m, &v| m.max(v));
    if !(top > 0.0) {
        return Err(Error::DegenerateSpectrum("Gram diagonal is identically zero".into()));
    }
    let fl = floor.resolve(top);
    Ok(d.mapv(|v| v.max(fl).powf(-0.5)))
}

/// Preconditioner for `kind` built from the n-normalized Gram `K`.
pub fn build_preconditioner(kind: OptimizerKind, k: &SymMatrix, floor: EigFloor) -> Result<Preconditioner> {
    Ok(match kind {
        OptimizerKind::Gd | OptimizerKind::SignGd => Preconditioner::Identity,
        OptimizerKind::FullNg => Preconditioner::DirectSolve,
        OptimizerKind::Diagonal => Preconditioner::Diagonal(diagonal_scales(k, floor)?),
        OptimizerKind::MatrixSign => {
            let eig = sym_eig(k)?;
            let top = largest(&eig.values)?;
            Preconditioner::Dense(inv_sqrt_from_eig(&eig, floor.resolve(top))?)
        }
    })
}

/// Spectral step-size rule for the deterministic iterative optimizers.
pub fn step_size(kind: OptimizerKind, k: &SymMatrix) -> Result<f64> {
    step_size_with_floor(kind, k, EigFloor::default())
}

pub fn step_size_with_floor(kind: OptimizerKind, k: &SymMatrix, floor: EigFloor) -> Result<f64> {
    match kind {
        OptimizerKind::Gd => Ok(STEP_SCALE / largest(&sym_eigenvalues(k)?)?),
        OptimizerKind::Diagonal => {
            // λ_max(P·K) = λ_max(P^{1/2} K P^{1/2}).
            let p = diagonal_scales(k, floor)?;
            let r = p.mapv(f64::sqrt);
            let n = k.order();
            let kv = k.view();
            let m = ndarray::Array2::from_shape_fn((n, n), |(i, j)| r[i] * kv[[i, j]] * r[j]);
            Ok(STEP_SCALE / largest(&sym_eigenvalues(&SymMatrix::symmetrize(m)?)?)?)
        }
        OptimizerKind::MatrixSign => Ok(STEP_SCALE / largest(&sym_eigenvalues(k)?)?.sqrt()),
        OptimizerKind::SignGd => Err(Error::invalid(
            "Sign-GD step size comes from the learning-rate grid search",
        )),
        OptimizerKind::FullNg => Err(Error::invalid("Full NG is a direct solve; it has no step size")),
    }
}

/// Preconditioner and step size, sharing one eigendecomposition for Matrix-Sign.
fn prepare(kind: OptimizerKind, k: &SymMatrix, floor: EigFloor) -> Result<(Preconditioner, f64)> {
    match kind {
        OptimizerKind::MatrixSign => {
            let eig = sym_eig(k)?;
            let top = largest(&eig.values)?;
            let p = inv_sqrt_from_eig(&eig, floor.resolve(top))?;
            Ok((Preconditioner::Dense(p), STEP_SCALE / top.sqrt()))
        }
        _ => Ok((build_preconditioner(kind, k, floor)?, step_size_with_floor(kind, k, floor)?)),
    }
}

/// Runs `steps` updates at a fixed learning rate from `a = 0`.
///
/// `observe` sees the weights after every step.
pub fn descend(
    problem: &TrainProblem<'_>,
    kind: OptimizerKind,
    precond: &Preconditioner,
    lr: f64,
    steps: usize,
    mut observe: impl FnMut(usize, &Array1<f64>),
) -> Result<TrainResult> {
    if kind == OptimizerKind::FullNg {
        return Err(Error::invalid("Full NG is not iterative"));
    }
    if !(lr > 0.0) {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    let mut a = Array1::<f64>::zeros(problem.width());
    for step in 1..=steps {
        let g = problem.grad(&a);
        if kind == OptimizerKind::SignGd {
            Zip::from(&mut a).and(&g).for_each(|a, &g| {
                if g > 0.0 {
                    *a -= lr;
                } else if g < 0.0 {
                    *a += lr;
                }
            });
        } else {
            let dir = precond.apply(&g);
            a.scaled_add(-lr, &dir);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        observe(step, &a);
    }
    let train_residual_norm = problem.residual_norm(a.view());
    Ok(TrainResult {
        kind,
        weights: a,
        lr_used: lr,
        train_residual_norm,
        steps_run: steps,
    })
}

/// Trains an iterative optimizer with its configured step-size rule.
pub fn train_iterative(kind: OptimizerKind, problem: &TrainProblem<'_>, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    match kind {
        OptimizerKind::FullNg => Err(Error::invalid("Full NG is trained by solve_full_ng")),
        OptimizerKind::SignGd => select_sign_lr(problem, cfg),
        _ => {
            let (precond, lr) = prepare(kind, problem.gram(), cfg.eig_floor)?;
            descend(problem, kind, &precond, lr, cfg.steps, |_, _| {})
        }
    }
}

/// `a* = (FᵀF + λ_reg·I)⁻¹ Fᵀy` on the unnormalized Gram.
pub fn solve_full_ng(problem: &TrainProblem<'_>, lambda_reg: f64) -> Result<TrainResult> {
    let a = ridge_solve(&problem.gram_raw, problem.fty.view(), lambda_reg)?;
    let train_residual_norm = problem.residual_norm(a.view());
    Ok(TrainResult {
        kind: OptimizerKind::FullNg,
        weights: a,
        lr_used: 0.0,
        train_residual_norm,
        steps_run: 1,
    })
}

/// Runs Sign-GD once per grid value and keeps the lowest training residual.
pub fn select_sign_lr(problem: &TrainProblem<'_>, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let runs = cfg.sign_lr_grid.iter().map(|&lr| {
        let r = descend(problem, OptimizerKind::SignGd, &Preconditioner::Identity, lr, cfg.steps, |_, _| {});
        (lr, r)
    });
    pick_lowest_residual(runs)
}

/// Lowest training residual among non-diverged runs; ties go to the smaller rate.
pub fn pick_lowest_residual(runs: impl IntoIterator<Item = (f64, Result<TrainResult>)>) -> Result<TrainResult> {
    let mut best: Option<TrainResult> = None;
    let mut first_divergence = None;
    for (lr, run) in runs {
        match run {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        r.train_residual_norm < b.train_residual_norm
                            || (r.train_residual_norm == b.train_residual_norm && lr < b.lr_used)
                    }
                };
                if better {
                    best = Some(r);
                }
            }
            Err(Error::Divergence { step }) => {
                first_divergence.get_or_insert(step);
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::Divergence {
        step: first_divergence.unwrap_or(0),
    })
}

/// Trains any of the five variants.
pub fn train(kind: OptimizerKind, problem: &TrainProblem<'_>, cfg: &TrainConfig) -> Result<TrainResult> {
    match kind {
        OptimizerKind::FullNg => solve_full_ng(problem, cfg.lambda_reg),
        _ => train_iterative(kind, problem, cfg),
    }
}
