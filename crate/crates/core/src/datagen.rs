//! Generative model: Gaussian inputs with a power-law diagonal covariance,
//! a ReLU random-feature teacher, and the student's ReLU feature matrix.
//!
//! Randomness comes from ChaCha20 streams (see [`derive_stream`]); standard
//! normal draws use `rand_distr::StandardNormal` (ziggurat), so a given
//! stream yields bit-identical samples within one build.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub dim: usize,
    pub spectral_exponent: f64,
}

impl SpectrumConfig {
    pub fn new(dim: usize, spectral_exponent: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if !(spectral_exponent > 0.0) || !spectral_exponent.is_finite() {
            return Err(Error::invalid(format!(
                "spectral exponent must be positive and finite, got {spectral_exponent}"
            )));
        }
        Ok(SpectrumConfig {
            dim,
            spectral_exponent,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherConfig {
    pub width: usize,
    pub source_exponent: f64,
}

impl TeacherConfig {
    pub fn new(width: usize, source_exponent: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("teacher width must be at least 1"));
        }
        if !(source_exponent > 0.0) || !source_exponent.is_finite() {
            return Err(Error::invalid(format!(
                "source exponent must be positive and finite, got {source_exponent}"
            )));
        }
        Ok(TeacherConfig {
            width,
            source_exponent,
        })
    }
}

/// `f*(x) = Σ_k v_k · relu(w*_k · x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    /// One row per teacher feature, `width × dim`.
    pub weights: Array2<f64>,
    /// `v_k = k^{-b/2}`.
    pub coeffs: Array1<f64>,
}

impl Teacher {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        feed_floats(&mut h, self.weights.iter());
        feed_floats(&mut h, self.coeffs.iter());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

/// One realized problem instance shared by every optimizer.
#[derive(Debug, Clone)]
pub struct DatasetCell {
    pub f_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub f_test: Array2<f64>,
    pub y_test: Array1<f64>,
    pub norm_stats: NormStats,
}

impl DatasetCell {
    /// SHA-256 over the training features and normalized training targets.
    pub fn problem_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.f_train.nrows() as u64).to_le_bytes());
        h.update((self.f_train.ncols() as u64).to_le_bytes());
        feed_floats(&mut h, self.f_train.iter());
        feed_floats(&mut h, self.y_train.iter());
        hex::encode(h.finalize())
    }
}

fn feed_floats<'a>(h: &mut Sha256, it: impl Iterator<Item = &'a f64>) {
    for v in it {
        h.update(v.to_le_bytes());
    }
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Teacher,
    TrainInputs,
    TestInputs,
    StudentWeights,
}

impl Purpose {
    fn tag(self) -> &'static [u8] {
        match self {
            Purpose::Teacher => b"teacher",
            Purpose::TrainInputs => b"train_inputs",
            Purpose::TestInputs => b"test_inputs",
            Purpose::StudentWeights => b"student_weights",
        }
    }
}

/// Independent ChaCha20 stream keyed by SHA-256 of
/// `(master_seed, purpose, coords...)`.
pub fn derive_stream(master_seed: u64, purpose: Purpose, coords: &[u64]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"optscale/stream/v1");
    h.update(master_seed.to_le_bytes());
    h.update((purpose.tag().len() as u64).to_le_bytes());
    h.update(purpose.tag());
    h.update((coords.len() as u64).to_le_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let key: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(key)
}

/// `λ_i = i^{-(1+s)}` for `i = 1..=D`.
pub fn power_law_eigenvalues(cfg: &SpectrumConfig) -> Result<Vec<f64>> {
    let cfg = SpectrumConfig::new(cfg.dim, cfg.spectral_exponent)?;
    let p = -(1.0 + cfg.spectral_exponent);
    Ok((1..=cfg.dim).map(|i| (i as f64).powf(p)).collect())
}

/// Rows drawn from `N(0, diag(eigs))`, filled in row-major order.
pub fn sample_inputs<R: Rng + ?Sized>(rng: &mut R, n: usize, eigs: &[f64]) -> Result<Array2<f64>> {
    if eigs.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid("input eigenvalues must be positive and finite"));
    }
    let scales: Vec<f64> = eigs.iter().map(|l| l.sqrt()).collect();
    let d = eigs.len();
    let mut x = Array2::zeros((n, d));
    for mut row in x.rows_mut() {
        for (v, s) in row.iter_mut().zip(&scales) {
            let z: f64 = rng.sample(StandardNormal);
            *v = s * z;
        }
    }
    Ok(x)
}

/// `rows × dim` weights with i.i.d. `N(0, 1/dim)` entries.
pub fn sample_random_weights<R: Rng + ?Sized>(rng: &mut R, rows: usize, dim: usize) -> Array2<f64> {
    let scale = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_simple_fn((rows, dim), || {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

pub fn sample_teacher<R: Rng + ?Sized>(rng: &mut R, cfg: &TeacherConfig, dim: usize) -> Result<Teacher> {
    let cfg = TeacherConfig::new(cfg.width, cfg.source_exponent)?;
    if dim == 0 {
        return Err(Error::invalid("input dimension must be at least 1"));
    }
    let weights = sample_random_weights(rng, cfg.width, dim);
    let half = -cfg.source_exponent / 2.0;
    let coeffs = Array1::from_iter((1..=cfg.width).map(|k| (k as f64).powf(half)));
    Ok(Teacher { weights, coeffs })
}

pub fn teacher_targets(teacher: &Teacher, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let pre = relu_features(x, teacher.weights.view())?;
    Ok(pre.dot(&teacher.coeffs))
}

/// `F_ij = max(0, x_i · w_j)` for student weights `w` of shape `N × D`.
pub fn feature_matrix(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    relu_features(x, w)
}

fn relu_features(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.ncols() {
        return Err(Error::invalid(format!(
            "inner dimension mismatch: inputs have {} columns, weights have {}",
            x.ncols(),
            w.ncols()
        )));
    }
    let mut f = x.dot(&w.t());
    f.mapv_inplace(|v| v.max(0.0));
    Ok(f)
}

/// Centers and scales both splits with the training split's mean and
/// population standard deviation.
pub fn normalize_targets(
    y_train_raw: ArrayView1<'_, f64>,
    y_test_raw: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>, NormStats)> {
    let n = y_train_raw.len();
    if n < 2 {
        return Err(Error::invalid("normalization needs at least two training targets"));
    }
    let mean = y_train_raw.sum() / n as f64;
    let var = y_train_raw.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let scale = y_train_raw.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    // Constant targets leave only rounding noise around the mean.
    if !std.is_finite() || std <= 64.0 * f64::EPSILON * scale || std == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let tr = y_train_raw.mapv(|y| (y - mean) / std);
    let te = y_test_raw.mapv(|y| (y - mean) / std);
    Ok((tr, te, NormStats { mean, std }))
}

/// `n_train = min(50000, max(10000, 20·N))`.
pub fn train_size(width: usize) -> usize {
    (20 * width).clamp(10_000, 50_000)
}

/// Per-cell streams for [`realize_cell`].
pub struct CellStreams<R> {
    pub train_inputs: R,
    pub test_inputs: R,
    pub student_weights: R,
}

/// Samples train/test inputs, targets and the student feature matrices.
pub fn realize_cell<R: Rng>(
    teacher: &Teacher,
    eigs: &[f64],
    width: usize,
    n_train: usize,
    n_test: usize,
    mut streams: CellStreams<R>,
) -> Result<DatasetCell> {
    if width == 0 || n_train < 2 || n_test == 0 {
        return Err(Error::invalid("cell needs N ≥ 1, n_train ≥ 2 and n_test ≥ 1"));
    }
    let x_train = sample_inputs(&mut streams.train_inputs, n_train, eigs)?;
    let x_test = sample_inputs(&mut streams.test_inputs, n_test, eigs)?;
    let y_train_raw = teacher_targets(teacher, x_train.view())?;
    let y_test_raw = teacher_targets(teacher, x_test.view())?;
    let (y_train, y_test, norm_stats) = normalize_targets(y_train_raw.view(), y_test_raw.view())?;

    let w = sample_random_weights(&mut streams.student_weights, width, eigs.len());
    let f_train = feature_matrix(x_train.view(), w.view())?;
    drop(x_train);
    let f_test = feature_matrix(x_test.view(), w.view())?;
    Ok(DatasetCell {
        f_train,
        y_train,
        f_test,
        y_test,
        norm_stats,
    })
}

/// Column-wise sample variance, used by diagnostics and tests.
pub fn column_variances(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.var_axis(Axis(0), 0.0)
}
