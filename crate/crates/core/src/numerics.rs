//! Dense real linear algebra and least-squares primitives.
//!
//! Matrices are `ndarray` arrays. The symmetric eigensolver and Cholesky
//! factorization are delegated to `nalgebra`; everything here is a pure
//! function of its arguments.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Square matrix whose stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    /// Wraps `a`, rejecting non-square or not exactly symmetric input.
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (rows, cols) = a.dim();
        if rows == 0 || rows != cols {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            for j in (i + 1)..rows {
                if a[[i, j]] != a[[j, i]] && !(a[[i, j]].is_nan() && a[[j, i]].is_nan()) {
                    return Err(Error::invalid(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        Ok(SymMatrix(a))
    }

    /// Replaces `a` by `(a + aᵀ) / 2`, which is exactly symmetric in floating point.
    pub fn symmetrize(mut a: Array2<f64>) -> Result<Self> {
        let (rows, cols) = a.dim();
        if rows == 0 || rows != cols {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            for j in (i + 1)..rows {
                let m = 0.5 * (a[[i, j]] + a[[j, i]]);
                a[[i, j]] = m;
                a[[j, i]] = m;
            }
        }
        Ok(SymMatrix(a))
    }

    pub fn identity(order: usize) -> Self {
        SymMatrix(Array2::eye(order.max(1)))
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("diagonal must be non-empty"));
        }
        Ok(SymMatrix(Array2::from_diag(&ArrayView1::from(diag))))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn diag(&self) -> Array1<f64> {
        self.0.diag().to_owned()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        let n = self.order();
        // Symmetric, so row-major and column-major orderings coincide.
        DMatrix::from_iterator(n, n, self.0.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, sorted descending.
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Array2<f64>,
}

impl EigenDecomposition {
    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    /// `V · diag(f(values)) · Vᵀ`, symmetrized.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let scale: Array1<f64> = self.values.mapv(f);
        let scaled = &self.vectors * &scale.insert_axis(Axis(0));
        let out = scaled.dot(&self.vectors.t());
        SymMatrix::symmetrize(out).expect("square by construction")
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_values(|v| v)
    }
}

fn check_finite(a: &SymMatrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

/// Full symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    check_finite(a)?;
    let n = a.order();
    let max_iter = 64 * n + 1000;
    let eig = SymmetricEigen::try_new(a.to_nalgebra(), f64::EPSILON, max_iter).ok_or_else(|| {
        Error::NumericFailure {
            reason: "symmetric eigensolver did not converge".into(),
            iterations: max_iter,
        }
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, sorted descending. Cheaper than [`sym_eig`].
pub fn sym_eigenvalues(a: &SymMatrix) -> Result<Array1<f64>> {
    check_finite(a)?;
    let mut vals: Vec<f64> = a.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    Ok(Array1::from(vals))
}

/// Solves `(G + lambda_reg·I) x = rhs` by Cholesky factorization.
pub fn ridge_solve(g: &SymMatrix, rhs: ArrayView1<'_, f64>, lambda_reg: f64) -> Result<Array1<f64>> {
    check_finite(g)?;
    let n = g.order();
    if rhs.len() != n {
        return Err(Error::invalid(format!(
            "right-hand side has length {}, system has order {n}",
            rhs.len()
        )));
    }
    if !(lambda_reg >= 0.0) || !lambda_reg.is_finite() {
        return Err(Error::invalid(format!("lambda_reg must be a finite nonnegative real, got {lambda_reg}")));
    }
    let mut m = g.to_nalgebra();
    for i in 0..n {
        m[(i, i)] += lambda_reg;
    }
    let chol = Cholesky::new(m).ok_or_else(|| Error::NumericFailure {
        reason: "Cholesky factorization failed: shifted Gram matrix is not positive definite".into(),
        iterations: 0,
    })?;
    let b = DVector::from_iterator(n, rhs.iter().copied());
    let x = chol.solve(&b);
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Flooring rule for small eigenvalues before inverting a Gram spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigFloor {
    /// Floor at this multiple of the largest eigenvalue.
    Relative(f64),
    Absolute(f64),
}

impl Default for EigFloor {
    fn default() -> Self {
        EigFloor::Relative(1e-12)
    }
}

impl EigFloor {
    pub fn resolve(self, largest: f64) -> f64 {
        match self {
            EigFloor::Relative(r) => r * largest,
            EigFloor::Absolute(a) => a,
        }
    }
}

/// `K^{-1/2}` with eigenvalues clamped from below at `eig_floor`.
pub fn spd_inv_sqrt(k: &SymMatrix, eig_floor: f64) -> Result<SymMatrix> {
    let eig = sym_eig(k)?;
    inv_sqrt_from_eig(&eig, eig_floor)
}

pub fn inv_sqrt_from_eig(eig: &EigenDecomposition, eig_floor: f64) -> Result<SymMatrix> {
    if !(eig_floor > 0.0) {
        return Err(Error::invalid(format!("eig_floor must be positive, got {eig_floor}")));
    }
    if eig.largest() < eig_floor {
        return Err(Error::DegenerateSpectrum(format!(
            "all eigenvalues below floor {eig_floor:e}"
        )));
    }
    Ok(eig.map_values(|v| v.max(eig_floor).powf(-0.5)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope, from the residual variance with n−2 dof.
    pub slope_se: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Ordinary least squares for `y = intercept + slope·x`.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "xs and ys differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::invalid("OLS needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("OLS input has non-finite values"));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::invalid("OLS abscissae are all identical"));
    }

    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = (y - y_mean) - slope * (x - x_mean);
            r * r
        })
        .sum();

    let r2 = if n == 2 || ss_res == 0.0 || syy == 0.0 {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    // Two points leave no residual degrees of freedom; the line interpolates.
    let slope_se = if n == 2 {
        0.0
    } else {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    };

    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        r2,
        n_points: n,
    })
}
