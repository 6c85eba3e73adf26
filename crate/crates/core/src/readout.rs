//! Ridge-regression readout and error metrics.
//!
//! The readout solves `(X^T X + lambda I) w = X^T y` directly on the
//! (n_nodes + 1)-sized normal equations via a Cholesky factorization; the
//! systems here are tiny, so a dense symmetric solve is both exact enough
//! and fast. The ridge parameter applies uniformly, bias column included.

use crate::error::Error;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Row-major feature matrix with the constant bias column included as the
/// last column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DesignMatrix {
    /// Build from raw row-major data that already carries every feature
    /// column (no bias appended).
    pub fn from_raw(data: Vec<f64>, rows: usize, cols: usize) -> Result<DesignMatrix, Error> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch);
        }
        Ok(DesignMatrix { data, rows, cols })
    }

    /// Build from reservoir state rows, appending the constant 1.0 bias
    /// column.
    pub fn from_state_rows(states: &[f64], rows: usize, cols: usize) -> DesignMatrix {
        debug_assert_eq!(states.len(), rows * cols);
        let out_cols = cols + 1;
        let mut data = Vec::with_capacity(rows * out_cols);
        for r in 0..rows {
            data.extend_from_slice(&states[r * cols..(r + 1) * cols]);
            data.push(1.0);
        }
        DesignMatrix {
            data,
            rows,
            cols: out_cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of a contiguous row range.
    pub fn slice_rows(&self, range: core::ops::Range<usize>) -> DesignMatrix {
        DesignMatrix {
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
            rows: range.end - range.start,
            cols: self.cols,
        }
    }
}

/// Trained linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// One weight per feature column (last one multiplies the bias column).
    pub weights: Vec<f64>,
    /// Ridge parameter the weights were trained with.
    pub lambda: f64,
}

/// Solve `A x = b` for symmetric positive-definite `A` (row-major, n x n)
/// by Cholesky factorization. Fails with `SingularSystem` when a pivot is
/// not strictly positive.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>, Error> {
    // Factor A = L L^T in the lower triangle.
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::SingularSystem);
                }
                a[i * n + j] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    // Forward substitution L z = b.
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= a[i * n + k] * b[k];
        }
        b[i] = sum / a[i * n + i];
    }
    // Back substitution L^T x = z.
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= a[k * n + i] * b[k];
        }
        b[i] = sum / a[i * n + i];
    }
    Ok(b)
}

/// Train output weights on the design matrix: `(X^T X + lambda I) w = X^T y`.
pub fn ridge_train(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<ReadoutModel, Error> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch);
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::ConfigMismatch("lambda must be finite and >= 0".into()));
    }
    let n = x.cols();
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for r in 0..x.rows() {
        let row = x.row(r);
        let t = y[r];
        for i in 0..n {
            let xi = row[i];
            rhs[i] += xi * t;
            let gi = &mut gram[i * n..i * n + i + 1];
            for (j, g) in gi.iter_mut().enumerate() {
                *g += xi * row[j];
            }
        }
    }
    // Mirror the lower triangle and add the ridge.
    for i in 0..n {
        gram[i * n + i] += lambda;
        for j in 0..i {
            gram[j * n + i] = gram[i * n + j];
        }
    }
    let weights = cholesky_solve(gram, rhs, n)?;
    Ok(ReadoutModel { weights, lambda })
}

/// Apply the readout: `y_hat = X w`.
pub fn predict(x: &DesignMatrix, model: &ReadoutModel) -> Result<Vec<f64>, Error> {
    if x.cols() != model.weights.len() {
        return Err(Error::ShapeMismatch);
    }
    let mut out = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let mut acc = 0.0;
        for (xi, wi) in x.row(r).iter().zip(&model.weights) {
            acc += xi * wi;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Normalized mean square error: `mean((pred - target)^2) / var(target)`
/// with the population variance. 1.0 equals the trivial mean predictor.
pub fn nmse(pred: &[f64], target: &[f64]) -> Result<f64, Error> {
    if pred.len() != target.len() || pred.len() < 2 {
        return Err(Error::ShapeMismatch);
    }
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let var = target.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    Ok(mse / var)
}

/// Pick the ridge parameter minimizing validation NMSE over the grid, ties
/// broken toward larger lambda. Returns the winning lambda and the model
/// trained with it on the training split.
///
/// Candidates whose normal equations come out numerically singular are
/// skipped; `SingularSystem` is reported only when every candidate fails.
pub fn lambda_search(
    x_train: &DesignMatrix,
    y_train: &[f64],
    x_val: &DesignMatrix,
    y_val: &[f64],
    grid: &[f64],
) -> Result<(f64, ReadoutModel), Error> {
    if grid.is_empty() {
        return Err(Error::ConfigMismatch("lambda grid is empty".into()));
    }
    let mut lambdas: Vec<f64> = grid.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).expect("lambda grid contains NaN"));
    let mut best: Option<(f64, f64, ReadoutModel)> = None;
    for &lambda in &lambdas {
        let model = match ridge_train(x_train, y_train, lambda) {
            Ok(model) => model,
            Err(Error::SingularSystem) => continue,
            Err(other) => return Err(other),
        };
        let err = nmse(&predict(x_val, &model)?, y_val)?;
        if !err.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            // Ascending grid: taking <= lets the larger lambda win ties.
            Some((best_err, _, _)) => err <= *best_err,
        };
        if better {
            best = Some((err, lambda, model));
        }
    }
    match best {
        Some((_, lambda, model)) => Ok((lambda, model)),
        None => Err(Error::SingularSystem),
    }
}

/// Decade grid 1e-15 ... 1e-1 used when no explicit grid is configured.
/// The wide low end matters because the reservoir features are drop-port
/// powers in watts: at microwatt operating points the informative gram
/// eigenvalues sit far below 1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..15).map(|k| 10f64.powi(-15 + k)).collect()
}
