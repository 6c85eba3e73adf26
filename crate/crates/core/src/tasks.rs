//! NARMA-10 dataset generation and train/test splitting.

use crate::error::Error;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bound beyond which the recurrence is declared diverged.
const DIVERGENCE_LIMIT: f64 = 1e3;

/// One benchmark realization: input sequence, target sequence, seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    /// Input samples, i.i.d. uniform on [0, 0.5].
    pub inputs: Vec<f64>,
    /// Target samples; `targets[k]` is what the readout predicts from the
    /// reservoir row of symbol `k`.
    pub targets: Vec<f64>,
    pub seed: u64,
}

/// Tenth-order NARMA recurrence over a given input sequence:
///
/// ```text
/// y[k+1] = 0.3 y[k] + 0.05 y[k] sum_{i=0}^{9} y[k-i] + 1.5 u[k] u[k-9] + 0.1
/// ```
///
/// with `y[0..=9] = 0`. Returns `Diverged` when |y| exceeds 1e3 (the known
/// instability of the benchmark for unlucky inputs).
pub fn narma10_from_inputs(u: &[f64]) -> Result<Vec<f64>, Error> {
    let n = u.len();
    let mut y = vec![0.0f64; n];
    for k in 9..n.saturating_sub(1) {
        let window: f64 = y[k - 9..=k].iter().sum();
        let next = 0.3 * y[k] + 0.05 * y[k] * window + 1.5 * u[k] * u[k - 9] + 0.1;
        if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { index: k + 1 });
        }
        y[k + 1] = next;
    }
    Ok(y)
}

/// Generate a seeded NARMA-10 dataset of the given length.
pub fn narma10(seed: u64, length: usize) -> Result<TaskDataset, Error> {
    if length <= 10 {
        return Err(Error::ConfigMismatch("NARMA-10 needs length > 10".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::from(0.0..0.5);
    let inputs: Vec<f64> = (0..length).map(|_| dist.sample(&mut rng)).collect();
    let targets = narma10_from_inputs(&inputs)?;
    Ok(TaskDataset {
        inputs,
        targets,
        seed,
    })
}

/// Contiguous, non-overlapping index ranges in warmup -> train -> test order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub warmup: Range<usize>,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Partition the first `warmup + train + test` samples of the dataset.
pub fn split(dataset: &TaskDataset, warmup: usize, train: usize, test: usize) -> Result<Split, Error> {
    let total = warmup + train + test;
    if total > dataset.inputs.len() {
        return Err(Error::OutOfRange);
    }
    Ok(Split {
        warmup: 0..warmup,
        train: warmup..warmup + train,
        test: warmup + train..total,
    })
}
