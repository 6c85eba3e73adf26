//! End-to-end evaluation of one task seed: dataset, reservoir run, readout
//! training and NMSE scoring. Sweep engines and the CLI build on this.

use crate::error::Error;
use crate::integrator::IntegratorConfig;
use crate::physics::MrrParams;
use crate::readout::{self, ReadoutModel};
use crate::tasks;
use crate::tdrc::{self, FeedbackConfig, FeedbackLine, TdrcConfig};
use alloc::vec::Vec;

/// Symbol budget of a run, consumed in warmup -> train -> test order. The
/// warmup symbols double as the reservoir transient discard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub warmup: usize,
    pub train: usize,
    pub test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            warmup: 100,
            train: 3000,
            test: 1000,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.warmup + self.train + self.test
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.train < 2 || self.test < 2 {
            return Err(Error::ConfigMismatch(
                "train and test splits need at least 2 symbols".into(),
            ));
        }
        Ok(())
    }
}

/// Readout training policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSpec {
    /// Ridge parameter used when `search` is off.
    pub lambda: f64,
    /// Search the grid on a validation tail of the training split.
    pub search: bool,
    /// Candidate ridge parameters.
    pub grid: Vec<f64>,
    /// Fraction of the training split held out for the search.
    pub validation_fraction: f64,
}

impl Default for ReadoutSpec {
    fn default() -> Self {
        ReadoutSpec {
            lambda: 1e-6,
            search: true,
            grid: readout::default_lambda_grid(),
            validation_fraction: 0.2,
        }
    }
}

impl ReadoutSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::ConfigMismatch("lambda must be finite and >= 0".into()));
        }
        if self.search {
            if self.grid.is_empty() {
                return Err(Error::ConfigMismatch("lambda grid is empty".into()));
            }
            if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
                return Err(Error::ConfigMismatch(
                    "validation_fraction must lie in (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Scores of one evaluated seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub train_nmse: f64,
    pub test_nmse: f64,
    /// Ridge parameter the final model was trained with.
    pub lambda: f64,
    /// Realized power modulation index of the encoded input.
    pub modulation_index: f64,
}

/// Full single-seed evaluation artifacts, for diagnostics and file export.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedEvaluation {
    pub run: SeedRun,
    pub model: ReadoutModel,
    pub states: tdrc::StateMatrix,
    pub dataset: tasks::TaskDataset,
    pub predictions_test: Vec<f64>,
}

/// Evaluate one seed and keep every intermediate artifact.
pub fn evaluate_seed_full(
    params: &MrrParams,
    tdrc_cfg: &TdrcConfig,
    feedback: Option<&FeedbackConfig>,
    icfg: &IntegratorConfig,
    split_spec: &SplitSpec,
    readout_spec: &ReadoutSpec,
    seed: u64,
) -> Result<SeedEvaluation, Error> {
    split_spec.validate()?;
    readout_spec.validate()?;
    tdrc_cfg.validate()?;
    icfg.validate()?;

    let dataset = tasks::narma10(seed, split_spec.total())?;
    let split = tasks::split(&dataset, split_spec.warmup, split_spec.train, split_spec.test)?;

    let mask = tdrc::generate_mask(tdrc_cfg.mask_seed, tdrc_cfg.n_nodes);
    let waveform = tdrc::encode(&dataset.inputs, &mask, tdrc_cfg, icfg.dt_s)?;
    let modulation_index = waveform.modulation_index();
    let line = feedback.map(|cfg| FeedbackLine::new(cfg, icfg.dt_s)).transpose()?;
    let states =
        tdrc::sample_reservoir(&waveform, params, tdrc_cfg, line, icfg, split_spec.warmup)?;

    // Row j of the trimmed matrix corresponds to symbol warmup + j.
    let design = states.design_matrix();
    let x_train = design.slice_rows(0..split_spec.train);
    let y_train = &dataset.targets[split.train.clone()];
    let x_test = design.slice_rows(split_spec.train..split_spec.train + split_spec.test);
    let y_test = &dataset.targets[split.test.clone()];

    let model = if readout_spec.search {
        let fit_rows = split_spec.train
            - ((split_spec.train as f64) * readout_spec.validation_fraction) as usize;
        let fit_rows = fit_rows.clamp(2, split_spec.train.saturating_sub(2));
        let x_fit = x_train.slice_rows(0..fit_rows);
        let x_val = x_train.slice_rows(fit_rows..split_spec.train);
        let (best_lambda, _) = readout::lambda_search(
            &x_fit,
            &y_train[..fit_rows],
            &x_val,
            &y_train[fit_rows..],
            &readout_spec.grid,
        )?;
        readout::ridge_train(&x_train, y_train, best_lambda)?
    } else {
        readout::ridge_train(&x_train, y_train, readout_spec.lambda)?
    };

    let train_pred = readout::predict(&x_train, &model)?;
    let test_pred = readout::predict(&x_test, &model)?;
    let train_nmse = readout::nmse(&train_pred, y_train)?;
    let test_nmse = readout::nmse(&test_pred, y_test)?;

    Ok(SeedEvaluation {
        run: SeedRun {
            seed,
            train_nmse,
            test_nmse,
            lambda: model.lambda,
            modulation_index,
        },
        model,
        states,
        dataset,
        predictions_test: test_pred,
    })
}

/// Evaluate one seed, returning only the scores.
pub fn evaluate_seed(
    params: &MrrParams,
    tdrc_cfg: &TdrcConfig,
    feedback: Option<&FeedbackConfig>,
    icfg: &IntegratorConfig,
    split_spec: &SplitSpec,
    readout_spec: &ReadoutSpec,
    seed: u64,
) -> Result<SeedRun, Error> {
    evaluate_seed_full(params, tdrc_cfg, feedback, icfg, split_spec, readout_spec, seed)
        .map(|full| full.run)
}

/// Average optical power for a dBm setting: `P[W] = 1e-3 * 10^(dBm/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * num_traits::Float::powf(10.0f64, dbm / 10.0)
}

/// Detuning axis value in GHz to the angular offset stored in [`MrrParams`].
pub fn detuning_ghz_to_rad_s(ghz: f64) -> f64 {
    2.0 * core::f64::consts::PI * ghz * 1e9
}
