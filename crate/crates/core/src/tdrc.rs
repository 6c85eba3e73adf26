//! Time-delay reservoir pipeline around the ring: masking, input encoding
//! into an optical power waveform, the through-to-add feedback delay line,
//! and drop-port sampling into the virtual-node state matrix.
//!
//! One symbol of the task drives the ring for `symbol_duration`; within it,
//! each of the `n_nodes` chips holds the masked, bias-offset input value for
//! `chip_duration`. The drop-port power at the final sample of each chip is
//! one virtual-node feature.

use crate::error::Error;
use crate::integrator::{steps_on_grid, IntegratorConfig, Stepper};
use crate::physics::{MrrParams, MrrState};
use crate::readout::DesignMatrix;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How the masked symbol value maps onto the optical carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingKind {
    /// Instantaneous power proportional to `u*m + beta` (default).
    PowerProportional,
    /// Field amplitude proportional to `u*m + beta`.
    FieldProportional,
}

/// Reservoir timing and encoding settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TdrcConfig {
    /// Virtual nodes per symbol.
    pub n_nodes: usize,
    /// Chip (virtual-node) duration, s.
    pub chip_duration_s: f64,
    /// Symbol duration, s; must equal `n_nodes * chip_duration_s` on the grid.
    pub symbol_duration_s: f64,
    /// Bias added to the masked input so the encoded power stays positive
    /// and the modulation index stays small.
    pub bias_beta: f64,
    /// Average optical input power, W.
    pub p_in_avg_w: f64,
    /// Seed for the node mask.
    pub mask_seed: u64,
    pub encoding: EncodingKind,
}

impl Default for TdrcConfig {
    fn default() -> Self {
        TdrcConfig {
            n_nodes: 50,
            chip_duration_s: 20e-12,
            symbol_duration_s: 1e-9,
            bias_beta: 8.0,
            p_in_avg_w: 1e-3,
            mask_seed: 42,
            encoding: EncodingKind::PowerProportional,
        }
    }
}

impl TdrcConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_nodes == 0 {
            return Err(Error::ConfigMismatch("n_nodes must be >= 1".into()));
        }
        for (name, v) in [
            ("chip_duration_s", self.chip_duration_s),
            ("symbol_duration_s", self.symbol_duration_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ConfigMismatch(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.p_in_avg_w >= 0.0) || !self.p_in_avg_w.is_finite() {
            return Err(Error::ConfigMismatch(format!(
                "p_in_avg_w must be >= 0, got {}",
                self.p_in_avg_w
            )));
        }
        if !self.bias_beta.is_finite() {
            return Err(Error::ConfigMismatch("bias_beta must be finite".into()));
        }
        Ok(())
    }
}

/// Through-to-add feedback loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    /// Loop delay, s.
    pub delay_s: f64,
    /// Propagation phase of the delay waveguide, rad.
    pub phase_rad: f64,
    /// Amplitude gain of the loop, in [0, 1]; 0 disables the feedback.
    pub gain: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            delay_s: 0.5e-9,
            phase_rad: 0.0,
            gain: 1.0,
        }
    }
}

/// Delay line from the through port to the add port.
///
/// The buffer holds one envelope sample per dt of loop delay, in whatever
/// field units the driving integration uses; its length stays constant
/// after initialization (one push and one pop per step).
#[derive(Debug, Clone)]
pub struct FeedbackLine {
    coupling: Complex64,
    dt_s: f64,
    delay_steps: usize,
    buffer: VecDeque<Complex64>,
}

impl FeedbackLine {
    /// Builds the line on the integration grid; the delay must be a
    /// positive integer number of steps.
    pub fn new(cfg: &FeedbackConfig, dt_s: f64) -> Result<FeedbackLine, Error> {
        if !(cfg.gain >= 0.0 && cfg.gain <= 1.0) {
            return Err(Error::ConfigMismatch(format!(
                "feedback gain must lie in [0, 1], got {}",
                cfg.gain
            )));
        }
        if !cfg.phase_rad.is_finite() {
            return Err(Error::ConfigMismatch("feedback phase must be finite".into()));
        }
        let delay_steps = steps_on_grid(cfg.delay_s, dt_s, "feedback delay")?;
        let mut buffer = VecDeque::with_capacity(delay_steps + 1);
        buffer.extend(core::iter::repeat(Complex64::new(0.0, 0.0)).take(delay_steps));
        Ok(FeedbackLine {
            coupling: Complex64::from_polar(cfg.gain, cfg.phase_rad),
            dt_s,
            delay_steps,
            buffer,
        })
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Push the through-port sample of the current step and return the
    /// add-port drives for this step and the next (`gain e^{i phi}` times
    /// the samples one delay in the past). Zeros until the line fills.
    #[inline]
    pub(crate) fn advance(&mut self, through_now: Complex64) -> (Complex64, Complex64) {
        let add_now = self.coupling * self.buffer[0];
        self.buffer.push_back(through_now);
        let add_next = self.coupling * self.buffer[1];
        self.buffer.pop_front();
        (add_now, add_next)
    }
}

/// Complex baseband input envelope on the dt grid, held constant per chip.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedWaveform {
    /// One envelope value per chip, sqrt(W).
    chip_values: Vec<Complex64>,
    samples_per_chip: usize,
    dt_s: f64,
    n_symbols: usize,
    chips_per_symbol: usize,
    modulation_index: f64,
    mean_power_w: f64,
}

impl EncodedWaveform {
    /// Arbitrary per-sample waveform (each sample is its own chip).
    pub fn from_samples(samples: Vec<Complex64>, dt_s: f64) -> EncodedWaveform {
        let n = samples.len();
        let (mean, mi) = power_stats(&samples);
        EncodedWaveform {
            chip_values: samples,
            samples_per_chip: 1,
            dt_s,
            n_symbols: n,
            chips_per_symbol: 1,
            modulation_index: mi,
            mean_power_w: mean,
        }
    }

    /// Constant envelope over `n_samples` steps.
    pub fn constant(e_in: Complex64, n_samples: usize, dt_s: f64) -> EncodedWaveform {
        EncodedWaveform {
            chip_values: alloc::vec![e_in; n_samples],
            samples_per_chip: 1,
            dt_s,
            n_symbols: n_samples,
            chips_per_symbol: 1,
            modulation_index: 0.0,
            mean_power_w: e_in.norm_sqr(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.chip_values.len() * self.samples_per_chip
    }

    pub fn n_chips(&self) -> usize {
        self.chip_values.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn chips_per_symbol(&self) -> usize {
        self.chips_per_symbol
    }

    pub fn samples_per_chip(&self) -> usize {
        self.samples_per_chip
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Envelope value of chip `idx`, sqrt(W).
    #[inline]
    pub fn chip(&self, idx: usize) -> Complex64 {
        self.chip_values[idx]
    }

    /// Envelope sample at step `idx` (piecewise constant per chip).
    pub fn sample(&self, idx: usize) -> Complex64 {
        self.chip_values[idx / self.samples_per_chip]
    }

    /// Realized power modulation index `(max - min) / (max + min)`.
    pub fn modulation_index(&self) -> f64 {
        self.modulation_index
    }

    /// Time-average of |sample|^2, W.
    pub fn mean_power_w(&self) -> f64 {
        self.mean_power_w
    }
}

fn power_stats(samples: &[Complex64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in samples {
        let p = s.norm_sqr();
        sum += p;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let mi = if hi + lo > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 };
    (sum / samples.len() as f64, mi)
}

/// Node mask: `n_nodes` i.i.d. uniform values on [0, 1], deterministic per
/// seed, reused for every symbol.
pub fn generate_mask(seed: u64, n_nodes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::from(0.0..1.0);
    (0..n_nodes).map(|_| dist.sample(&mut rng)).collect()
}

/// Encode a symbol sequence into the pump envelope.
///
/// Per symbol `k` and chip `j` the instantaneous power is proportional to
/// `u[k] * mask[j] + beta`, held constant over the chip, then globally
/// normalized so the time-averaged power equals `p_in_avg_w`. The envelope
/// is the positive square root (zero phase).
pub fn encode(
    u: &[f64],
    mask: &[f64],
    cfg: &TdrcConfig,
    dt_s: f64,
) -> Result<EncodedWaveform, Error> {
    cfg.validate()?;
    if mask.len() != cfg.n_nodes {
        return Err(Error::ShapeMismatch);
    }
    let samples_per_chip = steps_on_grid(cfg.chip_duration_s, dt_s, "chip duration")?;
    let steps_per_symbol = steps_on_grid(cfg.symbol_duration_s, dt_s, "symbol duration")?;
    if steps_per_symbol != samples_per_chip * cfg.n_nodes {
        return Err(Error::ConfigMismatch(format!(
            "symbol duration is {steps_per_symbol} steps but n_nodes * chip = {} steps",
            samples_per_chip * cfg.n_nodes
        )));
    }

    let n_chips = u.len() * cfg.n_nodes;
    let mut weights = Vec::with_capacity(n_chips);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &uk in u {
        for &mj in mask {
            let w = uk * mj + cfg.bias_beta;
            if !(w > 0.0) {
                return Err(Error::BiasTooSmall);
            }
            sum += w;
            sum_sq += w * w;
            weights.push(w);
        }
    }

    let mut chip_values = Vec::with_capacity(n_chips);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    match cfg.encoding {
        EncodingKind::PowerProportional => {
            // P = scale * w, mean(P) = p_in_avg.
            let scale = if sum > 0.0 { cfg.p_in_avg_w * n_chips as f64 / sum } else { 0.0 };
            for &w in &weights {
                let p = scale * w;
                lo = lo.min(p);
                hi = hi.max(p);
                chip_values.push(Complex64::new((p).sqrt(), 0.0));
            }
        }
        EncodingKind::FieldProportional => {
            // E = sqrt(scale) * w, mean(E^2) = p_in_avg.
            let scale = if sum_sq > 0.0 { cfg.p_in_avg_w * n_chips as f64 / sum_sq } else { 0.0 };
            let root = scale.sqrt();
            for &w in &weights {
                let e = root * w;
                let p = e * e;
                lo = lo.min(p);
                hi = hi.max(p);
                chip_values.push(Complex64::new(e, 0.0));
            }
        }
    }

    let modulation_index = if n_chips > 0 && hi + lo > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 };
    let mean_power_w = if n_chips > 0 {
        chip_values.iter().map(|c| c.norm_sqr()).sum::<f64>() / n_chips as f64
    } else {
        0.0
    };
    Ok(EncodedWaveform {
        chip_values,
        samples_per_chip,
        dt_s,
        n_symbols: u.len(),
        chips_per_symbol: cfg.n_nodes,
        modulation_index,
        mean_power_w,
    })
}

/// Reservoir feature matrix: one row per retained symbol, one column per
/// virtual node, entries are drop-port powers in W.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl StateMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy with a constant 1.0 bias column appended, ready for the readout.
    pub fn design_matrix(&self) -> DesignMatrix {
        DesignMatrix::from_state_rows(&self.data, self.rows, self.cols)
    }
}

/// Drive the ring with the encoded sequence and collect virtual-node
/// samples.
///
/// The feedback loop (when given) injects `gain e^{i phi} E_through(t -
/// delay)` at the add port, zeros before the line fills. The drop-port
/// power at the final dt sample of each chip becomes one matrix entry; the
/// first `warmup_symbols` rows are discarded.
pub fn run_reservoir(
    u: &[f64],
    params: &MrrParams,
    cfg: &TdrcConfig,
    feedback: Option<FeedbackLine>,
    icfg: &IntegratorConfig,
    warmup_symbols: usize,
) -> Result<StateMatrix, Error> {
    if warmup_symbols > u.len() {
        return Err(Error::OutOfRange);
    }
    let mask = generate_mask(cfg.mask_seed, cfg.n_nodes);
    let waveform = encode(u, &mask, cfg, icfg.dt_s)?;
    sample_reservoir(&waveform, params, cfg, feedback, icfg, warmup_symbols)
}

/// As [`run_reservoir`] but driven by an already encoded waveform.
pub fn sample_reservoir(
    waveform: &EncodedWaveform,
    params: &MrrParams,
    cfg: &TdrcConfig,
    feedback: Option<FeedbackLine>,
    icfg: &IntegratorConfig,
    warmup_symbols: usize,
) -> Result<StateMatrix, Error> {
    let n_symbols = waveform.n_symbols();
    if warmup_symbols > n_symbols {
        return Err(Error::OutOfRange);
    }
    let spc = waveform.samples_per_chip();
    let chips_per_symbol = waveform.chips_per_symbol();
    if chips_per_symbol != cfg.n_nodes {
        return Err(Error::ConfigMismatch(
            "waveform chips per symbol does not match n_nodes".into(),
        ));
    }
    let rows = n_symbols - warmup_symbols;
    let mut data = Vec::with_capacity(rows * cfg.n_nodes);
    let mut stepper = Stepper::new(MrrState::ZERO, waveform, params, icfg, feedback)?;
    let n = stepper.steps_total();
    let skip_chips = warmup_symbols * chips_per_symbol;
    for i in 0..n {
        // Final dt sample inside each chip is the node observation.
        if i % spc == spc - 1 && i / spc >= skip_chips {
            data.push(stepper.drop_power_w());
        }
        stepper.step()?;
    }
    debug_assert_eq!(data.len(), rows * cfg.n_nodes);
    Ok(StateMatrix {
        data,
        rows,
        cols: cfg.n_nodes,
    })
}
