//! Run configuration: TOML schemas for the run file and the device
//! constants file, CLI override hooks, and fail-fast resolution into the
//! core types. Every module's invariants are checked here before any
//! computation starts.

use crate::error::AppError;
use ring_rc_core::integrator::IntegratorConfig;
use ring_rc_core::physics::MrrParams;
use ring_rc_core::pipeline::{dbm_to_watts, detuning_ghz_to_rad_s, ReadoutSpec, SplitSpec};
use ring_rc_core::readout;
use ring_rc_core::tdrc::{EncodingKind, FeedbackConfig, TdrcConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Device constants file: one key per ring parameter, SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub omega_p: f64,
    #[serde(default)]
    pub delta_omega: f64,
    pub tau_c: f64,
    pub alpha: f64,
    pub tau_fc: f64,
    pub tau_th: f64,
    pub n_si: f64,
    pub fcd_coefficient: f64,
    pub thermo_optic_coefficient: f64,
    pub beta_tpa: f64,
    pub sigma_fca: f64,
    pub specific_heat: f64,
    pub mass: f64,
    pub fca_confinement: f64,
    pub tpa_confinement: f64,
    pub thermal_confinement: f64,
    pub fca_volume: f64,
    pub tpa_volume: f64,
    #[serde(default = "one")]
    pub absorption_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl DeviceFile {
    pub fn into_params(self) -> MrrParams {
        MrrParams {
            omega_p: self.omega_p,
            delta_omega: self.delta_omega,
            tau_c: self.tau_c,
            alpha: self.alpha,
            tau_fc: self.tau_fc,
            tau_th: self.tau_th,
            n_si: self.n_si,
            fcd_coefficient: self.fcd_coefficient,
            thermo_optic_coefficient: self.thermo_optic_coefficient,
            beta_tpa: self.beta_tpa,
            sigma_fca: self.sigma_fca,
            specific_heat: self.specific_heat,
            mass: self.mass,
            fca_confinement: self.fca_confinement,
            tpa_confinement: self.tpa_confinement,
            thermal_confinement: self.thermal_confinement,
            fca_volume: self.fca_volume,
            tpa_volume: self.tpa_volume,
            absorption_fraction: self.absorption_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    /// Device file path, resolved relative to the run config file.
    pub path: String,
}

impl Default for DeviceSection {
    fn default() -> Self {
        DeviceSection {
            path: "device.toml".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub detuning_ghz: f64,
    pub pin_dbm: f64,
    pub seed: u64,
    /// Optional device overrides for single runs (presets).
    pub tau_fc_s: Option<f64>,
    pub tau_th_s: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            detuning_ghz: -50.0,
            pin_dbm: -5.0,
            seed: 0,
            tau_fc_s: None,
            tau_th_s: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    pub warmup_symbols: usize,
    pub train_symbols: usize,
    pub test_symbols: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            warmup_symbols: 100,
            train_symbols: 3000,
            test_symbols: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdrcSection {
    pub n_nodes: usize,
    pub chip_duration_s: f64,
    pub symbol_duration_s: f64,
    pub bias_beta: f64,
    pub mask_seed: u64,
    /// "power" or "field".
    pub encoding: String,
}

impl Default for TdrcSection {
    fn default() -> Self {
        TdrcSection {
            n_nodes: 50,
            chip_duration_s: 20e-12,
            symbol_duration_s: 1e-9,
            bias_beta: 8.0,
            mask_seed: 42,
            encoding: "power".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackSection {
    pub enabled: bool,
    pub delay_s: f64,
    pub phase_rad: f64,
    pub gain: f64,
}

impl Default for FeedbackSection {
    fn default() -> Self {
        FeedbackSection {
            enabled: true,
            delay_s: 0.5e-9,
            phase_rad: 0.0,
            gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub dt_s: f64,
    pub record_stride: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            dt_s: 1e-12,
            record_stride: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSection {
    pub lambda: f64,
    pub search: bool,
    /// Empty list selects the built-in decade grid.
    pub lambda_grid: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        ReadoutSection {
            lambda: 1e-6,
            search: true,
            lambda_grid: Vec::new(),
            validation_fraction: 0.2,
        }
    }
}

/// Uniform axis: `points` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>, AppError> {
        if self.points == 0 {
            return Err(AppError::config("axis needs at least one point"));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        if !(self.max > self.min) {
            return Err(AppError::config(format!(
                "axis max {} must exceed min {}",
                self.max, self.min
            )));
        }
        let span = self.max - self.min;
        Ok((0..self.points)
            .map(|i| self.min + span * i as f64 / (self.points - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub detuning_ghz: AxisSpec,
    pub pin_dbm: AxisSpec,
    pub tau_fc_s: Vec<f64>,
    pub tau_th_s: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            detuning_ghz: AxisSpec {
                min: -200.0,
                max: 200.0,
                points: 41,
            },
            pin_dbm: AxisSpec {
                min: -20.0,
                max: 20.0,
                points: 41,
            },
            tau_fc_s: vec![1e-8],
            tau_th_s: vec![5e-8],
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct WorkersSection {
    /// 0 selects RING_RC_THREADS or, failing that, all cores.
    pub count: usize,
}

/// On-disk run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub device: DeviceSection,
    pub run: RunSection,
    pub task: TaskSection,
    pub tdrc: TdrcSection,
    pub feedback: FeedbackSection,
    pub integrator: IntegratorSection,
    pub readout: ReadoutSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub workers: WorkersSection,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::config(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| AppError::config(format!("config file {}: {e}", path.display())))
    }
}

/// Semantic content covered by the config hash: everything that affects
/// record values. Execution parameters (worker count, output paths) are
/// excluded so reruns with different parallelism hash identically.
#[derive(Debug, Clone, Serialize)]
struct ConfigEcho<'a> {
    device: &'a MrrParams,
    run: &'a RunSection,
    task: &'a TaskSection,
    tdrc: &'a TdrcSection,
    feedback: &'a FeedbackSection,
    integrator: &'a IntegratorSection,
    readout: &'a ReadoutSection,
    sweep: &'a SweepSection,
}

/// Fully resolved, validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Device parameters with the run-point detuning and tau presets applied.
    pub params: MrrParams,
    pub tdrc: TdrcConfig,
    pub feedback: Option<FeedbackConfig>,
    pub integrator: IntegratorConfig,
    pub split: SplitSpec,
    pub readout: ReadoutSpec,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub config_sha256: String,
    /// Pretty JSON echo of the hashed semantic content.
    pub echo_json: String,
}

impl Resolved {
    pub fn from_file(path: &Path) -> Result<Resolved, AppError> {
        let cfg = ConfigFile::load(path)?;
        resolve(cfg, path.parent().unwrap_or(Path::new(".")))
    }
}

fn parse_encoding(s: &str) -> Result<EncodingKind, AppError> {
    match s {
        "power" => Ok(EncodingKind::PowerProportional),
        "field" => Ok(EncodingKind::FieldProportional),
        other => Err(AppError::config(format!(
            "unknown encoding '{other}' (expected \"power\" or \"field\")"
        ))),
    }
}

/// Resolve and validate a loaded configuration. `base_dir` anchors the
/// device file path.
pub fn resolve(cfg: ConfigFile, base_dir: &Path) -> Result<Resolved, AppError> {
    let device_path = {
        let p = PathBuf::from(&cfg.device.path);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };
    let device_text = std::fs::read_to_string(&device_path).map_err(|e| {
        AppError::config(format!(
            "cannot read device file {}: {e}",
            device_path.display()
        ))
    })?;
    let device: DeviceFile = toml::from_str(&device_text)
        .map_err(|e| AppError::config(format!("device file {}: {e}", device_path.display())))?;

    let mut params = device.into_params();
    params.delta_omega = detuning_ghz_to_rad_s(cfg.run.detuning_ghz);
    if let Some(tau) = cfg.run.tau_fc_s {
        params.tau_fc = tau;
    }
    if let Some(tau) = cfg.run.tau_th_s {
        params.tau_th = tau;
    }
    params.validate().map_err(AppError::from)?;

    let tdrc = TdrcConfig {
        n_nodes: cfg.tdrc.n_nodes,
        chip_duration_s: cfg.tdrc.chip_duration_s,
        symbol_duration_s: cfg.tdrc.symbol_duration_s,
        bias_beta: cfg.tdrc.bias_beta,
        p_in_avg_w: dbm_to_watts(cfg.run.pin_dbm),
        mask_seed: cfg.tdrc.mask_seed,
        encoding: parse_encoding(&cfg.tdrc.encoding)?,
    };
    tdrc.validate().map_err(AppError::from)?;

    let integrator = IntegratorConfig {
        dt_s: cfg.integrator.dt_s,
        record_stride: cfg.integrator.record_stride,
    };
    integrator.validate().map_err(AppError::from)?;

    let feedback = if cfg.feedback.enabled {
        let fb = FeedbackConfig {
            delay_s: cfg.feedback.delay_s,
            phase_rad: cfg.feedback.phase_rad,
            gain: cfg.feedback.gain,
        };
        // Fail fast on delay/gain problems.
        ring_rc_core::tdrc::FeedbackLine::new(&fb, integrator.dt_s).map_err(AppError::from)?;
        Some(fb)
    } else {
        None
    };

    let split = SplitSpec {
        warmup: cfg.task.warmup_symbols,
        train: cfg.task.train_symbols,
        test: cfg.task.test_symbols,
    };
    split.validate().map_err(AppError::from)?;

    let readout_spec = ReadoutSpec {
        lambda: cfg.readout.lambda,
        search: cfg.readout.search,
        grid: if cfg.readout.lambda_grid.is_empty() {
            readout::default_lambda_grid()
        } else {
            cfg.readout.lambda_grid.clone()
        },
        validation_fraction: cfg.readout.validation_fraction,
    };
    readout_spec.validate().map_err(AppError::from)?;

    validate_sweep(&cfg.sweep)?;

    let echo = ConfigEcho {
        device: &params,
        run: &cfg.run,
        task: &cfg.task,
        tdrc: &cfg.tdrc,
        feedback: &cfg.feedback,
        integrator: &cfg.integrator,
        readout: &cfg.readout,
        sweep: &cfg.sweep,
    };
    let echo_json = serde_json::to_string_pretty(&echo).expect("config echo serializes");
    let config_sha256 = {
        let mut h = Sha256::new();
        h.update(echo_json.as_bytes());
        hex_string(&h.finalize())
    };

    Ok(Resolved {
        params,
        tdrc,
        feedback,
        integrator,
        split,
        readout: readout_spec,
        run: cfg.run,
        sweep: cfg.sweep,
        output_dir: PathBuf::from(cfg.output.dir.as_deref().unwrap_or("out")),
        workers: cfg.workers.count,
        config_sha256,
        echo_json,
    })
}

fn validate_sweep(sweep: &SweepSection) -> Result<(), AppError> {
    sweep.detuning_ghz.values()?;
    sweep.pin_dbm.values()?;
    for (name, axis) in [("tau_fc_s", &sweep.tau_fc_s), ("tau_th_s", &sweep.tau_th_s)] {
        if axis.is_empty() {
            return Err(AppError::config(format!("sweep axis {name} is empty")));
        }
        if axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AppError::config(format!(
                "sweep axis {name} must be strictly increasing"
            )));
        }
        if axis.iter().any(|v| !(*v > 0.0)) {
            return Err(AppError::config(format!("sweep axis {name} must be positive")));
        }
    }
    if sweep.seeds.is_empty() {
        return Err(AppError::config("sweep needs at least one seed"));
    }
    let mut seen = sweep.seeds.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != sweep.seeds.len() {
        return Err(AppError::config("sweep seeds must be distinct"));
    }
    Ok(())
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Worker count resolution: CLI flag, then config, then RING_RC_THREADS,
/// then all cores.
pub fn resolve_workers(flag: Option<usize>, config_count: usize) -> usize {
    if let Some(n) = flag {
        if n > 0 {
            return n;
        }
    }
    if config_count > 0 {
        return config_count;
    }
    if let Ok(v) = std::env::var("RING_RC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
