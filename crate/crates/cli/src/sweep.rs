//! Grid sweeps over (detuning, input power, carrier lifetime, thermal
//! time) with per-seed evaluation and deterministic row-major record
//! emission. Grid points are the parallelism unit; each worker owns its
//! full pipeline state, and records are merged by grid index so the worker
//! count never affects the output bytes.

use crate::config::Resolved;
use crate::error::AppError;
use rayon::prelude::*;
use ring_rc_core::pipeline::{self, dbm_to_watts, detuning_ghz_to_rad_s};
use ring_rc_core::tdrc::TdrcConfig;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

/// One grid point's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub detuning_ghz: f64,
    pub pin_dbm: f64,
    pub tau_fc_s: f64,
    pub tau_th_s: f64,
}

/// Materialized sweep grid.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub detuning_ghz: Vec<f64>,
    pub pin_dbm: Vec<f64>,
    pub tau_fc_s: Vec<f64>,
    pub tau_th_s: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn from_config(cfg: &Resolved) -> Result<SweepGrid, AppError> {
        Ok(SweepGrid {
            detuning_ghz: cfg.sweep.detuning_ghz.values()?,
            pin_dbm: cfg.sweep.pin_dbm.values()?,
            tau_fc_s: cfg.sweep.tau_fc_s.clone(),
            tau_th_s: cfg.sweep.tau_th_s.clone(),
            seeds: cfg.sweep.seeds.clone(),
        })
    }

    /// Row-major point order: detuning, then power, then tau_fc, then
    /// tau_th innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out =
            Vec::with_capacity(self.detuning_ghz.len() * self.pin_dbm.len() * self.tau_fc_s.len() * self.tau_th_s.len());
        for &detuning_ghz in &self.detuning_ghz {
            for &pin_dbm in &self.pin_dbm {
                for &tau_fc_s in &self.tau_fc_s {
                    for &tau_th_s in &self.tau_th_s {
                        out.push(GridPoint {
                            detuning_ghz,
                            pin_dbm,
                            tau_fc_s,
                            tau_th_s,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.detuning_ghz.len() * self.pin_dbm.len() * self.tau_fc_s.len() * self.tau_th_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One grid point's outcome: per-seed and seed-averaged test NMSE.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub point: GridPoint,
    /// Seeds that evaluated successfully and entered the mean.
    pub seed_count: usize,
    pub nmse_mean: f64,
    pub nmse_std: f64,
    /// Test NMSE per seed, NaN for failed seeds.
    pub nmse_seeds: Vec<f64>,
    /// Train NMSE per seed, NaN for failed seeds.
    pub train_nmse_seeds: Vec<f64>,
    pub failed_seeds: usize,
    pub modulation_index: f64,
    pub wall_s: f64,
}

/// Evaluate every seed at one grid point. Per-seed failures (diverged task
/// series, non-finite integration) are recorded and excluded from the
/// mean rather than aborting the sweep.
pub fn evaluate_point(cfg: &Resolved, point: &GridPoint, seeds: &[u64]) -> SweepRecord {
    let start = Instant::now();
    let mut params = cfg.params.clone();
    params.delta_omega = detuning_ghz_to_rad_s(point.detuning_ghz);
    params.tau_fc = point.tau_fc_s;
    params.tau_th = point.tau_th_s;
    let tdrc = TdrcConfig {
        p_in_avg_w: dbm_to_watts(point.pin_dbm),
        ..cfg.tdrc.clone()
    };

    let mut nmse_seeds = Vec::with_capacity(seeds.len());
    let mut train_nmse_seeds = Vec::with_capacity(seeds.len());
    let mut modulation_index = f64::NAN;
    let mut failed = 0usize;
    for &seed in seeds {
        match pipeline::evaluate_seed(
            &params,
            &tdrc,
            cfg.feedback.as_ref(),
            &cfg.integrator,
            &cfg.split,
            &cfg.readout,
            seed,
        ) {
            Ok(run) => {
                if modulation_index.is_nan() {
                    modulation_index = run.modulation_index;
                }
                nmse_seeds.push(run.test_nmse);
                train_nmse_seeds.push(run.train_nmse);
            }
            Err(_) => {
                failed += 1;
                nmse_seeds.push(f64::NAN);
                train_nmse_seeds.push(f64::NAN);
            }
        }
    }

    let ok: Vec<f64> = nmse_seeds.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, std) = mean_std(&ok);
    SweepRecord {
        point: *point,
        seed_count: ok.len(),
        nmse_mean: mean,
        nmse_std: std,
        nmse_seeds,
        train_nmse_seeds,
        failed_seeds: failed,
        modulation_index,
        wall_s: start.elapsed().as_secs_f64(),
    }
}

/// Arithmetic mean and sample standard deviation (0 below two samples).
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluate the whole grid on `workers` threads. Output order is the
/// row-major grid order regardless of execution interleaving.
pub fn run_sweep(
    cfg: &Resolved,
    grid: &SweepGrid,
    workers: usize,
    progress: bool,
) -> Result<Vec<SweepRecord>, AppError> {
    if grid.is_empty() {
        return Err(AppError::config("sweep grid is empty"));
    }
    let points = grid.points();
    let total = points.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::config(format!("cannot build worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    let records: Vec<SweepRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|point| {
                let record = evaluate_point(cfg, point, &grid.seeds);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if progress {
                    eprintln!(
                        "[{k}/{total}] detuning {:+.1} GHz, {:+.1} dBm: mean NMSE {:.4} ({} ok, {} failed, {:.1} s)",
                        point.detuning_ghz,
                        point.pin_dbm,
                        record.nmse_mean,
                        record.seed_count,
                        record.failed_seeds,
                        record.wall_s
                    );
                }
                record
            })
            .collect()
    });
    Ok(records)
}

/// Sweep CSV: one row per grid point in grid order.
pub fn write_sweep_csv(
    path: &Path,
    records: &[SweepRecord],
    n_seeds: usize,
    hash: &str,
) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config_sha256={hash}")?;
    let mut header = String::from("detuning_ghz,pin_dbm,tau_fc_s,tau_th_s,seed_count,nmse_mean,nmse_std");
    for i in 0..n_seeds {
        header.push_str(&format!(",nmse_seed_{i}"));
    }
    header.push_str(",failed_seeds,mod_index,wall_s");
    writeln!(f, "{header}")?;
    for r in records {
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            r.point.detuning_ghz,
            r.point.pin_dbm,
            r.point.tau_fc_s,
            r.point.tau_th_s,
            r.seed_count,
            r.nmse_mean,
            r.nmse_std
        );
        for v in &r.nmse_seeds {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push_str(&format!(",{},{},{}", r.failed_seeds, r.modulation_index, r.wall_s));
        writeln!(f, "{line}")?;
    }
    f.flush()
}

/// JSON sidecar describing a finished sweep.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: &'a str,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub workers: usize,
    pub grid_points: usize,
    pub detuning_ghz: &'a [f64],
    pub pin_dbm: &'a [f64],
    pub tau_fc_s: &'a [f64],
    pub tau_th_s: &'a [f64],
    pub seeds: &'a [u64],
    pub mask_seed: u64,
    pub failed_points: usize,
    pub total_failed_seeds: usize,
    /// Full semantic config echo (the hashed document).
    pub config: serde_json::Value,
}

pub fn write_manifest(path: &Path, manifest: &Manifest<'_>) -> std::io::Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(manifest).expect("manifest serializes"),
    )
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
