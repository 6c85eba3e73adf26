//! `ring-rc`: simulate, sweep and validate a microring-based time-delay
//! reservoir computer.

use clap::{Parser, Subcommand};
use ring_rc::config::{self, Resolved};
use ring_rc::error::AppError;
use ring_rc::{io, sweep, validate};
use ring_rc_core::integrator::integrate;
use ring_rc_core::physics::MrrState;
use ring_rc_core::pipeline;
use ring_rc_core::tdrc::{self, FeedbackLine};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ring-rc", version, about = "Silicon microring time-delay reservoir simulator")]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one full pipeline at a single operating point and write the
    /// state matrix, model and metrics.
    Simulate {
        /// Pump-resonance offset, GHz.
        #[arg(long)]
        detuning_ghz: Option<f64>,
        /// Average input power, dBm.
        #[arg(long)]
        pin_dbm: Option<f64>,
        /// Task seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Free-carrier lifetime override, s.
        #[arg(long)]
        tau_fc_s: Option<f64>,
        /// Thermal decay time override, s.
        #[arg(long)]
        tau_th_s: Option<f64>,
        /// Output directory (default from config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the integration trace CSV.
        #[arg(long)]
        dump_trace: bool,
        /// Also write the task dataset CSV.
        #[arg(long)]
        dump_dataset: bool,
    },
    /// Evaluate a grid of operating points and write records plus a
    /// manifest.
    Sweep {
        #[arg(long)]
        detuning_min: Option<f64>,
        #[arg(long)]
        detuning_max: Option<f64>,
        #[arg(long)]
        detuning_points: Option<usize>,
        #[arg(long)]
        pin_min: Option<f64>,
        #[arg(long)]
        pin_max: Option<f64>,
        #[arg(long)]
        pin_points: Option<usize>,
        /// Comma-separated carrier lifetimes, s.
        #[arg(long)]
        tau_fc_s: Option<String>,
        /// Comma-separated thermal decay times, s.
        #[arg(long)]
        tau_th_s: Option<String>,
        /// Comma-separated seed list.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker thread count (default: config, RING_RC_THREADS, cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the analytic oracle battery and report pass/fail per oracle.
    Validate,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, AppError> {
    s.split(',')
        .map(|tok| tok.trim())
        .filter(|tok| !tok.is_empty())
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| AppError::config(format!("cannot parse {what} entry '{tok}'")))
        })
        .collect()
}

fn cmd_simulate(
    resolved: Resolved,
    out: Option<PathBuf>,
    dump_trace: bool,
    dump_dataset: bool,
) -> Result<(), AppError> {
    let out_dir = out.unwrap_or_else(|| resolved.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;

    for w in resolved
        .integrator
        .stability_warnings(&resolved.params, resolved.tdrc.chip_duration_s)
    {
        eprintln!("warning: {w}");
    }

    let seed = resolved.run.seed;
    let evaluation = pipeline::evaluate_seed_full(
        &resolved.params,
        &resolved.tdrc,
        resolved.feedback.as_ref(),
        &resolved.integrator,
        &resolved.split,
        &resolved.readout,
        seed,
    )?;

    let hash = resolved.config_sha256.clone();
    io::write_state_matrix_csv(&out_dir.join("state_matrix.csv"), &evaluation.states, &hash)?;
    io::write_model_json(&out_dir.join("model.json"), &evaluation.model, &hash)?;
    let metrics = io::Metrics {
        config_sha256: hash.clone(),
        detuning_ghz: resolved.run.detuning_ghz,
        pin_dbm: resolved.run.pin_dbm,
        tau_fc_s: resolved.params.tau_fc,
        tau_th_s: resolved.params.tau_th,
        seed,
        n_nodes: resolved.tdrc.n_nodes,
        warmup_symbols: resolved.split.warmup,
        train_symbols: resolved.split.train,
        test_symbols: resolved.split.test,
        lambda: evaluation.run.lambda,
        train_nmse: evaluation.run.train_nmse,
        test_nmse: evaluation.run.test_nmse,
        modulation_index: evaluation.run.modulation_index,
    };
    io::write_metrics_json(&out_dir.join("metrics.json"), &metrics)?;

    if dump_dataset {
        io::write_dataset_csv(&out_dir.join("dataset.csv"), &evaluation.dataset, &hash)?;
    }
    if dump_trace {
        let mask = tdrc::generate_mask(resolved.tdrc.mask_seed, resolved.tdrc.n_nodes);
        let waveform = tdrc::encode(
            &evaluation.dataset.inputs,
            &mask,
            &resolved.tdrc,
            resolved.integrator.dt_s,
        )?;
        let line = resolved
            .feedback
            .as_ref()
            .map(|cfg| FeedbackLine::new(cfg, resolved.integrator.dt_s))
            .transpose()?;
        let trace = integrate(
            MrrState::ZERO,
            &waveform,
            &resolved.params,
            &resolved.integrator,
            line,
        )?;
        io::write_trace_csv(&out_dir.join("trace.csv"), &trace, &hash)?;
    }

    println!(
        "seed {seed} at {:+.1} GHz, {:+.1} dBm: train NMSE {:.4}, test NMSE {:.4} (lambda {:.1e}, mod index {:.3}%)",
        resolved.run.detuning_ghz,
        resolved.run.pin_dbm,
        evaluation.run.train_nmse,
        evaluation.run.test_nmse,
        evaluation.run.lambda,
        evaluation.run.modulation_index * 100.0
    );
    println!("artifacts in {}", out_dir.display());
    Ok(())
}

fn cmd_sweep(resolved: Resolved, workers: Option<usize>, out: Option<PathBuf>) -> Result<(), AppError> {
    let out_dir = out.unwrap_or_else(|| resolved.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let workers = config::resolve_workers(workers, resolved.workers);
    let grid = sweep::SweepGrid::from_config(&resolved)?;

    {
        // Warn once with the most demanding tau preset of the grid.
        let mut probe = resolved.params.clone();
        probe.tau_fc = grid.tau_fc_s.iter().copied().fold(f64::INFINITY, f64::min);
        probe.tau_th = grid.tau_th_s.iter().copied().fold(f64::INFINITY, f64::min);
        for w in resolved
            .integrator
            .stability_warnings(&probe, resolved.tdrc.chip_duration_s)
        {
            eprintln!("warning: {w}");
        }
    }

    eprintln!(
        "sweep: {} points x {} seeds on {} workers",
        grid.len(),
        grid.seeds.len(),
        workers
    );
    let started = sweep::unix_now();
    let records = sweep::run_sweep(&resolved, &grid, workers, true)?;
    let finished = sweep::unix_now();

    let csv_path = out_dir.join("sweep.csv");
    sweep::write_sweep_csv(&csv_path, &records, grid.seeds.len(), &resolved.config_sha256)?;

    let failed_points = records.iter().filter(|r| r.seed_count == 0).count();
    let total_failed_seeds: usize = records.iter().map(|r| r.failed_seeds).sum();
    let manifest = sweep::Manifest {
        tool: "ring-rc",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &resolved.config_sha256,
        started_unix_s: started,
        finished_unix_s: finished,
        workers,
        grid_points: records.len(),
        detuning_ghz: &grid.detuning_ghz,
        pin_dbm: &grid.pin_dbm,
        tau_fc_s: &grid.tau_fc_s,
        tau_th_s: &grid.tau_th_s,
        seeds: &grid.seeds,
        mask_seed: resolved.tdrc.mask_seed,
        failed_points,
        total_failed_seeds,
        config: serde_json::from_str(&resolved.echo_json).expect("echo is valid JSON"),
    };
    sweep::write_manifest(&out_dir.join("manifest.json"), &manifest)?;

    println!("{} records -> {}", records.len(), csv_path.display());
    if total_failed_seeds > 0 {
        return Err(AppError::PartialSweep(format!(
            "{total_failed_seeds} seed evaluations failed across {failed_points} fully failed points"
        )));
    }
    Ok(())
}

fn cmd_validate(resolved: Resolved) -> Result<(), AppError> {
    let reports = validate::run_battery(&resolved);
    let mut failed = 0;
    for r in &reports {
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        Err(AppError::Numerical(format!("{failed} oracle(s) failed")))
    } else {
        println!("all {} oracles passed", reports.len());
        Ok(())
    }
}

fn run() -> Result<(), AppError> {
    let cli = Cli::parse();
    let mut file = ring_rc::config::ConfigFile::load(&cli.config)?;
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));

    match cli.cmd {
        Cmd::Simulate {
            detuning_ghz,
            pin_dbm,
            seed,
            tau_fc_s,
            tau_th_s,
            out,
            dump_trace,
            dump_dataset,
        } => {
            if let Some(v) = detuning_ghz {
                file.run.detuning_ghz = v;
            }
            if let Some(v) = pin_dbm {
                file.run.pin_dbm = v;
            }
            if let Some(v) = seed {
                file.run.seed = v;
            }
            if let Some(v) = tau_fc_s {
                file.run.tau_fc_s = Some(v);
            }
            if let Some(v) = tau_th_s {
                file.run.tau_th_s = Some(v);
            }
            let resolved = config::resolve(file, &base)?;
            cmd_simulate(resolved, out, dump_trace, dump_dataset)
        }
        Cmd::Sweep {
            detuning_min,
            detuning_max,
            detuning_points,
            pin_min,
            pin_max,
            pin_points,
            tau_fc_s,
            tau_th_s,
            seeds,
            workers,
            out,
        } => {
            if let Some(v) = detuning_min {
                file.sweep.detuning_ghz.min = v;
            }
            if let Some(v) = detuning_max {
                file.sweep.detuning_ghz.max = v;
            }
            if let Some(v) = detuning_points {
                file.sweep.detuning_ghz.points = v;
            }
            if let Some(v) = pin_min {
                file.sweep.pin_dbm.min = v;
            }
            if let Some(v) = pin_max {
                file.sweep.pin_dbm.max = v;
            }
            if let Some(v) = pin_points {
                file.sweep.pin_dbm.points = v;
            }
            if let Some(list) = tau_fc_s {
                file.sweep.tau_fc_s = parse_list(&list, "tau_fc_s")?;
            }
            if let Some(list) = tau_th_s {
                file.sweep.tau_th_s = parse_list(&list, "tau_th_s")?;
            }
            if let Some(list) = seeds {
                file.sweep.seeds = parse_list(&list, "seeds")?;
            }
            let resolved = config::resolve(file, &base)?;
            cmd_sweep(resolved, workers, out)
        }
        Cmd::Validate => {
            let resolved = config::resolve(file, &base)?;
            cmd_validate(resolved)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
