//! Reservoir-level properties that need full integration runs: the
//! power-dependent nonlinearity of the input-to-state map and a full-scale
//! single-seed pipeline smoke run.

use ring_rc_core::integrator::IntegratorConfig;
use ring_rc_core::physics::MrrParams;
use ring_rc_core::pipeline::{self, ReadoutSpec, SplitSpec};
use ring_rc_core::readout::{self, DesignMatrix};
use ring_rc_core::tdrc::{self, FeedbackConfig, TdrcConfig};

fn params() -> MrrParams {
    MrrParams {
        omega_p: 1.2e15,
        delta_omega: 0.0,
        tau_c: 5e-11,
        alpha: 20.0,
        tau_fc: 1e-8,
        tau_th: 5e-8,
        n_si: 3.5,
        fcd_coefficient: -1.7e-27,
        thermo_optic_coefficient: 1.8e-4,
        beta_tpa: 8e-12,
        sigma_fca: 1.5e-21,
        specific_heat: 700.0,
        mass: 1.2e-14,
        fca_confinement: 0.9,
        tpa_confinement: 0.9,
        thermal_confinement: 0.9,
        fca_volume: 5e-18,
        tpa_volume: 5e-18,
        absorption_fraction: 1.0,
    }
}

/// Fit every node sample as one shared linear function of the trailing
/// masked chip powers and return the unexplained variance fraction.
///
/// The ring is time-invariant and every node is sampled at its chip end,
/// so a single trailing-window model covers all nodes at once.
fn linear_residual_fraction(p_in_avg_w: f64, window_chips: usize) -> f64 {
    let mut p = params();
    p.delta_omega = pipeline::detuning_ghz_to_rad_s(-30.0);
    let cfg = TdrcConfig {
        p_in_avg_w,
        ..TdrcConfig::default()
    };
    let icfg = IntegratorConfig::default();
    let n_symbols = 700;
    let warmup = 120;

    let dataset = ring_rc_core::tasks::narma10(9, n_symbols).unwrap();
    let mask = tdrc::generate_mask(cfg.mask_seed, cfg.n_nodes);
    let waveform = tdrc::encode(&dataset.inputs, &mask, &cfg, icfg.dt_s).unwrap();
    // Feedback off: the loop is a linear element at any power; this oracle
    // targets the cavity's own nonlinearity.
    let states = tdrc::sample_reservoir(&waveform, &p, &cfg, None, &icfg, warmup).unwrap();

    let chip_power: Vec<f64> = (0..waveform.n_chips())
        .map(|c| waveform.chip(c).norm_sqr())
        .collect();

    let nodes = cfg.n_nodes;
    let rows = states.rows() * nodes;
    let cols = window_chips + 1;
    let mut data = Vec::with_capacity(rows * cols);
    let mut y = Vec::with_capacity(rows);
    for r in 0..states.rows() {
        let symbol = warmup + r;
        for j in 0..nodes {
            let g = symbol * nodes + j;
            for i in 0..window_chips {
                data.push(chip_power[g - i]);
            }
            data.push(1.0);
            y.push(states.row(r)[j]);
        }
    }
    let x = DesignMatrix::from_raw(data, rows, cols).unwrap();
    // Tiny ridge for conditioning only; scaled to the feature magnitude.
    let lambda = 1e-12 * p_in_avg_w * p_in_avg_w * rows as f64;
    let model = readout::ridge_train(&x, &y, lambda).unwrap();
    let pred = readout::predict(&x, &model).unwrap();

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_err: f64 = pred
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    ss_err / ss_tot
}

#[test]
fn state_map_is_linear_at_low_power_nonlinear_at_high() {
    let window = 75;
    let low = linear_residual_fraction(pipeline::dbm_to_watts(-60.0), window);
    let high = linear_residual_fraction(pipeline::dbm_to_watts(10.0), window);
    println!("linear-fit residual fraction: -60 dBm = {low:.3e}, +10 dBm = {high:.3e}");
    assert!(low < 1e-3, "low-power map should be linear, residual {low:.3e}");
    assert!(high > 1e-2, "high-power map should be nonlinear, residual {high:.3e}");
}

#[test]
fn full_scale_seed_evaluation_runs_and_scores() {
    // Spec-default sizes: 100 warmup + 3000 train + 1000 test symbols at
    // dt = 1 ps. Prints the wall time used by downstream budgeting.
    let mut p = params();
    p.tau_fc = 1e-7; // carrier-dominated preset
    p.delta_omega = pipeline::detuning_ghz_to_rad_s(-50.0);
    let cfg = TdrcConfig {
        p_in_avg_w: pipeline::dbm_to_watts(-5.0),
        ..TdrcConfig::default()
    };
    let start = std::time::Instant::now();
    let run = pipeline::evaluate_seed(
        &p,
        &cfg,
        Some(&FeedbackConfig::default()),
        &IntegratorConfig::default(),
        &SplitSpec::default(),
        &ReadoutSpec::default(),
        0,
    )
    .unwrap();
    let elapsed = start.elapsed();
    println!(
        "full-scale seed: train NMSE = {:.4}, test NMSE = {:.4}, lambda = {:.1e}, {:.2} s",
        run.train_nmse,
        run.test_nmse,
        run.lambda,
        elapsed.as_secs_f64()
    );
    assert!(run.test_nmse.is_finite());
    assert!(run.train_nmse >= 0.0 && run.train_nmse <= run.test_nmse * 3.0 + 1.0);
    assert!(run.modulation_index > 0.02 && run.modulation_index < 0.04);
    // One seed must stay well under the per-grid-point budget.
    assert!(elapsed.as_secs_f64() < 30.0, "single seed took {elapsed:?}");
}
