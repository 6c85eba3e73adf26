//! Analytic oracle battery: closed-form checks the simulator must pass
//! before any sweep output is worth reading. Each oracle reports a
//! measured value against a named tolerance.

use crate::config::Resolved;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ring_rc_core::integrator::{integrate, rk4_step, IntegratorConfig};
use ring_rc_core::physics::{loss_rates, DriveField, MrrParams, MrrState};
use ring_rc_core::readout::{self, DesignMatrix};
use ring_rc_core::tasks;
use ring_rc_core::tdrc::EncodedWaveform;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub criterion: String,
}

impl OracleReport {
    pub fn line(&self) -> String {
        format!(
            "{} {:<24} measured {:.6e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.criterion
        )
    }
}

/// Independent normal-equations solver: Gauss-Jordan elimination with
/// partial pivoting on (X^T X + lambda I) w = X^T y. Deliberately shares
/// no code with the production Cholesky path.
pub fn gauss_jordan_ridge(x: &DesignMatrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.cols();
    let rows = x.rows();
    let w = n + 1;
    let mut a = vec![0.0f64; n * w];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..rows {
                s += x.row(r)[i] * x.row(r)[j];
            }
            a[i * w + j] = s + if i == j { lambda } else { 0.0 };
        }
        let mut s = 0.0;
        for r in 0..rows {
            s += x.row(r)[i] * y[r];
        }
        a[i * w + n] = s;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                a[p * w + col]
                    .abs()
                    .partial_cmp(&a[q * w + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for k in 0..w {
                a.swap(col * w + k, pivot * w + k);
            }
        }
        let d = a[col * w + col];
        for k in 0..w {
            a[col * w + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * w + col];
                if f != 0.0 {
                    for k in 0..w {
                        a[r * w + k] -= f * a[col * w + k];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i * w + n]).collect()
}

fn decay_error(params: &MrrParams, gamma: f64, dt: f64, horizon: f64) -> f64 {
    let n = (horizon / dt).round() as usize;
    let mut s = MrrState {
        amplitude: Complex64::new(1e-9, 0.0),
        delta_n: 0.0,
        delta_t: 0.0,
    };
    for _ in 0..n {
        match rk4_step(&s, &DriveField::ZERO, &DriveField::ZERO, &DriveField::ZERO, params, dt) {
            Ok(next) => s = next,
            Err(_) => return f64::INFINITY,
        }
    }
    let expected = 1e-9 * (-gamma * n as f64 * dt).exp();
    ((s.amplitude.norm() - expected) / expected).abs()
}

/// RK4 order measured on the device's own linearized decay rate at zero
/// detuning: halving the step from 2 dt to dt must shrink the global error
/// by roughly 2^4.
fn rk4_order_oracle(params: &MrrParams, dt: f64) -> OracleReport {
    let mut lin = params.linearized();
    lin.delta_omega = 0.0;
    let gamma = loss_rates(&MrrState::ZERO, &lin).total();
    let horizon = 5.0 / gamma;
    let e_full = decay_error(&lin, gamma, 2.0 * dt, horizon);
    let e_half = decay_error(&lin, gamma, dt, horizon);
    let ratio = e_full / e_half;
    OracleReport {
        name: "rk4-order",
        passed: (12.0..=20.0).contains(&ratio),
        measured: ratio,
        criterion: format!("error(2dt)/error(dt) in [12, 20] at dt = {dt:.1e} s"),
    }
}

fn relaxation_oracle(params: &MrrParams, dt: f64) -> [OracleReport; 2] {
    let n0 = 1e22;
    let t0 = 2.0;
    let initial = MrrState {
        amplitude: Complex64::new(0.0, 0.0),
        delta_n: n0,
        delta_t: t0,
    };
    let horizon = 5.0 * params.tau_fc.max(params.tau_th);
    let n = (horizon / dt).round() as usize;
    let cfg = IntegratorConfig {
        dt_s: dt,
        record_stride: (n / 50).max(1),
    };
    let wf = EncodedWaveform::constant(Complex64::new(0.0, 0.0), n, dt);
    let mut worst_fc = 0.0f64;
    let mut worst_th = 0.0f64;
    match integrate(initial, &wf, params, &cfg, None) {
        Ok(trace) => {
            for s in &trace {
                let expect_n = n0 * (-s.t_s / params.tau_fc).exp();
                let expect_t = t0 * (-s.t_s / params.tau_th).exp();
                worst_fc = worst_fc.max(((s.state.delta_n - expect_n) / expect_n).abs());
                worst_th = worst_th.max(((s.state.delta_t - expect_t) / expect_t).abs());
            }
        }
        Err(_) => {
            worst_fc = f64::INFINITY;
            worst_th = f64::INFINITY;
        }
    }
    [
        OracleReport {
            name: "relaxation-carriers",
            passed: worst_fc < 1e-6,
            measured: worst_fc,
            criterion: "max relative deviation from N0 exp(-t/tau_fc) < 1e-6".into(),
        },
        OracleReport {
            name: "relaxation-thermal",
            passed: worst_th < 1e-6,
            measured: worst_th,
            criterion: "max relative deviation from T0 exp(-t/tau_th) < 1e-6".into(),
        },
    ]
}

fn lorentzian_oracle(params: &MrrParams, dt: f64) -> OracleReport {
    let mut lin = params.linearized();
    let gamma = loss_rates(&MrrState::ZERO, &lin).total();
    let p_in: f64 = 1e-3;
    let e_in = Complex64::new(p_in.sqrt(), 0.0);
    let n = (10.0 / (gamma * dt)).ceil() as usize;
    let cfg = IntegratorConfig {
        dt_s: dt,
        record_stride: n.max(1),
    };
    let mut worst = 0.0f64;
    for delta in [0.0, gamma, -gamma] {
        lin.delta_omega = delta;
        let wf = EncodedWaveform::constant(e_in, n, dt);
        match integrate(MrrState::ZERO, &wf, &lin, &cfg, None) {
            Ok(trace) => {
                let energy = trace.last().unwrap().state.amplitude.norm_sqr();
                let expected = (2.0 / lin.tau_c) * p_in / (delta * delta + gamma * gamma);
                worst = worst.max(((energy - expected) / expected).abs());
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    OracleReport {
        name: "lorentzian-steady-state",
        passed: worst < 5e-3,
        measured: worst,
        criterion: "relative energy error at detunings {0, +g, -g} < 0.5% after 10 lifetimes".into(),
    }
}

fn decay_slope_oracle(params: &MrrParams, dt: f64) -> OracleReport {
    let mut lin = params.linearized();
    lin.delta_omega = 0.0;
    let gamma = loss_rates(&MrrState::ZERO, &lin).total();
    let n = ((2.0 / gamma) / dt).round().max(10.0) as usize;
    let cfg = IntegratorConfig {
        dt_s: dt,
        record_stride: n,
    };
    let initial = MrrState {
        amplitude: Complex64::new(1e-9, 0.0),
        delta_n: 0.0,
        delta_t: 0.0,
    };
    let wf = EncodedWaveform::constant(Complex64::new(0.0, 0.0), n, dt);
    let measured = match integrate(initial, &wf, &lin, &cfg, None) {
        Ok(trace) => {
            let first = trace.first().unwrap();
            let last = trace.last().unwrap();
            let slope = -(last.state.amplitude.norm() / first.state.amplitude.norm()).ln()
                / (last.t_s - first.t_s);
            ((slope - gamma) / gamma).abs()
        }
        Err(_) => f64::INFINITY,
    };
    OracleReport {
        name: "amplitude-decay-slope",
        passed: measured < 1e-3,
        measured,
        criterion: "log-slope of |a| within 1e-3 of gamma_tot".into(),
    }
}

fn ridge_oracle() -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rows = 200;
        let cols = 51;
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
        let x = DesignMatrix::from_raw(data, rows, cols).unwrap();
        let y: Vec<f64> = (0..rows).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let lambda = 1e-3;
        let model = match readout::ridge_train(&x, &y, lambda) {
            Ok(m) => m,
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        };
        let oracle = gauss_jordan_ridge(&x, &y, lambda);
        let num: f64 = model
            .weights
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    OracleReport {
        name: "ridge-normal-equations",
        passed: worst < 1e-10,
        measured: worst,
        criterion: "weights vs independent Gauss-Jordan solve, 100 random 200x51 systems, < 1e-10".into(),
    }
}

fn narma_oracle() -> OracleReport {
    let u = vec![0.0; 201];
    let y = tasks::narma10_from_inputs(&u).unwrap();
    let expected = 0.7 - 0.29f64.sqrt();
    let measured = (y[200] - expected).abs();
    OracleReport {
        name: "narma10-fixed-point",
        passed: measured < 1e-6,
        measured,
        criterion: "zero-input series reaches 0.7 - sqrt(0.29) within 1e-6 by step 200".into(),
    }
}

fn nmse_oracle() -> OracleReport {
    let t = [0.0, 1.0, 2.0, 3.0];
    let mean = t.iter().sum::<f64>() / 4.0;
    let mean_pred = [mean; 4];
    let unit_dev = (readout::nmse(&mean_pred, &t).unwrap() - 1.0).abs();
    let hand_dev = (readout::nmse(&[0.0, 1.0, 2.0, 4.0], &t).unwrap() - 0.2).abs();
    let measured = unit_dev.max(hand_dev);
    OracleReport {
        name: "nmse-definition",
        passed: unit_dev <= 1e-12 && hand_dev <= 1e-15,
        measured,
        criterion: "mean predictor = 1.0 (+-1e-12); hand case (0,1,2,3)/(0,1,2,4) = 0.2".into(),
    }
}

/// Run the whole battery against the resolved configuration (device
/// constants and integration step come from it).
pub fn run_battery(cfg: &Resolved) -> Vec<OracleReport> {
    let dt = cfg.integrator.dt_s;
    let mut reports = Vec::new();
    reports.push(rk4_order_oracle(&cfg.params, dt));
    reports.extend(relaxation_oracle(&cfg.params, dt));
    reports.push(lorentzian_oracle(&cfg.params, dt));
    reports.push(decay_slope_oracle(&cfg.params, dt));
    reports.push(ridge_oracle());
    reports.push(narma_oracle());
    reports.push(nmse_oracle());
    reports
}
