//! Fixed-step classical Runge-Kutta integration of the ring model.
//!
//! The step size is fixed so chip boundaries stay aligned with the sample
//! grid and runs are branch-free and reproducible. Drives are treated as
//! piecewise-constant per sample: the half-step drive equals the sample
//! covering that instant.
//!
//! Internally the state is advanced in a normalized unit system (ns, pJ,
//! mW, 1e24 m^-3) so every variable stays O(1); the public API converts at
//! the boundary and stays SI.

use crate::error::Error;
use crate::physics::{Coeffs, DriveField, MrrParams, MrrState, UnitSystem};
use crate::tdrc::{EncodedWaveform, FeedbackLine};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;

/// Integration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Step size, s.
    pub dt_s: f64,
    /// Record every k-th step in traces.
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt_s: 1e-12,
            record_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(Error::ConfigMismatch(format!("dt must be positive, got {}", self.dt_s)));
        }
        if self.record_stride == 0 {
            return Err(Error::ConfigMismatch("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolution guard: the step should resolve every configured time
    /// scale by at least 10x. Returns one message per violated scale.
    pub fn stability_warnings(&self, params: &MrrParams, chip_duration_s: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        for (name, scale) in [
            ("tau_fc", params.tau_fc),
            ("tau_th", params.tau_th),
            ("tau_c", params.tau_c),
            ("chip duration", chip_duration_s),
        ] {
            if self.dt_s > scale / 10.0 {
                warnings.push(format!(
                    "dt = {:.3e} s under-resolves {name} = {:.3e} s (want dt <= {:.3e} s)",
                    self.dt_s,
                    scale,
                    scale / 10.0
                ));
            }
        }
        warnings
    }
}

/// Number of dt steps spanning `duration_s`, requiring an integer fit.
pub(crate) fn steps_on_grid(duration_s: f64, dt_s: f64, what: &str) -> Result<usize, Error> {
    let ratio = duration_s / dt_s;
    let steps = num_traits::Float::round(ratio);
    if !(steps >= 1.0) || num_traits::Float::abs(steps * dt_s - duration_s) > 1e-9 * duration_s {
        return Err(Error::ConfigMismatch(format!(
            "{what} = {duration_s:.6e} s is not a positive integer multiple of dt = {dt_s:.6e} s"
        )));
    }
    Ok(steps as usize)
}

#[inline]
fn axpy(y: &MrrState, k: &MrrState, h: f64) -> MrrState {
    MrrState {
        amplitude: Complex64::new(
            y.amplitude.re + h * k.amplitude.re,
            y.amplitude.im + h * k.amplitude.im,
        ),
        delta_n: y.delta_n + h * k.delta_n,
        delta_t: y.delta_t + h * k.delta_t,
    }
}

/// One classical RK4 update with the three drive samples it consumes.
/// Works in whatever unit system `coeffs` was built for.
#[inline]
pub(crate) fn rk4_step_raw(
    coeffs: &Coeffs,
    state: &MrrState,
    drive_at_t: &DriveField,
    drive_at_t_half: &DriveField,
    drive_at_t_next: &DriveField,
    dt: f64,
) -> MrrState {
    let k1 = coeffs.rhs(state, drive_at_t);
    let k2 = coeffs.rhs(&axpy(state, &k1, 0.5 * dt), drive_at_t_half);
    let k3 = coeffs.rhs(&axpy(state, &k2, 0.5 * dt), drive_at_t_half);
    let k4 = coeffs.rhs(&axpy(state, &k3, dt), drive_at_t_next);
    let sixth = dt / 6.0;
    MrrState {
        amplitude: Complex64::new(
            state.amplitude.re
                + sixth
                    * (k1.amplitude.re
                        + 2.0 * k2.amplitude.re
                        + 2.0 * k3.amplitude.re
                        + k4.amplitude.re),
            state.amplitude.im
                + sixth
                    * (k1.amplitude.im
                        + 2.0 * k2.amplitude.im
                        + 2.0 * k3.amplitude.im
                        + k4.amplitude.im),
        ),
        delta_n: state.delta_n + sixth * (k1.delta_n + 2.0 * k2.delta_n + 2.0 * k3.delta_n + k4.delta_n),
        delta_t: state.delta_t + sixth * (k1.delta_t + 2.0 * k2.delta_t + 2.0 * k3.delta_t + k4.delta_t),
    }
}

/// One RK4 step of the full model in SI units.
///
/// `drive_at_t`, `drive_at_t_half` and `drive_at_t_next` are the waveform
/// samples at `t`, `t + dt/2` and `t + dt`. Returns `NonFinite` (with time
/// relative to the step start) when the update leaves the representable
/// range, which usually means the step is too large for the dynamics.
pub fn rk4_step(
    state: &MrrState,
    drive_at_t: &DriveField,
    drive_at_t_half: &DriveField,
    drive_at_t_next: &DriveField,
    params: &MrrParams,
    dt_s: f64,
) -> Result<MrrState, Error> {
    let next = rk4_step_raw(
        &Coeffs::si(params),
        state,
        drive_at_t,
        drive_at_t_half,
        drive_at_t_next,
        dt_s,
    );
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite { t_s: dt_s })
    }
}

/// One recorded point of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t_s: f64,
    pub state: MrrState,
    pub p_drop_w: f64,
    pub e_through: Complex64,
}

/// Step-by-step driver shared by trace integration and reservoir runs.
///
/// Holds the normalized state, the waveform cursor and the optional
/// feedback line; each `step` advances one dt, querying the line for the
/// add-port field and pushing the through-port field back into it.
pub struct Stepper<'a> {
    coeffs: Coeffs,
    units: UnitSystem,
    state: MrrState,
    waveform: &'a EncodedWaveform,
    feedback: Option<FeedbackLine>,
    dt_norm: f64,
    dt_s: f64,
    field_scale: f64,
    step_idx: usize,
    chip_idx: usize,
    chip_pos: usize,
    samples_per_chip: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(
        initial: MrrState,
        waveform: &'a EncodedWaveform,
        params: &MrrParams,
        cfg: &IntegratorConfig,
        feedback: Option<FeedbackLine>,
    ) -> Result<Stepper<'a>, Error> {
        cfg.validate()?;
        if !initial.is_finite() {
            return Err(Error::NonFinite { t_s: 0.0 });
        }
        let rel = num_traits::Float::abs(waveform.dt_s() - cfg.dt_s);
        if rel > 1e-9 * cfg.dt_s {
            return Err(Error::ConfigMismatch(format!(
                "waveform sampled at dt = {:.6e} s but integrator runs at {:.6e} s",
                waveform.dt_s(),
                cfg.dt_s
            )));
        }
        if let Some(line) = &feedback {
            if num_traits::Float::abs(line.dt_s() - cfg.dt_s) > 1e-9 * cfg.dt_s {
                return Err(Error::ConfigMismatch(
                    "feedback line built for a different dt".into(),
                ));
            }
        }
        let units = UnitSystem::NORMALIZED;
        let state = MrrState {
            amplitude: initial.amplitude * units.amplitude_from_si(),
            delta_n: initial.delta_n / units.carrier_m3,
            delta_t: initial.delta_t,
        };
        Ok(Stepper {
            coeffs: Coeffs::new(params, units),
            units,
            state,
            waveform,
            feedback,
            dt_norm: cfg.dt_s / units.time_s,
            dt_s: cfg.dt_s,
            field_scale: units.field_from_si(),
            step_idx: 0,
            chip_idx: 0,
            chip_pos: 0,
            samples_per_chip: waveform.samples_per_chip(),
        })
    }

    pub fn steps_total(&self) -> usize {
        self.waveform.n_samples()
    }

    pub fn step_idx(&self) -> usize {
        self.step_idx
    }

    pub fn t_s(&self) -> f64 {
        self.step_idx as f64 * self.dt_s
    }

    /// Input-port envelope for the sample covering the current instant,
    /// normalized units. Holds the last sample past the end.
    #[inline]
    fn e_in_now(&self) -> Complex64 {
        let n_chips = self.waveform.n_chips();
        if n_chips == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let idx = if self.chip_idx >= n_chips { n_chips - 1 } else { self.chip_idx };
        self.waveform.chip(idx) * self.field_scale
    }

    #[inline]
    fn e_in_next(&self) -> Complex64 {
        let n_chips = self.waveform.n_chips();
        if n_chips == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let idx = if self.chip_pos + 1 >= self.samples_per_chip {
            self.chip_idx + 1
        } else {
            self.chip_idx
        };
        let idx = if idx >= n_chips { n_chips - 1 } else { idx };
        self.waveform.chip(idx) * self.field_scale
    }

    /// Advance one dt. Returns `NonFinite` with the absolute failing time.
    #[inline]
    pub fn step(&mut self) -> Result<(), Error> {
        let e_in_now = self.e_in_now();
        let e_in_next = self.e_in_next();
        let (e_add_now, e_add_next) = match &mut self.feedback {
            Some(line) => {
                let through = self.coeffs.through_field(&self.state, e_in_now);
                line.advance(through)
            }
            None => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        };
        let d_now = DriveField {
            e_in: e_in_now,
            e_add: e_add_now,
        };
        let d_next = DriveField {
            e_in: e_in_next,
            e_add: e_add_next,
        };
        self.state = rk4_step_raw(&self.coeffs, &self.state, &d_now, &d_now, &d_next, self.dt_norm);
        self.step_idx += 1;
        self.chip_pos += 1;
        if self.chip_pos == self.samples_per_chip {
            self.chip_pos = 0;
            self.chip_idx += 1;
        }
        if self.state.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { t_s: self.t_s() })
        }
    }

    /// Current state converted back to SI.
    pub fn state_si(&self) -> MrrState {
        MrrState {
            amplitude: self.state.amplitude / self.units.amplitude_from_si(),
            delta_n: self.state.delta_n * self.units.carrier_m3,
            delta_t: self.state.delta_t,
        }
    }

    /// Drop-port power, W.
    #[inline]
    pub fn drop_power_w(&self) -> f64 {
        self.coeffs.drop_power(&self.state) * self.units.power_w
    }

    /// Through-port envelope, sqrt(W).
    pub fn e_through_si(&self) -> Complex64 {
        self.coeffs.through_field(&self.state, self.e_in_now()) / self.field_scale
    }

    fn trace_sample(&self) -> TraceSample {
        TraceSample {
            t_s: self.t_s(),
            state: self.state_si(),
            p_drop_w: self.drop_power_w(),
            e_through: self.e_through_si(),
        }
    }
}

/// Integrate the full waveform from `initial`, recording every
/// `record_stride`-th step (including t = 0, and the final state when the
/// step count divides evenly).
///
/// When a feedback line is given, the add-port drive is read from it at
/// each substep and the through-port field is pushed back in.
pub fn integrate(
    initial: MrrState,
    waveform: &EncodedWaveform,
    params: &MrrParams,
    cfg: &IntegratorConfig,
    feedback: Option<FeedbackLine>,
) -> Result<Vec<TraceSample>, Error> {
    let mut stepper = Stepper::new(initial, waveform, params, cfg, feedback)?;
    let n = stepper.steps_total();
    let stride = cfg.record_stride;
    let mut out = Vec::with_capacity(n / stride + 2);
    for i in 0..n {
        if i % stride == 0 {
            out.push(stepper.trace_sample());
        }
        stepper.step()?;
    }
    if n % stride == 0 {
        out.push(stepper.trace_sample());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{self, SPEED_OF_LIGHT};
    use approx::assert_relative_eq;

    /// Linearized cavity with an exact 1/ns amplitude decay rate:
    /// c*alpha/(2 n_si) = 5e8 and 2/tau_c = 5e8.
    fn decay_params() -> MrrParams {
        let mut p = physics::tests::test_params().linearized();
        p.n_si = 3.5;
        p.alpha = 5e8 * 2.0 * 3.5 / SPEED_OF_LIGHT;
        p.tau_c = 4e-9;
        p
    }

    fn zero_waveform(n: usize, dt: f64) -> EncodedWaveform {
        EncodedWaveform::constant(Complex64::new(0.0, 0.0), n, dt)
    }

    #[test]
    fn single_step_matches_exponential() {
        let p = decay_params();
        let s0 = MrrState {
            amplitude: Complex64::new(1.0, 0.0),
            delta_n: 0.0,
            delta_t: 0.0,
        };
        let next = rk4_step(&s0, &DriveField::ZERO, &DriveField::ZERO, &DriveField::ZERO, &p, 1e-12)
            .unwrap();
        let expected = (-0.001_f64).exp(); // 0.999000499833375
        assert_relative_eq!(next.amplitude.re, expected, max_relative = 1e-12);
        assert_relative_eq!(next.amplitude.im, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn zero_drive_zero_state_is_fixed_point() {
        let p = decay_params();
        let next = rk4_step(
            &MrrState::ZERO,
            &DriveField::ZERO,
            &DriveField::ZERO,
            &DriveField::ZERO,
            &p,
            1e-12,
        )
        .unwrap();
        assert_eq!(next, MrrState::ZERO);
    }

    fn decay_error_at(dt: f64, p: &MrrParams) -> f64 {
        // |a| after 5 ns of pure decay vs the analytic exponential.
        let horizon = 5e-9;
        let n = (horizon / dt).round() as usize;
        let mut s = MrrState {
            amplitude: Complex64::new(1.0, 0.0),
            delta_n: 0.0,
            delta_t: 0.0,
        };
        for _ in 0..n {
            s = rk4_step(&s, &DriveField::ZERO, &DriveField::ZERO, &DriveField::ZERO, p, dt)
                .unwrap();
        }
        (s.amplitude.re - (-(n as f64) * dt * 1e9).exp()).abs()
    }

    #[test]
    fn halving_dt_gives_order_four_error_ratio() {
        let p = decay_params();
        let e2 = decay_error_at(2e-12, &p);
        let e1 = decay_error_at(1e-12, &p);
        let ratio = e2 / e1;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn zero_everything_yields_zero_trace() {
        let p = decay_params();
        let cfg = IntegratorConfig::default();
        let trace = integrate(MrrState::ZERO, &zero_waveform(100, cfg.dt_s), &p, &cfg, None).unwrap();
        assert_eq!(trace.len(), 101);
        for s in &trace {
            assert_eq!(s.state, MrrState::ZERO);
            assert_eq!(s.p_drop_w, 0.0);
            assert_eq!(s.e_through, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn recorded_sample_count_follows_stride() {
        let p = decay_params();
        for (n, stride, expected) in [(10usize, 3usize, 4usize), (10, 2, 6), (10, 1, 11), (9, 3, 4)] {
            let cfg = IntegratorConfig {
                dt_s: 1e-12,
                record_stride: stride,
            };
            let trace = integrate(MrrState::ZERO, &zero_waveform(n, cfg.dt_s), &p, &cfg, None).unwrap();
            assert_eq!(trace.len(), expected, "n={n} stride={stride}");
            assert_eq!(trace[0].t_s, 0.0);
        }
    }

    #[test]
    fn free_relaxation_matches_analytic_decay() {
        // Drive off: carriers and temperature relax exponentially with
        // their own lifetimes. dt = lifetime/100, horizon 5 lifetimes.
        let p = physics::tests::test_params();
        let n0 = 3e23;
        let t0 = 7.0;
        let dt = p.tau_fc / 100.0;
        let n_steps = 500; // 5 tau_fc
        let cfg = IntegratorConfig {
            dt_s: dt,
            record_stride: 10,
        };
        let initial = MrrState {
            amplitude: Complex64::new(0.0, 0.0),
            delta_n: n0,
            delta_t: t0,
        };
        let trace = integrate(initial, &zero_waveform(n_steps, dt), &p, &cfg, None).unwrap();
        for s in &trace {
            let expect_n = n0 * (-s.t_s / p.tau_fc).exp();
            let expect_t = t0 * (-s.t_s / p.tau_th).exp();
            assert_relative_eq!(s.state.delta_n, expect_n, max_relative = 1e-6);
            assert_relative_eq!(s.state.delta_t, expect_t, max_relative = 1e-6);
        }
    }

    #[test]
    fn lorentzian_steady_state_at_three_detunings() {
        // Linearized cavity under constant drive converges to
        // |a_ss|^2 = (2/tau_c) |E|^2 / (dw^2 + gamma^2) within 0.5%
        // after 10 linear lifetimes.
        let mut p = physics::tests::test_params().linearized();
        p.n_si = 3.485;
        p.alpha = 23.0;
        p.tau_c = 5e-11;
        let gamma = physics::loss_rates(&MrrState::ZERO, &p).total();
        let p_in: f64 = 1e-3;
        let e_in = Complex64::new(p_in.sqrt(), 0.0);
        let dt = 1e-12;
        let n = (10.0 / (gamma * dt)).ceil() as usize;
        let cfg = IntegratorConfig {
            dt_s: dt,
            record_stride: n,
        };
        for delta in [0.0, gamma, -gamma] {
            p.delta_omega = delta;
            let wf = EncodedWaveform::constant(e_in, n, dt);
            let trace = integrate(MrrState::ZERO, &wf, &p, &cfg, None).unwrap();
            let energy = trace.last().unwrap().state.amplitude.norm_sqr();
            let expected = (2.0 / p.tau_c) * p_in / (delta * delta + gamma * gamma);
            assert_relative_eq!(energy, expected, max_relative = 5e-3);
            // Drop power is the coupling rate times the energy.
            assert_relative_eq!(
                trace.last().unwrap().p_drop_w,
                (2.0 / p.tau_c) * energy,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn amplitude_decay_rate_matches_loss_budget() {
        // Log-slope of |a| under free decay equals gamma_tot within 1e-3.
        let mut p = decay_params();
        p.delta_omega = 2e9; // detuning only rotates the phase
        let gamma = physics::loss_rates(&MrrState::ZERO, &p).total();
        let dt = 1e-12;
        let n = 2000;
        let cfg = IntegratorConfig {
            dt_s: dt,
            record_stride: n,
        };
        let initial = MrrState {
            amplitude: Complex64::new(1e-7, 0.0),
            delta_n: 0.0,
            delta_t: 0.0,
        };
        let trace = integrate(initial, &zero_waveform(n, dt), &p, &cfg, None).unwrap();
        let first = trace.first().unwrap();
        let last = trace.last().unwrap();
        let slope = -(last.state.amplitude.norm() / first.state.amplitude.norm()).ln()
            / (last.t_s - first.t_s);
        assert_relative_eq!(slope, gamma, max_relative = 1e-3);
    }

    #[test]
    fn traces_are_bit_identical_across_runs() {
        let mut p = physics::tests::test_params();
        p.delta_omega = -5e10;
        let cfg = IntegratorConfig::default();
        let wf = EncodedWaveform::constant(Complex64::new(0.05, 0.0), 500, cfg.dt_s);
        let initial = MrrState::ZERO;
        let a = integrate(initial, &wf, &p, &cfg, None).unwrap();
        let b = integrate(initial, &wf, &p, &cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn public_step_agrees_with_normalized_path() {
        // The SI-coefficient step and the internally rescaled step describe
        // the same update.
        let mut p = physics::tests::test_params();
        p.delta_omega = 1e10;
        let dt = 1e-12;
        let cfg = IntegratorConfig {
            dt_s: dt,
            record_stride: 1,
        };
        let e = Complex64::new(0.03, -0.01);
        let wf = EncodedWaveform::constant(e, 200, dt);
        let initial = MrrState {
            amplitude: Complex64::new(2e-8, 1e-8),
            delta_n: 1e21,
            delta_t: 0.01,
        };
        let trace = integrate(initial, &wf, &p, &cfg, None).unwrap();

        let drive = DriveField {
            e_in: e,
            e_add: Complex64::new(0.0, 0.0),
        };
        let mut s = initial;
        for k in 0..200 {
            s = rk4_step(&s, &drive, &drive, &drive, &p, dt).unwrap();
            let got = trace[k + 1].state;
            assert_relative_eq!(got.amplitude.re, s.amplitude.re, max_relative = 1e-11);
            assert_relative_eq!(got.amplitude.im, s.amplitude.im, max_relative = 1e-11);
            assert_relative_eq!(got.delta_n, s.delta_n, max_relative = 1e-11, epsilon = 1e-3);
            assert_relative_eq!(got.delta_t, s.delta_t, max_relative = 1e-11, epsilon = 1e-30);
        }
    }

    #[test]
    fn unstable_step_reports_failing_time() {
        let p = decay_params(); // gamma_tot = 1e9
        let dt = 5e-9; // z = 5, far outside the RK4 stability region
        let cfg = IntegratorConfig {
            dt_s: dt,
            record_stride: 1000,
        };
        let initial = MrrState {
            amplitude: Complex64::new(1.0, 0.0),
            delta_n: 0.0,
            delta_t: 0.0,
        };
        let err = integrate(initial, &zero_waveform(2000, dt), &p, &cfg, None).unwrap_err();
        match err {
            Error::NonFinite { t_s } => assert!(t_s > 0.0),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn grid_helper_accepts_multiples_rejects_offsets() {
        assert_eq!(steps_on_grid(2e-11, 1e-12, "chip").unwrap(), 20);
        assert_eq!(steps_on_grid(5e-10, 1e-12, "delay").unwrap(), 500);
        assert!(steps_on_grid(2.5e-12, 1e-12, "chip").is_err());
        assert!(steps_on_grid(0.0, 1e-12, "chip").is_err());
    }

    #[test]
    fn stability_warnings_trigger_on_coarse_steps() {
        let p = physics::tests::test_params();
        let fine = IntegratorConfig::default();
        assert!(fine.stability_warnings(&p, 2e-11).is_empty());
        let coarse = IntegratorConfig {
            dt_s: 5e-11,
            record_stride: 1,
        };
        let w = coarse.stability_warnings(&p, 2e-11);
        assert!(w.iter().any(|m| m.contains("chip")));
        assert!(w.iter().any(|m| m.contains("tau_c")));
    }
}
