//! Coupled-mode model of a nonlinear silicon add-drop microring.
//!
//! State: complex mode amplitude `a` (|a|2 is the intracavity energy), excess
//! free-carrier density generated by two-photon absorption, and the cavity
//! temperature offset. In the frame rotating at the pump frequency the model
//! reads
//!
//! ```text
//! da/dt  = [i delta(t) - gamma_tot(t)] a + i sqrt(2/tau_c) (E_in + E_add)
//! dN/dt  = -N/tau_fc + G_tpa |a|^4
//! dT/dt  = -T/tau_th + (Gamma_th / (m c_p)) R_abs(t) |a|^2
//! ```
//!
//! where `delta(t)` is the pump detuning shifted by free-carrier dispersion
//! (blue) and the thermo-optic effect (red), `gamma_tot` collects linear,
//! coupling, TPA and FCA amplitude loss rates, and `R_abs` is the absorbed
//! fraction of the energy decay rate (coupling losses leave as light and do
//! not heat the ring).

use crate::error::Error;
use alloc::format;
use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J s.
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;

/// Device and material parameters of the ring. All values SI.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MrrParams {
    /// Pump angular frequency, rad/s.
    pub omega_p: f64,
    /// Pump-resonance offset `omega_p - omega_0`, rad/s. The cold-cavity
    /// resonance is derived as `omega_p - delta_omega`.
    pub delta_omega: f64,
    /// Bus-ring coupling decay time per bus, s.
    pub tau_c: f64,
    /// Waveguide power attenuation, 1/m.
    pub alpha: f64,
    /// Free-carrier lifetime, s.
    pub tau_fc: f64,
    /// Thermal decay time, s.
    pub tau_th: f64,
    /// Silicon refractive index at the pump wavelength.
    pub n_si: f64,
    /// Free-carrier dispersion coefficient dn/dN, m^3 (negative).
    pub fcd_coefficient: f64,
    /// Thermo-optic coefficient dn/dT, 1/K (positive).
    pub thermo_optic_coefficient: f64,
    /// Two-photon absorption coefficient, m/W.
    pub beta_tpa: f64,
    /// Free-carrier absorption cross-section, m^2.
    pub sigma_fca: f64,
    /// Specific heat of the ring material, J/(kg K).
    pub specific_heat: f64,
    /// Mass of the ring, kg.
    pub mass: f64,
    /// FCA confinement factor.
    pub fca_confinement: f64,
    /// TPA confinement factor.
    pub tpa_confinement: f64,
    /// Thermal confinement factor.
    pub thermal_confinement: f64,
    /// FCA effective volume, m^3.
    pub fca_volume: f64,
    /// TPA effective volume, m^3.
    pub tpa_volume: f64,
    /// Fraction of the linear waveguide loss treated as absorption (heating)
    /// rather than scattering. 1.0 = worst-case heating.
    pub absorption_fraction: f64,
}

impl MrrParams {
    /// Cold-cavity resonance angular frequency, rad/s.
    pub fn omega_0(&self) -> f64 {
        self.omega_p - self.delta_omega
    }

    /// Checks the physical sign and positivity conventions. Run on ingested
    /// configurations; internally constructed variants (e.g. [`Self::linearized`])
    /// intentionally bypass it.
    pub fn validate(&self) -> Result<(), Error> {
        let positive: [(&str, f64); 8] = [
            ("tau_c", self.tau_c),
            ("tau_fc", self.tau_fc),
            ("tau_th", self.tau_th),
            ("specific_heat", self.specific_heat),
            ("mass", self.mass),
            ("fca_volume", self.fca_volume),
            ("tpa_volume", self.tpa_volume),
            ("n_si", self.n_si),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ConfigMismatch(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::ConfigMismatch(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.thermo_optic_coefficient > 0.0) {
            return Err(Error::ConfigMismatch(format!(
                "thermo_optic_coefficient must be > 0 (red shift), got {}",
                self.thermo_optic_coefficient
            )));
        }
        if !(self.fcd_coefficient < 0.0) {
            return Err(Error::ConfigMismatch(format!(
                "fcd_coefficient must be < 0 (blue shift), got {}",
                self.fcd_coefficient
            )));
        }
        for (name, v) in [
            ("fca_confinement", self.fca_confinement),
            ("tpa_confinement", self.tpa_confinement),
            ("thermal_confinement", self.thermal_confinement),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::ConfigMismatch(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.beta_tpa >= 0.0) || !(self.sigma_fca >= 0.0) {
            return Err(Error::ConfigMismatch(
                "beta_tpa and sigma_fca must be >= 0".into(),
            ));
        }
        if !(self.absorption_fraction >= 0.0 && self.absorption_fraction <= 1.0) {
            return Err(Error::ConfigMismatch(format!(
                "absorption_fraction must lie in [0, 1], got {}",
                self.absorption_fraction
            )));
        }
        if !(self.omega_0() > 0.0) {
            return Err(Error::ConfigMismatch("omega_0 must be positive".into()));
        }
        // Quasi-monochromatic assumption: the pump stays a small fractional
        // offset from resonance.
        let rel = (self.delta_omega / self.omega_0()).abs();
        if rel > 1e-2 {
            return Err(Error::ConfigMismatch(format!(
                "|delta_omega|/omega_0 = {rel:.3e} violates the quasi-monochromatic assumption"
            )));
        }
        Ok(())
    }

    /// Copy with every nonlinear coefficient zeroed: no TPA, no FCA, no
    /// index shifts. The cavity then responds as a fixed Lorentzian, which
    /// the analytic oracles use as reference.
    pub fn linearized(&self) -> MrrParams {
        MrrParams {
            beta_tpa: 0.0,
            sigma_fca: 0.0,
            fcd_coefficient: 0.0,
            thermo_optic_coefficient: 0.0,
            ..self.clone()
        }
    }
}

/// Dynamical state of the ring.
///
/// Also used for state time-derivatives (same shape, per-second units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrrState {
    /// Mode amplitude, sqrt(J); |amplitude|^2 is the intracavity energy.
    pub amplitude: Complex64,
    /// Excess free-carrier density, 1/m^3.
    pub delta_n: f64,
    /// Temperature offset from the environment, K.
    pub delta_t: f64,
}

impl MrrState {
    /// Cold, empty cavity in thermal equilibrium.
    pub const ZERO: MrrState = MrrState {
        amplitude: Complex64 { re: 0.0, im: 0.0 },
        delta_n: 0.0,
        delta_t: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.amplitude.re.is_finite()
            && self.amplitude.im.is_finite()
            && self.delta_n.is_finite()
            && self.delta_t.is_finite()
    }
}

/// Baseband input envelopes at the two driven ports, sqrt(W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    /// Envelope at the input port.
    pub e_in: Complex64,
    /// Envelope at the add port; zero when feedback is disabled.
    pub e_add: Complex64,
}

impl DriveField {
    pub const ZERO: DriveField = DriveField {
        e_in: Complex64 { re: 0.0, im: 0.0 },
        e_add: Complex64 { re: 0.0, im: 0.0 },
    };
}

/// Amplitude loss-rate budget, each 1/s (or 1/time-unit of the coefficient
/// set that produced it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRates {
    /// Linear propagation loss `c alpha / (2 n_si)`.
    pub linear: f64,
    /// Coupling to the two bus waveguides, `2 / tau_c`.
    pub coupling: f64,
    /// Two-photon absorption, quadratic in |amplitude|.
    pub tpa: f64,
    /// Free-carrier absorption, linear in the carrier density.
    pub fca: f64,
}

impl LossRates {
    pub fn total(&self) -> f64 {
        self.linear + self.coupling + self.tpa + self.fca
    }
}

/// Output-port observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortFields {
    /// Through-port envelope `E_in + i sqrt(2/tau_c) a`, sqrt(W).
    pub e_through: Complex64,
    /// Drop-port power `(2/tau_c) |a|^2`, W.
    pub p_drop: f64,
}

/// Unit system for the folded rate coefficients.
///
/// Each field is the SI magnitude of one internal unit. The equations keep
/// their form under this rescaling, so a single RHS routine serves both the
/// SI contract and the normalized integration path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Seconds per internal time unit.
    pub time_s: f64,
    /// Joules per internal energy unit (|amplitude|^2).
    pub energy_j: f64,
    /// Watts per internal power unit (|field|^2).
    pub power_w: f64,
    /// Carriers per m^3 per internal density unit.
    pub carrier_m3: f64,
}

impl UnitSystem {
    /// Plain SI: seconds, joules, watts, 1/m^3.
    pub const SI: UnitSystem = UnitSystem {
        time_s: 1.0,
        energy_j: 1.0,
        power_w: 1.0,
        carrier_m3: 1.0,
    };

    /// Internal normalization keeping state variables O(1): time in ns,
    /// intracavity energy in pJ, port powers in mW, carrier density in
    /// units of 1e24 m^-3, temperature in K.
    pub const NORMALIZED: UnitSystem = UnitSystem {
        time_s: 1e-9,
        energy_j: 1e-12,
        power_w: 1e-3,
        carrier_m3: 1e24,
    };

    /// Scale factor from an SI amplitude (sqrt(J)) to this system.
    pub fn amplitude_from_si(&self) -> f64 {
        1.0 / libm_sqrt(self.energy_j)
    }

    /// Scale factor from an SI field (sqrt(W)) to this system.
    pub fn field_from_si(&self) -> f64 {
        1.0 / libm_sqrt(self.power_w)
    }
}

#[inline]
fn libm_sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

/// Rate coefficients of the model folded once from [`MrrParams`], expressed
/// in the chosen [`UnitSystem`]. States, drives and times handed to the
/// methods must be in the same system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    units: UnitSystem,
    /// Pump-resonance offset.
    delta_omega: f64,
    /// Detuning shift per unit carrier density, `omega_0 dn/dN / n_si`.
    det_per_carrier: f64,
    /// Detuning shift per kelvin, `omega_0 dn/dT / n_si`.
    det_per_kelvin: f64,
    gamma_lin: f64,
    gamma_coup: f64,
    /// TPA loss per unit intracavity energy.
    tpa_per_energy: f64,
    /// FCA loss per unit carrier density.
    fca_per_carrier: f64,
    /// Injection coefficient `sqrt(2/tau_c)` mapping fields to d(amplitude)/dt.
    inject: f64,
    /// Carrier generation per |amplitude|^4.
    carrier_gen: f64,
    inv_tau_fc: f64,
    inv_tau_th: f64,
    /// `Gamma_th / (m c_p)` mapping absorbed power to heating rate.
    heat_per_power: f64,
    absorption_fraction: f64,
    /// Drop power per unit intracavity energy.
    drop_per_energy: f64,
    /// Through-port leakage coefficient mapping amplitude to field.
    through_leak: f64,
}

impl Coeffs {
    pub fn new(p: &MrrParams, units: UnitSystem) -> Coeffs {
        let c = SPEED_OF_LIGHT;
        let ut = units.time_s;
        let ue = units.energy_j;
        let up = units.power_w;
        let un = units.carrier_m3;
        let omega_0 = p.omega_0();
        let inject_si = libm_sqrt(2.0 / p.tau_c);
        let carrier_gen_si = p.fca_confinement * c * c * p.beta_tpa
            / (2.0 * REDUCED_PLANCK * p.omega_p * p.fca_volume * p.fca_volume * p.n_si * p.n_si);
        Coeffs {
            units,
            delta_omega: p.delta_omega * ut,
            det_per_carrier: omega_0 * p.fcd_coefficient / p.n_si * un * ut,
            det_per_kelvin: omega_0 * p.thermo_optic_coefficient / p.n_si * ut,
            gamma_lin: c * p.alpha / (2.0 * p.n_si) * ut,
            gamma_coup: 2.0 / p.tau_c * ut,
            tpa_per_energy: p.tpa_confinement * p.beta_tpa * c * c
                / (2.0 * p.n_si * p.n_si * p.tpa_volume)
                * ue
                * ut,
            fca_per_carrier: p.fca_confinement * p.sigma_fca * c / (2.0 * p.n_si) * un * ut,
            inject: inject_si * ut * libm_sqrt(up / ue),
            carrier_gen: carrier_gen_si * ue * ue * ut / un,
            inv_tau_fc: ut / p.tau_fc,
            inv_tau_th: ut / p.tau_th,
            heat_per_power: p.thermal_confinement / (p.mass * p.specific_heat) * ue,
            absorption_fraction: p.absorption_fraction,
            drop_per_energy: 2.0 / p.tau_c * ue / up,
            through_leak: inject_si * libm_sqrt(ue / up),
        }
    }

    pub fn si(p: &MrrParams) -> Coeffs {
        Coeffs::new(p, UnitSystem::SI)
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    /// Instantaneous detuning `delta_omega + (omega_0/n_si)(N dn/dN + T dn/dT)`.
    /// Carriers shift it down (resonance blue-shifts), heating shifts it up.
    #[inline]
    pub fn detuning(&self, state: &MrrState) -> f64 {
        self.delta_omega
            + self.det_per_carrier * state.delta_n
            + self.det_per_kelvin * state.delta_t
    }

    #[inline]
    pub fn loss_rates(&self, state: &MrrState) -> LossRates {
        LossRates {
            linear: self.gamma_lin,
            coupling: self.gamma_coup,
            tpa: self.tpa_per_energy * state.amplitude.norm_sqr(),
            fca: self.fca_per_carrier * state.delta_n,
        }
    }

    /// State time-derivative. Pure; identical inputs give identical outputs.
    #[inline]
    pub fn rhs(&self, state: &MrrState, drive: &DriveField) -> MrrState {
        let energy = state.amplitude.norm_sqr();
        let gamma_tpa = self.tpa_per_energy * energy;
        let gamma_fca = self.fca_per_carrier * state.delta_n;
        let gamma_tot = self.gamma_lin + self.gamma_coup + gamma_tpa + gamma_fca;
        let delta = self.detuning(state);

        // da/dt = (i delta - gamma_tot) a + i inject (E_in + E_add)
        let pole = Complex64::new(-gamma_tot, delta);
        let drive_sum = drive.e_in + drive.e_add;
        let d_amp = pole * state.amplitude
            + Complex64::new(-self.inject * drive_sum.im, self.inject * drive_sum.re);

        let d_carriers = -state.delta_n * self.inv_tau_fc + self.carrier_gen * energy * energy;

        // Energy decays at twice the amplitude rate; only absorbed (not
        // coupled-out) power heats the ring.
        let absorbed_rate =
            2.0 * (self.absorption_fraction * self.gamma_lin + gamma_tpa + gamma_fca);
        let d_temp =
            -state.delta_t * self.inv_tau_th + self.heat_per_power * absorbed_rate * energy;

        MrrState {
            amplitude: d_amp,
            delta_n: d_carriers,
            delta_t: d_temp,
        }
    }

    /// Drop-port power `(2/tau_c) |a|^2`, in the system's power unit.
    #[inline]
    pub fn drop_power(&self, state: &MrrState) -> f64 {
        self.drop_per_energy * state.amplitude.norm_sqr()
    }

    /// Through-port envelope `E_in + i sqrt(2/tau_c) a`.
    #[inline]
    pub fn through_field(&self, state: &MrrState, e_in: Complex64) -> Complex64 {
        e_in + Complex64::new(
            -self.through_leak * state.amplitude.im,
            self.through_leak * state.amplitude.re,
        )
    }
}

/// Instantaneous detuning in rad/s. See [`Coeffs::detuning`].
pub fn detuning(state: &MrrState, params: &MrrParams) -> f64 {
    Coeffs::si(params).detuning(state)
}

/// Amplitude loss-rate budget in 1/s.
pub fn loss_rates(state: &MrrState, params: &MrrParams) -> LossRates {
    Coeffs::si(params).loss_rates(state)
}

/// State time-derivative in per-second units, rotating frame at the pump.
pub fn rhs(state: &MrrState, drive: &DriveField, params: &MrrParams) -> MrrState {
    Coeffs::si(params).rhs(state, drive)
}

/// Through-port field and drop-port power for the current state.
pub fn port_fields(state: &MrrState, drive: &DriveField, params: &MrrParams) -> PortFields {
    let coeffs = Coeffs::si(params);
    PortFields {
        e_through: coeffs.through_field(state, drive.e_in),
        p_drop: coeffs.drop_power(state),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Round-number parameter set used by the hand-arithmetic oracles below.
    /// Independent of any shipped device file so later device tuning cannot
    /// silently move these expectations.
    pub(crate) fn test_params() -> MrrParams {
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

    fn state(a: Complex64, n: f64, t: f64) -> MrrState {
        MrrState {
            amplitude: a,
            delta_n: n,
            delta_t: t,
        }
    }

    #[test]
    fn cold_cavity_detuning_is_delta_omega() {
        let mut p = test_params();
        p.delta_omega = 7.5e9;
        assert_eq!(detuning(&MrrState::ZERO, &p), 7.5e9);
    }

    #[test]
    fn heating_raises_detuning_carriers_lower_it() {
        let p = test_params();
        let hot = state(Complex64::new(0.0, 0.0), 0.0, 1.0);
        let doped = state(Complex64::new(0.0, 0.0), 1e23, 0.0);
        assert!(detuning(&hot, &p) > detuning(&MrrState::ZERO, &p));
        assert!(detuning(&doped, &p) < detuning(&MrrState::ZERO, &p));
    }

    #[test]
    fn detuning_matches_hand_arithmetic() {
        // delta = (1.2e15/3.5) * (1e24 * -1.7e-27 + 2.0 * 1.8e-4)
        let p = test_params();
        let s = state(Complex64::new(0.0, 0.0), 1e24, 2.0);
        assert_relative_eq!(detuning(&s, &p), -459_428_571_428.5714, max_relative = 1e-12);
    }

    #[test]
    fn cold_cavity_loss_is_linear_plus_coupling() {
        let p = test_params();
        let r = loss_rates(&MrrState::ZERO, &p);
        assert_eq!(r.tpa, 0.0);
        assert_eq!(r.fca, 0.0);
        assert_relative_eq!(r.linear, 856_549_880.0, max_relative = 1e-12);
        assert_relative_eq!(r.coupling, 4e10, max_relative = 1e-12);
        assert_relative_eq!(r.total(), 856_549_880.0 + 4e10, max_relative = 1e-12);
    }

    #[test]
    fn tpa_quadratic_fca_linear_in_their_drivers() {
        let p = test_params();
        let s1 = state(Complex64::new(3e-7, 0.0), 2e23, 0.0);
        let s2 = state(Complex64::new(6e-7, 0.0), 2e23, 0.0);
        let r1 = loss_rates(&s1, &p);
        let r2 = loss_rates(&s2, &p);
        assert_relative_eq!(r2.tpa, 4.0 * r1.tpa, max_relative = 1e-12);
        assert_eq!(r1.fca, r2.fca);
    }

    #[test]
    fn loss_rates_match_hand_arithmetic() {
        let p = test_params();
        let s = state(Complex64::new(3e-7, 0.0), 1e24, 0.0);
        let r = loss_rates(&s, &p);
        assert_relative_eq!(r.tpa, 475_423_147.609_353_3, max_relative = 1e-12);
        assert_relative_eq!(r.fca, 57_817_116_900.0, max_relative = 1e-12);
        assert_relative_eq!(r.total(), 99_149_089_927.609_34, max_relative = 1e-12);
    }

    #[test]
    fn pure_carrier_decay() {
        let p = test_params();
        let s = state(Complex64::new(0.0, 0.0), 4e22, 0.0);
        let d = rhs(&s, &DriveField::ZERO, &p);
        assert_eq!(d.amplitude, Complex64::new(0.0, 0.0));
        assert_relative_eq!(d.delta_n, -4e22 / 1e-8, max_relative = 1e-12);
        assert_eq!(d.delta_t, 0.0);
    }

    #[test]
    fn pure_thermal_decay() {
        let p = test_params();
        let s = state(Complex64::new(0.0, 0.0), 0.0, 3.0);
        let d = rhs(&s, &DriveField::ZERO, &p);
        assert_eq!(d.amplitude, Complex64::new(0.0, 0.0));
        assert_eq!(d.delta_n, 0.0);
        assert_relative_eq!(d.delta_t, -3.0 / 5e-8, max_relative = 1e-12);
    }

    #[test]
    fn injection_only_term() {
        let p = test_params();
        let e = Complex64::new(2e-3, -1e-3);
        let drive = DriveField {
            e_in: e,
            e_add: Complex64::new(0.0, 0.0),
        };
        let d = rhs(&MrrState::ZERO, &drive, &p);
        let expected = Complex64::new(0.0, (2.0_f64 / 5e-11).sqrt()) * e;
        assert_relative_eq!(d.amplitude.re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(d.amplitude.im, expected.im, max_relative = 1e-12);
        assert_eq!(d.delta_n, 0.0);
        assert_eq!(d.delta_t, 0.0);
    }

    #[test]
    fn carrier_generation_is_quartic_in_amplitude() {
        let p = test_params();
        let s1 = state(Complex64::new(3e-7, 0.0), 0.0, 0.0);
        let s2 = state(Complex64::new(6e-7, 0.0), 0.0, 0.0);
        let g1 = rhs(&s1, &DriveField::ZERO, &p).delta_n;
        let g2 = rhs(&s2, &DriveField::ZERO, &p).delta_n;
        assert_relative_eq!(g2, 16.0 * g1, max_relative = 1e-12);
        // |a|^2 = 9e-14 J generation, hand-evaluated.
        assert_relative_eq!(g1, 6.762_315_376_896_041e31, max_relative = 1e-12);
    }

    #[test]
    fn heating_rate_matches_hand_arithmetic() {
        let p = test_params();
        let s = state(Complex64::new(3e-7, 0.0), 1e24, 0.0);
        let d = rhs(&s, &DriveField::ZERO, &p);
        // R_abs = 2*(gamma_lin + gamma_tpa + gamma_fca); heating = Gth R |a|^2 / (m cp)
        assert_relative_eq!(d.delta_t, 1_140_732_448.603_894_7, max_relative = 1e-12);
    }

    #[test]
    fn empty_cavity_passes_through() {
        let p = test_params();
        let drive = DriveField {
            e_in: Complex64::new(1e-3, 5e-4),
            e_add: Complex64::new(0.0, 0.0),
        };
        let out = port_fields(&MrrState::ZERO, &drive, &p);
        assert_eq!(out.e_through, drive.e_in);
        assert_eq!(out.p_drop, 0.0);
    }

    #[test]
    fn symmetric_leakage_without_input() {
        let p = test_params();
        let s = state(Complex64::new(2e-7, -1e-7), 0.0, 0.0);
        let out = port_fields(&s, &DriveField::ZERO, &p);
        assert_relative_eq!(out.e_through.norm_sqr(), out.p_drop, max_relative = 1e-12);
        assert!(out.p_drop > 0.0);
    }

    #[test]
    fn rhs_is_pure() {
        let p = test_params();
        let s = state(Complex64::new(1e-7, 2e-7), 3e22, 0.4);
        let drive = DriveField {
            e_in: Complex64::new(1e-3, 0.0),
            e_add: Complex64::new(0.0, 2e-4),
        };
        let a = rhs(&s, &drive, &p);
        let b = rhs(&s, &drive, &p);
        assert_eq!(a, b);
    }

    #[test]
    fn normalized_coeffs_agree_with_si() {
        // One RHS evaluation through both unit systems must describe the
        // same physics after rescaling.
        let p = test_params();
        let si = Coeffs::si(&p);
        let norm = Coeffs::new(&p, UnitSystem::NORMALIZED);
        let s_si = state(Complex64::new(2e-7, -3e-7), 5e23, 0.8);
        let u = UnitSystem::NORMALIZED;
        let s_norm = MrrState {
            amplitude: s_si.amplitude * u.amplitude_from_si(),
            delta_n: s_si.delta_n / u.carrier_m3,
            delta_t: s_si.delta_t,
        };
        let drive_si = DriveField {
            e_in: Complex64::new(3e-2, 1e-2),
            e_add: Complex64::new(-2e-3, 4e-3),
        };
        let drive_norm = DriveField {
            e_in: drive_si.e_in * u.field_from_si(),
            e_add: drive_si.e_add * u.field_from_si(),
        };

        let d_si = si.rhs(&s_si, &drive_si);
        let d_norm = norm.rhs(&s_norm, &drive_norm);
        // d(amplitude)/dt scales by amp_scale * time; carriers by 1/(un) * time.
        assert_relative_eq!(
            d_norm.amplitude.re,
            d_si.amplitude.re * u.amplitude_from_si() * u.time_s,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            d_norm.amplitude.im,
            d_si.amplitude.im * u.amplitude_from_si() * u.time_s,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            d_norm.delta_n,
            d_si.delta_n / u.carrier_m3 * u.time_s,
            max_relative = 1e-12
        );
        assert_relative_eq!(d_norm.delta_t, d_si.delta_t * u.time_s, max_relative = 1e-12);

        // Observables map back to SI.
        assert_relative_eq!(
            norm.drop_power(&s_norm) * u.power_w,
            si.drop_power(&s_si),
            max_relative = 1e-12
        );
        let th_si = si.through_field(&s_si, drive_si.e_in);
        let th_norm = norm.through_field(&s_norm, drive_norm.e_in);
        assert_relative_eq!(th_norm.re / u.field_from_si(), th_si.re, max_relative = 1e-12);
        assert_relative_eq!(th_norm.im / u.field_from_si(), th_si.im, max_relative = 1e-12);
    }

    #[test]
    fn validate_accepts_physical_and_rejects_sign_flips() {
        let p = test_params();
        assert!(p.validate().is_ok());

        let mut bad = test_params();
        bad.fcd_coefficient = 1.7e-27;
        assert!(matches!(bad.validate(), Err(Error::ConfigMismatch(_))));

        let mut bad = test_params();
        bad.thermo_optic_coefficient = -1.0e-4;
        assert!(bad.validate().is_err());

        let mut bad = test_params();
        bad.tau_fc = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = test_params();
        bad.delta_omega = bad.omega_p * 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn linearized_keeps_losses_drops_shifts() {
        let p = test_params().linearized();
        let s = state(Complex64::new(3e-7, 0.0), 1e24, 2.0);
        assert_eq!(detuning(&s, &p), 0.0);
        let r = loss_rates(&s, &p);
        assert_eq!(r.tpa, 0.0);
        assert_eq!(r.fca, 0.0);
        assert!(r.total() > 0.0);
    }

    #[test]
    fn detuning_sign_structure_holds_across_parameter_draws() {
        // Finite-difference signs of the detuning with respect to the two
        // slow variables, over a spread of plausible device parameters.
        let mut p = test_params();
        for scale in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
            p.n_si = 3.4 * scale.sqrt();
            p.thermo_optic_coefficient = 1.8e-4 * scale;
            p.fcd_coefficient = -1.7e-27 / scale;
            let base = state(Complex64::new(0.0, 0.0), 1e23, 0.5);
            let d0 = detuning(&base, &p);
            let mut warmer = base;
            warmer.delta_t += 1e-3;
            let mut denser = base;
            denser.delta_n += 1e20;
            assert!(detuning(&warmer, &p) > d0);
            assert!(detuning(&denser, &p) < d0);
        }
    }

    #[test]
    fn zero_state_fixed_point_without_drive() {
        let p = test_params();
        let d = rhs(&MrrState::ZERO, &DriveField::ZERO, &p);
        assert_eq!(d, MrrState::ZERO);
        assert_abs_diff_eq!(d.delta_n, 0.0);
    }
}
