//! Raw experimental parameters, physical constants, and the derived
//! quantities everything downstream runs on.
//!
//! All rates and frequencies are kept in angular units (rad/s) internally.
//! Configuration files carry ordinary frequencies divided by 2*pi (Hz), as
//! laboratory parameter tables usually do; [`angular_from_hz`] is the only
//! place the conversion happens.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Fundamental constants in SI units. Defaults are the CODATA-2018 values;
/// they can be overridden through the config file for reproduction studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Newtonian gravitational constant (m^3 kg^-1 s^-2).
    pub grav: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Boltzmann constant (J/K).
    pub boltzmann: f64,
}

impl PhysicalConstants {
    pub const fn codata2018() -> Self {
        Self {
            grav: 6.67430e-11,
            hbar: 1.054571817e-34,
            boltzmann: 1.380649e-23,
        }
    }

    fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("G", self.grav),
            ("hbar", self.hbar),
            ("k_B", self.boltzmann),
        ] {
            ensure_positive(field, value)?;
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata2018()
    }
}

/// Converts an ordinary frequency in Hz to an angular rate in rad/s.
pub fn angular_from_hz(f: f64) -> f64 {
    TAU * f
}

/// Inverse of [`angular_from_hz`], used when echoing configs back out.
pub fn hz_from_angular(w: f64) -> f64 {
    w / TAU
}

/// Raw experimental inputs (SI units, angular rates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    /// Bare mechanical dissipation rate (rad/s).
    pub bare_damping: f64,
    /// Mechanical resonance frequency (rad/s).
    pub mech_freq: f64,
    /// Effective mechanical decay rate under feedback (rad/s).
    pub feedback_damping: f64,
    /// Optical cavity decay rate (rad/s).
    pub cavity_decay: f64,
    /// Optical resonance frequency (rad/s).
    pub cavity_freq: f64,
    /// Input laser power (W).
    pub input_power: f64,
    /// Cavity length (m).
    pub cavity_length: f64,
    /// Environmental temperature (K).
    pub temperature: f64,
    /// Mirror mass density (kg/m^3).
    pub density: f64,
    /// Mirror mass (kg).
    pub mass: f64,
    /// Geometry factor Lambda relating mass, density and mirror
    /// separation: m = rho * L^3 * Lambda.
    pub geometry: f64,
}

impl ExperimentParams {
    /// The built-in reference parameter set.
    ///
    /// This is the default configuration used by the CLI and the bundled
    /// figure-data recipes: a 100 g mirror pair at 1 mHz mechanical
    /// frequency read out through a 100 MHz-linewidth cavity.
    pub fn reference() -> Self {
        Self {
            bare_damping: angular_from_hz(1e-18),
            mech_freq: angular_from_hz(1e-3),
            feedback_damping: angular_from_hz(1e-6),
            cavity_decay: angular_from_hz(1e8),
            cavity_freq: angular_from_hz(2.8e14),
            input_power: 1e-4,
            cavity_length: 1.0,
            temperature: 1.0,
            density: 2e4,
            mass: 0.1,
            geometry: 2.0,
        }
    }

    /// Field-by-field positivity and ordering checks.
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("Gamma", self.bare_damping),
            ("Omega", self.mech_freq),
            ("gamma_m", self.feedback_damping),
            ("kappa", self.cavity_decay),
            ("omega_c", self.cavity_freq),
            ("P_in", self.input_power),
            ("ell", self.cavity_length),
            ("T", self.temperature),
            ("rho", self.density),
            ("m", self.mass),
            ("Lambda", self.geometry),
        ] {
            ensure_positive(field, value)?;
        }
        if self.bare_damping > self.feedback_damping {
            return Err(Error::BareExceedsFeedbackDamping {
                bare: self.bare_damping,
                feedback: self.feedback_damping,
            });
        }
        Ok(())
    }

    /// Non-fatal diagnostics. The measurement model adiabatically
    /// eliminates the cavity field, which needs kappa >> Omega; we warn
    /// below a ratio of 10^3 instead of refusing, so the regime boundary
    /// can be probed.
    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        let ratio = self.cavity_decay / self.mech_freq;
        if ratio <= 1e3 {
            out.push(ParamWarning::BadCavityMarginal { ratio });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamWarning {
    /// kappa/Omega is not large enough for the adiabatic cavity
    /// elimination to be comfortably valid.
    BadCavityMarginal { ratio: f64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::BadCavityMarginal { ratio } => write!(
                f,
                "kappa/Omega = {ratio:.3e} <= 1e3: adiabatic cavity elimination is marginal"
            ),
        }
    }
}

/// Common (+) or differential (-) mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Plus,
    Minus,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Plus, Mode::Minus];

    pub fn label(self) -> &'static str {
        match self {
            Mode::Plus => "plus",
            Mode::Minus => "minus",
        }
    }
}

/// Everything derived from [`ExperimentParams`]: the gravitational
/// coupling, per-mode frequencies and optomechanical couplings, thermal
/// occupations, force-noise magnitudes and measurement rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Mirror separation L = (m / (rho * Lambda))^(1/3) (m).
    pub separation: f64,
    /// Dimensionless gravitational coupling 4 G m / (L^3 Omega^2).
    pub epsilon: f64,
    /// Common-mode frequency (= the bare mechanical frequency, rad/s).
    pub freq_plus: f64,
    /// Differential-mode frequency Omega * sqrt(1 - epsilon) (rad/s).
    pub freq_minus: f64,
    /// Bare optomechanical coupling g = (omega_c / ell) sqrt(hbar / (2 m Omega)) (rad/s).
    pub bare_coupling: f64,
    /// Effective per-mode couplings g_+- (rad/s).
    pub coupling_plus: f64,
    pub coupling_minus: f64,
    /// Effective thermal phonon numbers under feedback.
    pub thermal_occ_plus: f64,
    pub thermal_occ_minus: f64,
    /// Force-noise magnitudes n_bar (rad/s).
    pub force_noise_plus: f64,
    pub force_noise_minus: f64,
    /// Measurement rates 16 g^2 / kappa (rad/s).
    pub meas_rate_plus: f64,
    pub meas_rate_minus: f64,
    /// Copied through for the dynamics and analytics.
    pub feedback_damping: f64,
    pub cavity_decay: f64,
}

/// One mode's slice of [`DerivedParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub freq: f64,
    pub coupling: f64,
    pub thermal_occ: f64,
    pub force_noise: f64,
    pub meas_rate: f64,
}

impl DerivedParams {
    pub fn mode(&self, mode: Mode) -> ModeParams {
        match mode {
            Mode::Plus => ModeParams {
                freq: self.freq_plus,
                coupling: self.coupling_plus,
                thermal_occ: self.thermal_occ_plus,
                force_noise: self.force_noise_plus,
                meas_rate: self.meas_rate_plus,
            },
            Mode::Minus => ModeParams {
                freq: self.freq_minus,
                coupling: self.coupling_minus,
                thermal_occ: self.thermal_occ_minus,
                force_noise: self.force_noise_minus,
                meas_rate: self.meas_rate_minus,
            },
        }
    }
}

/// Computes every derived quantity from the raw inputs.
///
/// Fails on nonpositive inputs, on a bare dissipation rate above the
/// feedback-controlled rate, and on epsilon >= 1 (the differential mode
/// would be unstable, so every downstream formula is invalid).
pub fn derive(params: &ExperimentParams, consts: &PhysicalConstants) -> Result<DerivedParams> {
    params.validate()?;
    consts.validate()?;

    let cube = params.mass / (params.density * params.geometry);
    let separation = cube.cbrt();
    let omega = params.mech_freq;
    let epsilon = 4.0 * consts.grav * params.mass / (cube * omega * omega);
    if epsilon >= 1.0 {
        return Err(Error::EpsilonOutOfRange { epsilon });
    }
    let freq_plus = omega;
    let freq_minus = omega * (1.0 - epsilon).sqrt();

    let bare_coupling = (params.cavity_freq / params.cavity_length)
        * (consts.hbar / (2.0 * params.mass * omega)).sqrt();
    let coupling = |mode_freq: f64| {
        bare_coupling
            * (4.0 * params.input_power * omega
                / (consts.hbar * params.cavity_freq * params.cavity_decay * mode_freq))
                .sqrt()
    };
    let coupling_plus = coupling(freq_plus);
    let coupling_minus = coupling(freq_minus);

    let thermal_occ = |mode_freq: f64| {
        consts.boltzmann * params.temperature * params.bare_damping
            / (params.feedback_damping * consts.hbar * mode_freq)
    };
    let thermal_occ_plus = thermal_occ(freq_plus);
    let thermal_occ_minus = thermal_occ(freq_minus);

    let meas_rate = |g: f64| 16.0 * g * g / params.cavity_decay;
    let meas_rate_plus = meas_rate(coupling_plus);
    let meas_rate_minus = meas_rate(coupling_minus);

    let force_noise = |n_th: f64, lambda: f64| {
        2.0 * params.feedback_damping * (2.0 * n_th + 1.0) + lambda
    };

    Ok(DerivedParams {
        separation,
        epsilon,
        freq_plus,
        freq_minus,
        bare_coupling,
        coupling_plus,
        coupling_minus,
        thermal_occ_plus,
        thermal_occ_minus,
        force_noise_plus: force_noise(thermal_occ_plus, meas_rate_plus),
        force_noise_minus: force_noise(thermal_occ_minus, meas_rate_minus),
        meas_rate_plus,
        meas_rate_minus,
        feedback_damping: params.feedback_damping,
        cavity_decay: params.cavity_decay,
    })
}

fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::NonPositiveInput { field, value });
    }
    Ok(())
}
