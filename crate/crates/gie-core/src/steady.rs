//! Closed-form steady state of the conditional dynamics, the analytic
//! negativity approximation, the entanglement criterion, and the
//! gravitational entangling timescale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{log_negativity, BeamSplitter, CovMat2, LogNegativity};
use crate::params::{DerivedParams, Mode};

/// Effective steady decay rate
/// gamma = sqrt(gamma_m^2 - 2 Omega^2 + 2 Omega sqrt(Omega^2 + n_bar lambda)),
/// evaluated in the cancellation-free form
/// sqrt(gamma_m^2 + 2 Omega n_bar lambda / (Omega + sqrt(Omega^2 + n_bar lambda))),
/// which is identical algebraically and stays accurate for
/// n_bar lambda << Omega^2. Always >= gamma_m.
pub fn steady_decay_rate(d: &DerivedParams, mode: Mode) -> f64 {
    let p = d.mode(mode);
    let gm = d.feedback_damping;
    let nl = p.force_noise * p.meas_rate;
    let root = (p.freq * p.freq + nl).sqrt();
    (gm * gm + 2.0 * p.freq * nl / (p.freq + root)).sqrt()
}

/// Closed-form conditional steady covariance of one mode.
pub fn steady_covariance(d: &DerivedParams, mode: Mode) -> Result<CovMat2> {
    let p = d.mode(mode);
    if p.meas_rate <= 0.0 {
        return Err(Error::DegenerateMeasurement);
    }
    let gm = d.feedback_damping;
    let gamma = steady_decay_rate(d, mode);
    let a = gamma - gm;
    let omega = p.freq;
    Ok(CovMat2::new(
        a / p.meas_rate,
        a * a / (2.0 * p.meas_rate * omega),
        a * (2.0 * omega * omega + gamma * gamma - gm * gamma) / (2.0 * p.meas_rate * omega * omega),
    ))
}

/// Validity ratios for the closed-form negativity's expansion. Each ratio
/// should be >> 1 (this crate reads that as >= 10) and the thermal
/// occupation should be at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// n_bar * lambda / Omega^2 for the plus mode.
    pub meas_noise_vs_osc: f64,
    /// Omega^2 / gamma_m^2.
    pub osc_vs_damping: f64,
    /// (4 g_+^2 / kappa gamma_m) / max(n_th, 1).
    pub meas_vs_thermal: f64,
    /// Plus-mode thermal occupation.
    pub thermal_occ: f64,
}

impl RegimeFlags {
    pub const DOMINANCE: f64 = 10.0;

    pub fn compute(d: &DerivedParams) -> Self {
        let gm = d.feedback_damping;
        let omega = d.freq_plus;
        Self {
            meas_noise_vs_osc: d.force_noise_plus * d.meas_rate_plus / (omega * omega),
            osc_vs_damping: omega * omega / (gm * gm),
            meas_vs_thermal: 4.0 * d.coupling_plus * d.coupling_plus
                / (d.cavity_decay * gm)
                / d.thermal_occ_plus.max(1.0),
            thermal_occ: d.thermal_occ_plus,
        }
    }

    pub fn in_regime(&self) -> bool {
        self.meas_noise_vs_osc >= Self::DOMINANCE
            && self.osc_vs_damping >= Self::DOMINANCE
            && self.meas_vs_thermal >= Self::DOMINANCE
            && self.thermal_occ >= 1.0
    }
}

/// Closed-form steady-state logarithmic negativity
/// -1/2 log2[1 - (kappa gamma_m / 16 g_+^2)(Omega eps / sqrt(2) gamma_m - 4 n_th)].
/// The returned value may be negative (separable). Errors with
/// [`Error::LogDomain`] when the bracket is nonpositive, which means the
/// state is too strongly entangled for this expansion.
pub fn analytic_negativity(d: &DerivedParams) -> Result<f64> {
    let gm = d.feedback_damping;
    let omega = d.freq_plus;
    let bracket = 1.0
        - (gm / d.meas_rate_plus)
            * (omega * d.epsilon / (std::f64::consts::SQRT_2 * gm) - 4.0 * d.thermal_occ_plus);
    if bracket <= 0.0 {
        return Err(Error::LogDomain { bracket });
    }
    Ok(-0.5 * bracket.log2())
}

/// Outcome of the steady-state entanglement criterion
/// Omega eps > 4 sqrt(2) gamma_m n_th.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub met: bool,
    /// Omega eps / (4 sqrt(2) gamma_m n_th); met exactly when > 1.
    pub margin: f64,
}

pub fn entanglement_criterion(d: &DerivedParams) -> CriterionReport {
    let margin = d.freq_plus * d.epsilon
        / (4.0 * std::f64::consts::SQRT_2 * d.feedback_damping * d.thermal_occ_plus);
    CriterionReport { met: margin > 1.0, margin }
}

/// Reference timescale pi / (Omega eps) for entangling the two oscillators
/// by gravity alone, without the optical readout.
pub fn t_entangle(d: &DerivedParams) -> Result<f64> {
    if d.epsilon <= 0.0 {
        return Err(Error::NonPositiveInput { field: "epsilon", value: d.epsilon });
    }
    Ok(std::f64::consts::PI / (d.freq_plus * d.epsilon))
}

/// Full pipeline at the fixed point: steady covariances of both modes,
/// mixed to the mirror basis, scored by the closed-form negativity.
pub fn steady_negativity(d: &DerivedParams) -> Result<LogNegativity> {
    let vp = steady_covariance(d, Mode::Plus)?;
    let vm = steady_covariance(d, Mode::Minus)?;
    let bs = BeamSplitter::new(d.epsilon)?;
    log_negativity(&bs.combine(&vp, &vm)?)
}

/// Flat summary of the steady state for reports and sweep rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub v_plus: CovMat2,
    pub v_minus: CovMat2,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// Closed-form negativity; None when outside the expansion's domain.
    pub en_analytic: Option<f64>,
    pub criterion_met: bool,
    pub criterion_margin: f64,
    /// Infinite when epsilon = 0.
    pub t_en: f64,
}

impl SteadyReport {
    pub fn compute(d: &DerivedParams) -> Result<Self> {
        let criterion = entanglement_criterion(d);
        Ok(Self {
            v_plus: steady_covariance(d, Mode::Plus)?,
            v_minus: steady_covariance(d, Mode::Minus)?,
            gamma_plus: steady_decay_rate(d, Mode::Plus),
            gamma_minus: steady_decay_rate(d, Mode::Minus),
            en_analytic: analytic_negativity(d).ok(),
            criterion_met: criterion.met,
            criterion_margin: criterion.margin,
            t_en: t_entangle(d).unwrap_or(f64::INFINITY),
        })
    }

    /// Flat key-value pairs in a fixed order, for CSV rows.
    pub fn flat(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("Vqq_plus", self.v_plus.vqq),
            ("Vqp_plus", self.v_plus.vqp),
            ("Vpp_plus", self.v_plus.vpp),
            ("Vqq_minus", self.v_minus.vqq),
            ("Vqp_minus", self.v_minus.vqp),
            ("Vpp_minus", self.v_minus.vpp),
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
            ("EN_analytic", self.en_analytic.unwrap_or(f64::NAN)),
            ("criterion_met", if self.criterion_met { 1.0 } else { 0.0 }),
            ("criterion_margin", self.criterion_margin),
            ("t_en_s", self.t_en),
        ]
    }
}
