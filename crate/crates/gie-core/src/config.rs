//! Config-file schema. Files are JSON key-value objects carrying the
//! laboratory-table quantities; frequencies and rates are given divided by
//! 2*pi, in Hz, exactly as parameter tables quote them. Missing keys fall
//! back to the built-in reference set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{angular_from_hz, hz_from_angular, ExperimentParams, PhysicalConstants};

/// Optional overrides for the fundamental constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub grav: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(rename = "k_B", skip_serializing_if = "Option::is_none")]
    pub boltzmann: Option<f64>,
}

/// Budget conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    /// Proportionality constant on the per-shot settling time kappa/g_+^2.
    pub t_meas_factor: f64,
    /// Target signal-to-noise ratio.
    pub target_snr: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { t_meas_factor: 1.0, target_snr: 1.0 }
    }
}

/// The on-disk config document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "Gamma_over_2pi_Hz", skip_serializing_if = "Option::is_none")]
    pub bare_damping_hz: Option<f64>,
    #[serde(rename = "Omega_over_2pi_Hz", skip_serializing_if = "Option::is_none")]
    pub mech_freq_hz: Option<f64>,
    #[serde(rename = "gamma_m_over_2pi_Hz", skip_serializing_if = "Option::is_none")]
    pub feedback_damping_hz: Option<f64>,
    #[serde(rename = "kappa_over_2pi_Hz", skip_serializing_if = "Option::is_none")]
    pub cavity_decay_hz: Option<f64>,
    #[serde(rename = "omega_c_over_2pi_Hz", skip_serializing_if = "Option::is_none")]
    pub cavity_freq_hz: Option<f64>,
    #[serde(rename = "P_in_W", skip_serializing_if = "Option::is_none")]
    pub input_power_w: Option<f64>,
    #[serde(rename = "ell_m", skip_serializing_if = "Option::is_none")]
    pub cavity_length_m: Option<f64>,
    #[serde(rename = "T_K", skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(rename = "rho_kg_m3", skip_serializing_if = "Option::is_none")]
    pub density_kg_m3: Option<f64>,
    #[serde(rename = "m_kg", skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(rename = "Lambda", skip_serializing_if = "Option::is_none")]
    pub geometry: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetConfig>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Applies defaults and converts to internal angular units.
    pub fn resolve(&self) -> (ExperimentParams, PhysicalConstants, BudgetConfig) {
        let r = ExperimentParams::reference();
        let params = ExperimentParams {
            bare_damping: self
                .bare_damping_hz
                .map_or(r.bare_damping, angular_from_hz),
            mech_freq: self.mech_freq_hz.map_or(r.mech_freq, angular_from_hz),
            feedback_damping: self
                .feedback_damping_hz
                .map_or(r.feedback_damping, angular_from_hz),
            cavity_decay: self.cavity_decay_hz.map_or(r.cavity_decay, angular_from_hz),
            cavity_freq: self.cavity_freq_hz.map_or(r.cavity_freq, angular_from_hz),
            input_power: self.input_power_w.unwrap_or(r.input_power),
            cavity_length: self.cavity_length_m.unwrap_or(r.cavity_length),
            temperature: self.temperature_k.unwrap_or(r.temperature),
            density: self.density_kg_m3.unwrap_or(r.density),
            mass: self.mass_kg.unwrap_or(r.mass),
            geometry: self.geometry.unwrap_or(r.geometry),
        };
        let mut consts = PhysicalConstants::codata2018();
        if let Some(c) = &self.constants {
            if let Some(g) = c.grav {
                consts.grav = g;
            }
            if let Some(h) = c.hbar {
                consts.hbar = h;
            }
            if let Some(k) = c.boltzmann {
                consts.boltzmann = k;
            }
        }
        (params, consts, self.budget.unwrap_or_default())
    }

    /// Fully-populated echo of resolved parameters, in file units, for
    /// run manifests.
    pub fn echo(params: &ExperimentParams, consts: &PhysicalConstants) -> serde_json::Value {
        serde_json::json!({
            "Gamma_over_2pi_Hz": hz_from_angular(params.bare_damping),
            "Omega_over_2pi_Hz": hz_from_angular(params.mech_freq),
            "gamma_m_over_2pi_Hz": hz_from_angular(params.feedback_damping),
            "kappa_over_2pi_Hz": hz_from_angular(params.cavity_decay),
            "omega_c_over_2pi_Hz": hz_from_angular(params.cavity_freq),
            "P_in_W": params.input_power,
            "ell_m": params.cavity_length,
            "T_K": params.temperature,
            "rho_kg_m3": params.density,
            "m_kg": params.mass,
            "Lambda": params.geometry,
            "constants": { "G": consts.grav, "hbar": consts.hbar, "k_B": consts.boltzmann },
        })
    }
}

/// A sweepable raw parameter, addressed by its config-file key. Axis
/// values are given in file units (per-2*pi Hz for the rates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamField {
    BareDamping,
    MechFreq,
    FeedbackDamping,
    CavityDecay,
    CavityFreq,
    InputPower,
    CavityLength,
    Temperature,
    Density,
    Mass,
    Geometry,
}

impl ParamField {
    pub const ALL: [ParamField; 11] = [
        ParamField::BareDamping,
        ParamField::MechFreq,
        ParamField::FeedbackDamping,
        ParamField::CavityDecay,
        ParamField::CavityFreq,
        ParamField::InputPower,
        ParamField::CavityLength,
        ParamField::Temperature,
        ParamField::Density,
        ParamField::Mass,
        ParamField::Geometry,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ParamField::BareDamping => "Gamma_over_2pi_Hz",
            ParamField::MechFreq => "Omega_over_2pi_Hz",
            ParamField::FeedbackDamping => "gamma_m_over_2pi_Hz",
            ParamField::CavityDecay => "kappa_over_2pi_Hz",
            ParamField::CavityFreq => "omega_c_over_2pi_Hz",
            ParamField::InputPower => "P_in_W",
            ParamField::CavityLength => "ell_m",
            ParamField::Temperature => "T_K",
            ParamField::Density => "rho_kg_m3",
            ParamField::Mass => "m_kg",
            ParamField::Geometry => "Lambda",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.key() == key)
            .ok_or_else(|| Error::UnknownParameter(key.to_string()))
    }

    /// Whether file values carry the per-2*pi Hz convention.
    pub fn is_rate(self) -> bool {
        matches!(
            self,
            ParamField::BareDamping
                | ParamField::MechFreq
                | ParamField::FeedbackDamping
                | ParamField::CavityDecay
                | ParamField::CavityFreq
        )
    }

    /// Writes a file-unit value into the parameter set.
    pub fn apply(self, params: &mut ExperimentParams, file_value: f64) {
        let v = if self.is_rate() { angular_from_hz(file_value) } else { file_value };
        match self {
            ParamField::BareDamping => params.bare_damping = v,
            ParamField::MechFreq => params.mech_freq = v,
            ParamField::FeedbackDamping => params.feedback_damping = v,
            ParamField::CavityDecay => params.cavity_decay = v,
            ParamField::CavityFreq => params.cavity_freq = v,
            ParamField::InputPower => params.input_power = v,
            ParamField::CavityLength => params.cavity_length = v,
            ParamField::Temperature => params.temperature = v,
            ParamField::Density => params.density = v,
            ParamField::Mass => params.mass = v,
            ParamField::Geometry => params.geometry = v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_config_resolves_to_reference() {
        let cfg = ConfigFile::from_json("{}").unwrap();
        let (p, c, b) = cfg.resolve();
        assert_eq!(p, ExperimentParams::reference());
        assert_eq!(c, PhysicalConstants::codata2018());
        assert_eq!(b.t_meas_factor, 1.0);
    }

    #[test]
    fn partial_config_overrides_only_named_keys() {
        let cfg = ConfigFile::from_json(r#"{"T_K": 10.0, "kappa_over_2pi_Hz": 1e6}"#).unwrap();
        let (p, _, _) = cfg.resolve();
        assert_eq!(p.temperature, 10.0);
        assert_relative_eq!(p.cavity_decay, angular_from_hz(1e6), max_relative = 1e-15);
        assert_eq!(p.mass, ExperimentParams::reference().mass);
    }

    #[test]
    fn constants_override() {
        let cfg = ConfigFile::from_json(r#"{"constants": {"G": 6.674e-11}}"#).unwrap();
        let (_, c, _) = cfg.resolve();
        assert_eq!(c.grav, 6.674e-11);
        assert_eq!(c.hbar, PhysicalConstants::codata2018().hbar);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::from_json(r#"{"kappa_Hz": 1.0}"#).is_err());
    }

    #[test]
    fn param_field_round_trip_and_units() {
        for f in ParamField::ALL {
            assert_eq!(ParamField::from_key(f.key()).unwrap(), f);
        }
        assert!(ParamField::from_key("nonsense").is_err());

        let mut p = ExperimentParams::reference();
        ParamField::CavityDecay.apply(&mut p, 1e7);
        assert_relative_eq!(p.cavity_decay, angular_from_hz(1e7), max_relative = 1e-15);
        ParamField::Mass.apply(&mut p, 0.3);
        assert_eq!(p.mass, 0.3);
    }
}
