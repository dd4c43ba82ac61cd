//! Deterministic parameter sweeps over the full pipeline.
//!
//! Grid points are independent, so they run on a worker pool; results are
//! assembled by precomputed Cartesian index, never by completion order,
//! which keeps the output identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, ParamField};
use crate::error::{Error, Result};
use crate::gaussian::{log_negativity, BeamSplitter};
use crate::metrology::{negativity_gradient_exact, snr_budget, variance_en, MomentConvention, SnrBudget};
use crate::params::{derive, ExperimentParams, PhysicalConstants};
use crate::riccati::{evolve_pair, IntegratorConfig};
use crate::steady::{steady_negativity, SteadyReport};

/// One sweep axis: a parameter key and its file-unit values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: ParamField,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    /// Closed-form steady analysis only.
    SteadyOnly,
    /// Full time evolution plus the steady analysis.
    FullEvolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentParams,
    pub consts: PhysicalConstants,
    /// One or two axes; the first axis is the outer loop of the
    /// Cartesian row order.
    pub axes: Vec<Axis>,
    pub pipeline: PipelineKind,
    pub integrator: IntegratorConfig,
    pub target_snr: f64,
    pub t_meas_factor: f64,
    pub moments: MomentConvention,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidConfig(format!(
                "sweeps take 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "axis {} has no values",
                    axis.param.key()
                )));
            }
            if axis.values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "axis {} has nonpositive values",
                    axis.param.key()
                )));
            }
        }
        self.integrator.validate()
    }

    fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of the `idx`-th grid point in Cartesian order.
    fn point(&self, idx: usize) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.axes.len());
        let mut rem = idx;
        for axis in self.axes.iter().rev() {
            let n = axis.values.len();
            vals.push(axis.values[rem % n]);
            rem /= n;
        }
        vals.reverse();
        vals
    }
}

/// Trajectory-level summary for full-evolution sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// First sampled time with raw negativity > 0, when reached.
    pub onset_t: Option<f64>,
    /// The sample just before the onset (grid-resolution bracket).
    pub onset_lower: Option<f64>,
    /// Raw negativity at the final sample.
    pub en_final: f64,
    /// Convergence-flag time of the slower mode, if both latched.
    pub converged_at: Option<f64>,
}

/// One grid point's results. `error` carries per-point failures without
/// aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_values: Vec<f64>,
    pub steady: Option<SteadyReport>,
    /// Raw negativity of the steady state through the full pipeline.
    pub en_steady_raw: Option<f64>,
    pub budget: Option<SnrBudget>,
    pub summary: Option<TrajectorySummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_keys: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

/// Runs the pipeline at every grid point. Invalid points become failed
/// rows; only a malformed spec aborts the whole sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let n = spec.grid_len();
    let rows: Vec<SweepRow> = (0..n)
        .into_par_iter()
        .map(|idx| run_point(spec, idx))
        .collect();
    Ok(SweepResult {
        axis_keys: spec.axes.iter().map(|a| a.param.key()).collect(),
        rows,
    })
}

fn run_point(spec: &SweepSpec, idx: usize) -> SweepRow {
    let axis_values = spec.point(idx);
    let mut params = spec.base;
    for (axis, value) in spec.axes.iter().zip(&axis_values) {
        axis.param.apply(&mut params, *value);
    }
    let mut row = SweepRow {
        axis_values,
        steady: None,
        en_steady_raw: None,
        budget: None,
        summary: None,
        error: None,
    };
    match try_point(spec, &params, &mut row) {
        Ok(()) => {}
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn try_point(spec: &SweepSpec, params: &ExperimentParams, row: &mut SweepRow) -> Result<()> {
    let d = derive(params, &spec.consts)?;
    row.steady = Some(SteadyReport::compute(&d)?);
    let en = steady_negativity(&d)?;
    row.en_steady_raw = Some(en.raw);

    if en.raw > 0.0 {
        let vp = row.steady.as_ref().unwrap().v_plus;
        let vm = row.steady.as_ref().unwrap().v_minus;
        let grad = negativity_gradient_exact(&vp, &vm, d.epsilon)?;
        let var = variance_en(&grad, &vp, &vm, spec.moments)?;
        row.budget = Some(snr_budget(&d, en.raw, var, spec.target_snr, spec.t_meas_factor)?);
    }

    if spec.pipeline == PipelineKind::FullEvolution {
        let traj = evolve_pair(&d, &spec.integrator)?;
        let bs = BeamSplitter::new(d.epsilon)?;
        let mut onset_t = None;
        let mut onset_lower = None;
        let mut en_final = f64::NAN;
        for i in 0..traj.len() {
            let en_t = log_negativity(&bs.combine(&traj.plus[i], &traj.minus[i])?)?.raw;
            if onset_t.is_none() && en_t > 0.0 {
                onset_t = Some(traj.times[i]);
                onset_lower = if i > 0 { Some(traj.times[i - 1]) } else { None };
            }
            en_final = en_t;
        }
        let converged_at = match (traj.converged_at_plus, traj.converged_at_minus) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        row.summary = Some(TrajectorySummary { onset_t, onset_lower, en_final, converged_at });
    }
    Ok(())
}

impl SweepResult {
    /// Flat CSV, one row per grid point in Cartesian order. Failed points
    /// keep their axis values, report `nan` data cells, and carry the
    /// error text in the last column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for key in &self.axis_keys {
            out.push_str(key);
            out.push(',');
        }
        out.push_str(
            "Vqq_plus,Vqp_plus,Vpp_plus,Vqq_minus,Vqp_minus,Vpp_minus,\
             gamma_plus,gamma_minus,EN_analytic,criterion_met,criterion_margin,t_en_s,\
             EN_steady_raw,n_meas,t_meas_s,tau_s,onset_t_s,onset_lower_s,EN_final,converged_at_s,error\n",
        );
        for row in &self.rows {
            for v in &row.axis_values {
                out.push_str(&format!("{v:.16e},"));
            }
            let mut cells: Vec<String> = Vec::new();
            match &row.steady {
                Some(s) => cells.extend(s.flat().iter().map(|(_, v)| fmt_cell(*v))),
                None => cells.extend(std::iter::repeat_n("nan".to_string(), 12)),
            }
            cells.push(fmt_cell(row.en_steady_raw.unwrap_or(f64::NAN)));
            match &row.budget {
                Some(b) => {
                    cells.push(format!("{}", b.n_meas));
                    cells.push(fmt_cell(b.t_meas));
                    cells.push(fmt_cell(b.tau));
                }
                None => cells.extend(std::iter::repeat_n("nan".to_string(), 3)),
            }
            match &row.summary {
                Some(s) => {
                    cells.push(fmt_cell(s.onset_t.unwrap_or(f64::NAN)));
                    cells.push(fmt_cell(s.onset_lower.unwrap_or(f64::NAN)));
                    cells.push(fmt_cell(s.en_final));
                    cells.push(fmt_cell(s.converged_at.unwrap_or(f64::NAN)));
                }
                None => cells.extend(std::iter::repeat_n("nan".to_string(), 4)),
            }
            cells.push(row.error.clone().unwrap_or_default().replace(',', ";"));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// On-disk sweep description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpecFile {
    #[serde(default)]
    pub base: ConfigFile,
    pub axes: Vec<AxisFile>,
    pub pipeline: PipelineKind,
    #[serde(default)]
    pub integrator: IntegratorOverrides,
    #[serde(default)]
    pub target_snr: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisFile {
    pub param: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub log_range: Option<LogRange>,
}

/// Log-spaced axis generator: `points` values from `start` to `stop`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOverrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: Option<f64>,
    pub grid_points: Option<usize>,
    pub max_step: Option<f64>,
    pub conv_tol: Option<f64>,
}

impl SweepSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn resolve(&self) -> Result<SweepSpec> {
        let (base, consts, budget) = self.base.resolve();
        let mut axes = Vec::new();
        for af in &self.axes {
            let param = ParamField::from_key(&af.param)?;
            let values = match (&af.values, &af.log_range) {
                (Some(v), None) => v.clone(),
                (None, Some(r)) => {
                    if !(r.start > 0.0) || !(r.stop > r.start) || r.points < 2 {
                        return Err(Error::InvalidConfig(format!(
                            "bad log_range on axis {}",
                            af.param
                        )));
                    }
                    IntegratorConfig::log_grid(r.start, r.stop, r.points)
                }
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "axis {} needs exactly one of `values` or `log_range`",
                        af.param
                    )))
                }
            };
            axes.push(Axis { param, values });
        }
        let t_end = self.integrator.t_end.unwrap_or(2000.0);
        let mut integrator = IntegratorConfig::with_t_end(t_end);
        if let Some(v) = self.integrator.rel_tol {
            integrator.rel_tol = v;
        }
        if let Some(v) = self.integrator.abs_tol {
            integrator.abs_tol = v;
        }
        if let Some(v) = self.integrator.max_step {
            integrator.max_step = v;
        }
        if let Some(v) = self.integrator.conv_tol {
            integrator.conv_tol = v;
        }
        if let Some(n) = self.integrator.grid_points {
            let mut grid = vec![0.0];
            grid.extend(IntegratorConfig::log_grid(1e-2, t_end, n));
            integrator.output_grid = grid;
        }
        let spec = SweepSpec {
            base,
            consts,
            axes,
            pipeline: self.pipeline,
            integrator,
            target_snr: self.target_snr.unwrap_or(budget.target_snr),
            t_meas_factor: budget.t_meas_factor,
            moments: MomentConvention::Symmetric,
        };
        spec.validate()?;
        Ok(spec)
    }
}
