//! Command implementations. Each command writes its data files plus a
//! manifest into the output directory and prints a one-line summary.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context as _;

use gie_core::config::{BudgetConfig, ConfigFile};
use gie_core::gaussian::{log_negativity, purity, squeezing_diagnostics, BeamSplitter};
use gie_core::metrology::{negativity_gradient, snr_budget, variance_en, MomentConvention};
use gie_core::params::{angular_from_hz, derive, DerivedParams, ExperimentParams, Mode, PhysicalConstants};
use gie_core::riccati::{evolve_pair, IntegratorConfig};
use gie_core::steady::{entanglement_criterion, steady_covariance, steady_negativity, SteadyReport};
use gie_core::sweep::{run_sweep, SweepSpecFile};

use crate::manifest::ManifestBuilder;

pub struct Context {
    pub params: ExperimentParams,
    pub consts: PhysicalConstants,
    pub budget: BudgetConfig,
    pub out: std::path::PathBuf,
    pub seed: Option<u64>,
    pub moments: MomentConvention,
    pub strict_paper_moments: bool,
}

impl Context {
    pub fn prepare(cli: &crate::Cli) -> anyhow::Result<Self> {
        let config = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ConfigFile::from_json(&text)?
            }
            None => ConfigFile::default(),
        };
        let (params, consts, budget) = config.resolve();
        for w in params.warnings() {
            eprintln!("warning: {w}");
        }
        std::fs::create_dir_all(&cli.out)
            .with_context(|| format!("creating output dir {}", cli.out.display()))?;
        Ok(Self {
            params,
            consts,
            budget,
            out: cli.out.clone(),
            seed: cli.seed,
            moments: if cli.strict_paper_moments {
                MomentConvention::PpLinear
            } else {
                MomentConvention::Symmetric
            },
            strict_paper_moments: cli.strict_paper_moments,
        })
    }

    fn derived(&self) -> anyhow::Result<DerivedParams> {
        Ok(derive(&self.params, &self.consts)?)
    }

    fn manifest(&self) -> ManifestBuilder {
        ManifestBuilder::new(
            &self.params,
            &self.consts,
            &self.budget,
            self.seed,
            self.strict_paper_moments,
        )
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory run: the covariance CSV extended with negativity, purity
/// and squeezing columns.
pub fn evolve(ctx: &Context, t_end: f64, grid_points: usize) -> anyhow::Result<()> {
    let d = ctx.derived()?;
    let mut cfg = IntegratorConfig::with_t_end(t_end);
    cfg.output_grid = evolve_grid(t_end, grid_points);
    let traj = evolve_pair(&d, &cfg)?;
    let bs = BeamSplitter::new(d.epsilon)?;

    let mut out = String::from(
        "t_s,Vqq_plus,Vqp_plus,Vpp_plus,Vqq_minus,Vqp_minus,Vpp_minus,\
         EN_raw,EN,purity_plus,purity_minus,squeeze_angle_plus,squeeze_ratio_plus\n",
    );
    for i in 0..traj.len() {
        let (p, m) = (traj.plus[i], traj.minus[i]);
        let en = log_negativity(&bs.combine(&p, &m)?)?;
        let sq = squeezing_diagnostics(&p);
        let cells = [
            traj.times[i],
            p.vqq,
            p.vqp,
            p.vpp,
            m.vqq,
            m.vqp,
            m.vpp,
            en.raw,
            en.clamped,
            purity(&p)?,
            purity(&m)?,
            sq.angle,
            sq.eig_ratio,
        ];
        writeln!(out, "{}", cells.map(num).join(",")).unwrap();
    }
    ctx.write("evolve.csv", &out)?;
    ctx.manifest()
        .with("integrator", integrator_echo(&cfg))
        .write(&ctx.out, "evolve", &["evolve.csv"])?;
    println!(
        "evolve: {} samples to t = {t_end} s -> {}",
        traj.len(),
        ctx.out.join("evolve.csv").display()
    );
    Ok(())
}

fn evolve_grid(t_end: f64, points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if t_end > 0.0 {
        grid.extend(IntegratorConfig::log_grid(1e-2_f64.min(t_end), t_end, points));
    }
    grid.dedup_by(|a, b| (*a - *b).abs() < f64::EPSILON);
    grid
}

fn integrator_echo(cfg: &IntegratorConfig) -> serde_json::Value {
    serde_json::json!({
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "t_end": cfg.t_end,
        "grid_points": cfg.output_grid.len(),
        "max_step": if cfg.max_step.is_finite() { Some(cfg.max_step) } else { None },
        "conv_tol": cfg.conv_tol,
    })
}

/// Steady-state report as JSON plus a printed summary.
pub fn steady(ctx: &Context) -> anyhow::Result<()> {
    let d = ctx.derived()?;
    let report = SteadyReport::compute(&d)?;
    let en_full = steady_negativity(&d)?;
    let mut doc = serde_json::to_value(report)?;
    doc.as_object_mut().unwrap().insert(
        "EN_steady_raw".into(),
        serde_json::json!(en_full.raw),
    );
    ctx.write("steady.json", &serde_json::to_string_pretty(&doc)?)?;
    ctx.manifest().write(&ctx.out, "steady", &["steady.json"])?;
    println!(
        "steady: criterion margin {:.4} ({}), EN_analytic {}, EN_pipeline {:.6e}",
        report.criterion_margin,
        if report.criterion_met { "entangled" } else { "separable" },
        report
            .en_analytic
            .map_or("n/a".to_string(), |v| format!("{v:.6e}")),
        en_full.raw,
    );
    Ok(())
}

/// Plus-mode covariance components against time on the reference grid.
pub fn figure_fig2(ctx: &Context) -> anyhow::Result<()> {
    let d = ctx.derived()?;
    let mut cfg = IntegratorConfig::with_t_end(2000.0);
    cfg.output_grid = IntegratorConfig::log_grid(1e-2, 2000.0, 400);
    let traj = evolve_pair(&d, &cfg)?;
    let mut out = String::from("t_s,Vqq_plus,Vqp_plus,Vpp_plus\n");
    for i in 0..traj.len() {
        let p = traj.plus[i];
        writeln!(out, "{},{},{},{}", num(traj.times[i]), num(p.vqq), num(p.vqp), num(p.vpp))
            .unwrap();
    }
    ctx.write("fig2.csv", &out)?;
    ctx.manifest()
        .with("integrator", integrator_echo(&cfg))
        .write(&ctx.out, "fig2", &["fig2.csv"])?;
    println!("fig2: {} rows -> {}", traj.len(), ctx.out.join("fig2.csv").display());
    Ok(())
}

/// Negativity against time for three cavity decay rates.
pub fn figure_fig3(ctx: &Context) -> anyhow::Result<()> {
    const KAPPAS_HZ: [(f64, &str); 3] = [(1e8, "k1e8"), (1e7, "k1e7"), (1e6, "k1e6")];
    let mut cfg = IntegratorConfig::with_t_end(2000.0);
    cfg.output_grid = IntegratorConfig::log_grid(1e-2, 2000.0, 400);

    let mut columns = Vec::new();
    for (kappa_hz, _) in KAPPAS_HZ {
        let mut params = ctx.params;
        params.cavity_decay = angular_from_hz(kappa_hz);
        let d = derive(&params, &ctx.consts)?;
        let traj = evolve_pair(&d, &cfg)?;
        let bs = BeamSplitter::new(d.epsilon)?;
        let mut raw = Vec::with_capacity(traj.len());
        let mut clamped = Vec::with_capacity(traj.len());
        for i in 0..traj.len() {
            let en = log_negativity(&bs.combine(&traj.plus[i], &traj.minus[i])?)?;
            raw.push(en.raw);
            clamped.push(en.clamped);
        }
        columns.push((raw, clamped));
    }

    let mut out = String::from("t_s");
    for (_, tag) in KAPPAS_HZ {
        write!(out, ",EN_raw_{tag},EN_{tag}").unwrap();
    }
    out.push('\n');
    for (i, t) in cfg.output_grid.iter().enumerate() {
        write!(out, "{}", num(*t)).unwrap();
        for (raw, clamped) in &columns {
            write!(out, ",{},{}", num(raw[i]), num(clamped[i])).unwrap();
        }
        out.push('\n');
    }
    ctx.write("fig3.csv", &out)?;
    ctx.manifest()
        .with("integrator", integrator_echo(&cfg))
        .with("kappa_over_2pi_Hz", serde_json::json!([1e8, 1e7, 1e6]))
        .write(&ctx.out, "fig3", &["fig3.csv"])?;
    println!("fig3: {} rows -> {}", cfg.output_grid.len(), ctx.out.join("fig3.csv").display());
    Ok(())
}

/// Purity, squeezing angle and eigenvalue ratio of the common mode, plus
/// the scaled common-minus-differential difference columns (x100 for the
/// purity, x10 for angle and ratio).
pub fn figure_fig4(ctx: &Context) -> anyhow::Result<()> {
    let d = ctx.derived()?;
    let mut cfg = IntegratorConfig::with_t_end(2000.0);
    cfg.output_grid = IntegratorConfig::log_grid(1e-2, 2000.0, 400);
    let traj = evolve_pair(&d, &cfg)?;
    let mut out = String::from(
        "t_s,purity_plus,purity_diff_x100,squeeze_angle_plus,squeeze_angle_diff_x10,\
         eig_ratio_plus,eig_ratio_diff_x10\n",
    );
    for i in 0..traj.len() {
        let (p, m) = (traj.plus[i], traj.minus[i]);
        let (pu_p, pu_m) = (purity(&p)?, purity(&m)?);
        let (sq_p, sq_m) = (squeezing_diagnostics(&p), squeezing_diagnostics(&m));
        let cells = [
            traj.times[i],
            pu_p,
            (pu_p - pu_m) * 1e2,
            sq_p.angle,
            (sq_p.angle - sq_m.angle) * 10.0,
            sq_p.eig_ratio,
            (sq_p.eig_ratio - sq_m.eig_ratio) * 10.0,
        ];
        writeln!(out, "{}", cells.map(num).join(",")).unwrap();
    }
    ctx.write("fig4.csv", &out)?;
    ctx.manifest()
        .with("integrator", integrator_echo(&cfg))
        .write(&ctx.out, "fig4", &["fig4.csv"])?;
    println!("fig4: {} rows -> {}", traj.len(), ctx.out.join("fig4.csv").display());
    Ok(())
}

/// Sweep over a JSON spec file: CSV rows plus a JSON summary embedding
/// the spec for provenance.
pub fn sweep(ctx: &Context, spec_path: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading sweep spec {}", spec_path.display()))?;
    let file = SweepSpecFile::from_json(&text)?;
    let mut spec = file.resolve()?;
    spec.moments = ctx.moments;
    let result = run_sweep(&spec)?;

    ctx.write("sweep.csv", &result.to_csv())?;
    let summary = serde_json::json!({
        "spec": serde_json::from_str::<serde_json::Value>(&text)?,
        "axis_keys": result.axis_keys,
        "rows": result.rows,
    });
    ctx.write("sweep_summary.json", &serde_json::to_string_pretty(&summary)?)?;
    ctx.manifest()
        .with("sweep_spec", serde_json::from_str(&text)?)
        .write(&ctx.out, "sweep", &["sweep.csv", "sweep_summary.json"])?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep: {} points ({failed} failed) -> {}",
        result.rows.len(),
        ctx.out.join("sweep.csv").display()
    );
    Ok(())
}

/// Measurement budget for a target S/N, printed as a table and written
/// as JSON. Refuses (exit 3) when the steady state is separable.
pub fn budget(ctx: &Context, target_snr: f64) -> anyhow::Result<()> {
    let d = ctx.derived()?;
    let en = steady_negativity(&d)?;
    let criterion = entanglement_criterion(&d);
    if en.raw <= 0.0 {
        eprintln!(
            "steady state is separable: EN_raw = {:.3e}, criterion margin = {:.4}",
            en.raw, criterion.margin
        );
        return Err(gie_core::Error::NotEntangled { en: en.raw }.into());
    }
    let vp = steady_covariance(&d, Mode::Plus)?;
    let vm = steady_covariance(&d, Mode::Minus)?;
    let grad = negativity_gradient(&vp, &vm, d.epsilon)?;
    let var = variance_en(&grad, &vp, &vm, ctx.moments)?;
    let b = snr_budget(&d, en.raw, var, target_snr, ctx.budget.t_meas_factor)?;

    println!("quantity              value");
    println!("EN_steady_raw         {:.6e}", b.en);
    println!("var_EN                {:.6e}", b.var_en);
    println!("criterion_margin      {:.4}", criterion.margin);
    println!("target_snr            {target_snr}");
    println!("n_meas                {}", b.n_meas);
    println!("t_meas_s              {:.4e}", b.t_meas);
    println!("tau_s                 {:.4e}  (~{:.1} days)", b.tau, b.tau / 86_400.0);

    let doc = serde_json::json!({
        "EN_steady_raw": b.en,
        "var_EN": b.var_en,
        "criterion_margin": criterion.margin,
        "target_snr": target_snr,
        "n_meas": b.n_meas,
        "t_meas_s": b.t_meas,
        "tau_s": b.tau,
        "moment_convention": if ctx.strict_paper_moments { "pp_linear" } else { "symmetric" },
    });
    ctx.write("budget.json", &serde_json::to_string_pretty(&doc)?)?;
    ctx.manifest()
        .with("target_snr", serde_json::json!(target_snr))
        .write(&ctx.out, "budget", &["budget.json"])?;
    Ok(())
}
