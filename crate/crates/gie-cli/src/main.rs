//! `gie` — command-line front end for the conditional-covariance
//! simulator: trajectory runs, steady-state reports, bundled figure-data
//! recipes, parameter sweeps and measurement budgets.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration problem,
//! 3 physics-domain refusal (e.g. not entangled, unstable coupling),
//! 4 numerical failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gie_core::Error;

#[derive(Parser)]
#[command(name = "gie", version, about = "Conditional-state and entanglement budget toolkit for gravitationally coupled mirror pairs")]
struct Cli {
    /// JSON config file; missing keys fall back to the built-in
    /// reference parameter set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for data files and manifests.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed for stochastic tooling; recorded in the manifest. The
    /// shipped pipelines are deterministic and do not consume it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Keep the pp fluctuation moment linear in Vpp instead of the
    /// dimensionally homogeneous quadratic form.
    #[arg(long, global = true)]
    strict_paper_moments: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvolveMode {
    Evolve,
    Steady,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FigureName {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the conditional covariance and write the trajectory CSV
    /// with per-time negativity, purity and squeezing columns.
    Evolve {
        /// Integration horizon in seconds. 0 emits only the initial state.
        #[arg(long, default_value_t = 2000.0)]
        t_end: f64,
        /// Number of log-spaced output samples.
        #[arg(long, default_value_t = 400)]
        grid_points: usize,
        /// `steady` skips the integration and emits the steady report.
        #[arg(long, value_enum, default_value_t = EvolveMode::Evolve)]
        mode: EvolveMode,
    },
    /// Closed-form steady-state report (covariances, rates, criterion,
    /// analytic negativity, timescales).
    Steady,
    /// Bundled figure-data recipes on the reference configuration.
    Figure {
        #[arg(value_enum)]
        name: FigureName,
    },
    /// Run a sweep described by a JSON spec file.
    Sweep { spec: PathBuf },
    /// Repetition-count and total-time budget for a target S/N.
    Budget {
        #[arg(long, default_value_t = 1.0)]
        target_snr: f64,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<Error>() {
        match core {
            Error::InvalidConfig(_)
            | Error::UnknownParameter(_)
            | Error::NonPositiveInput { .. }
            | Error::BareExceedsFeedbackDamping { .. } => 2,
            Error::EpsilonOutOfRange { .. }
            | Error::DegenerateMeasurement
            | Error::LogDomain { .. }
            | Error::NotEntangled { .. } => 3,
            Error::NotPsd { .. }
            | Error::ComplexBranch { .. }
            | Error::SingularCovariance { .. }
            | Error::NonDifferentiable
            | Error::NegativeVariance { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::PositivityLost { .. } => 4,
        }
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match commands::Context::prepare(&cli) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let run = match &cli.command {
        Command::Evolve { t_end, grid_points, mode } => match mode {
            EvolveMode::Evolve => commands::evolve(&ctx, *t_end, *grid_points),
            EvolveMode::Steady => commands::steady(&ctx),
        },
        Command::Steady => commands::steady(&ctx),
        Command::Figure { name } => match name {
            FigureName::Fig2 => commands::figure_fig2(&ctx),
            FigureName::Fig3 => commands::figure_fig3(&ctx),
            FigureName::Fig4 => commands::figure_fig4(&ctx),
        },
        Command::Sweep { spec } => commands::sweep(&ctx, spec),
        Command::Budget { target_snr } => commands::budget(&ctx, *target_snr),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
