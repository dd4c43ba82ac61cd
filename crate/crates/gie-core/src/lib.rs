//! Simulation and analysis toolkit for gravity-induced entanglement (GIE)
//! between two optomechanical mirrors under continuous measurement and
//! Kalman filtering.
//!
//! The toolkit works entirely at the level of Gaussian second moments: the
//! conditional covariance of each mechanical mode obeys a matrix Riccati
//! equation, which we integrate with an adaptive embedded Runge-Kutta
//! scheme and compare against closed-form steady states and attractor
//! approximations. On top of the dynamics sit the entanglement analytics
//! (logarithmic negativity through the mode-mixing map, purity, squeezing
//! diagnostics), the error-propagation machinery for the negativity
//! estimate, and a deterministic sweep engine.
//!
//! Quick tour:
//!
//! ```
//! use gie_core::params::{derive, ExperimentParams, PhysicalConstants};
//! use gie_core::steady::{entanglement_criterion, steady_negativity};
//!
//! let d = derive(&ExperimentParams::reference(), &PhysicalConstants::codata2018()).unwrap();
//! let criterion = entanglement_criterion(&d);
//! assert!(criterion.met);
//! assert!(steady_negativity(&d).unwrap().entangled());
//! ```

// Matrix types from nalgebra appear in the public API (CovMat4 blocks,
// system matrices), so callers get the matching version from here.
pub use nalgebra;

pub mod config;
pub mod error;
pub mod gaussian;
pub mod metrology;
mod ode;
pub mod params;
pub mod riccati;
pub mod steady;
pub mod sweep;

pub use error::{Error, Result};
pub use gaussian::{log_negativity, purity, squeezing_diagnostics, BeamSplitter, CovMat2, CovMat4, LogNegativity};
pub use params::{derive, DerivedParams, ExperimentParams, Mode, PhysicalConstants};
pub use riccati::{build_system, evolve, evolve_pair, initial_covariance, IntegratorConfig, Trajectory};
pub use steady::{analytic_negativity, entanglement_criterion, steady_covariance, SteadyReport};
