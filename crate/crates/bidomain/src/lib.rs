//! Anisotropic bidomain FitzHugh-Nagumo medium with a localized
//! perturbation of the recovery variable, plus spiral tip tracking and
//! classification of the tip motion.

pub mod epicycle;
pub mod error;
pub mod grid;
pub mod init;
pub mod io;
pub mod params;
pub mod run;
pub mod sim;
pub mod tip;

pub use epicycle::{detect_epicycle, EpicycleReport, EpicycleThresholds, MotionVerdict, TipPath};
pub use error::{Result, SimError};
pub use init::{initiate_spiral, CrossField};
pub use params::{BidomainParams, Coefficients};
pub use run::{run, RunSpec, RunSummary};
pub use sim::{BidomainState, Simulator, TipSample};
