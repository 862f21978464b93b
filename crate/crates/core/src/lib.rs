//! Epicyclic drifting of spiral waves in the center bundle picture.
//!
//! The crate is organised bottom-up:
//!
//! * [`cbe`] holds the center bundle equation itself: translational (TSB) and
//!   rotational (RSB) symmetry-breaking terms, the planar Euclidean group action
//!   and the co-rotating frame.
//! * [`averaging`] computes averaged vector fields, epicycle functions and
//!   their hyperbolic roots, and turns them into manifold predictions.
//! * [`rsb`] implements the frame changes that remove the rotational
//!   symmetry-breaking term.
//! * [`ode`] is a Dormand–Prince 5(4) integrator with dense output.
//! * [`verify`] integrates the full system and measures the invariant tori
//!   that the averaging step predicts.

pub mod averaging;
pub mod cbe;
pub mod error;
pub mod ode;
pub mod rsb;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
