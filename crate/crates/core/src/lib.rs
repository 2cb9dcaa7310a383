//! Direction-of-arrival sensing with a mechanically rotatable planar array.
//!
//! The crate simulates a single narrowband emitter observed by an `M x N`
//! array of directive elements that can be turned by a two-axis gimbal, and
//! implements four estimators on top of it:
//!
//! * fixed-array Root-MUSIC (`fa`),
//! * recursive-rotation Root-MUSIC (`rr`), which re-points the array at every
//!   new estimate and starts each covariance from scratch,
//! * pre-rotation initialization (`pri`): a coarse received-power scan over a
//!   small grid of orientations followed by one decoupled Root-MUSIC estimate,
//! * `pri-igss`: PRI, a single alignment rotation, then an iterative greedy
//!   spatial-spectrum search over an accumulated covariance with step sizes
//!   tied to the Cramer-Rao bound.
//!
//! [`harness`] runs seeded Monte Carlo sweeps of these estimators and writes
//! the results as CSV.

pub mod channel;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
mod polyroot;
pub mod subspace;

pub use error::{Error, Result};
