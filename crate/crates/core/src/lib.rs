//! Learning a Kalman filter for an unknown autonomous linear system from a
//! single output trajectory.
//!
//! The pipeline has four stages:
//!
//! 1. [`lti`]: innovations-form models, trajectory simulation, and the
//!    spectral utilities (Lyapunov solves, decay constants, H2 and Hinf
//!    norms) everything else is built on.
//! 2. [`sysid`]: stochastic subspace identification of `(A, C, K, R)` from
//!    one output record, via a Hankel regression, an SVD realization step,
//!    and basis alignment against a reference realization.
//! 3. [`synthesis`]: certainty-equivalent gain synthesis through the Riccati
//!    equation, and robust FIR filter synthesis through a constrained
//!    least-squares program over closed-loop responses.
//! 4. [`filtering`] and [`bounds`]: running filters, measuring their
//!    steady-state prediction error both empirically and analytically, and
//!    computing the finite-sample error bounds.
//!
//! [`experiment`] wires the stages into seeded Monte Carlo studies and
//! [`io`] provides the plain-text file formats used by the command line
//! front end.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod filtering;
pub mod io;
pub mod lti;
pub mod synthesis;
pub mod sysid;

pub use error::{Error, Result};
pub use lti::{simulate, Model, Trajectory};
pub use synthesis::{ce_synthesize, sls_synthesize};
pub use sysid::{identify, HankelConfig, Weighting};
