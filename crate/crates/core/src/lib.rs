//! Simulation and inference for an SIR epidemic with under-reporting and
//! prior immunity.
//!
//! Only a fraction `p` of infections is reported and a fraction `pi` of the
//! population is immune at time zero. From reported incidence alone the
//! triple `(beta*, p, pi)` is not identifiable: every parameter set sharing
//! `beta*/p` and `beta*(1 - pi)` produces the same reported trajectory. The
//! crate provides
//!
//! - [`model`]: parameters, derived rates and initial compartments,
//! - [`stochastic`]: exact event-driven simulation and event-log I/O,
//! - [`ode`]: RK4 integration of the full and reduced deterministic systems,
//! - [`identifiability`]: equivalence classes of parameters and their numerical
//!   certification,
//! - [`estimation`]: growth-rate fitting, final-size solvers, survey samplers
//!   and the two-equation inversion,
//! - [`likelihood`]: the approximate observed-data log-likelihood with its
//!   derivatives,
//! - [`harness`]: the seeded Monte Carlo experiment and its reports.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod harness;
pub mod identifiability;
pub mod likelihood;
pub mod model;
pub mod ode;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{CountState, DerivedRates, InitialConditions, ModelParams, RealState, Scenario};
pub use rng::SeededRng;
