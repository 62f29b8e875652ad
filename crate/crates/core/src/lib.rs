//! Simulation, forecasting and estimation of row-stochastic interpersonal
//! influence matrices for small teams.
//!
//! * [`matrix`] holds the validated domain types and the stationary-vector
//!   primitive.
//! * [`dynamics`] implements the D, DR and DRP cognitive models and the
//!   single-/multi-round forecast protocols.
//! * [`baselines`] and [`metrics`] provide comparison predictors and the
//!   MSE/KL metrics plus sociometric quantities.
//! * [`ingest`] parses session logs and builds connectivity networks and
//!   feature bundles; [`estimate`] fits the convex linear and softmax
//!   estimators on them.
//! * [`analytics`] carries the statistics (correlation, OLS, Granger, BH,
//!   bootstrap) and [`evaluation`] the forecasting and hold-out protocols.

pub mod analytics;
pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod evaluation;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod session;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::{ConnectivityNetwork, ExpertiseVector, InfluenceMatrix, SelfWeightVector, SimplexVector};
pub use session::TeamSession;
