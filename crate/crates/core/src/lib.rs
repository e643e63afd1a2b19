//! Nonparametric tests for covariate effects on the cure probability in
//! mixture cure models, calibrated by a null-mimicking bootstrap.
//!
//! The pipeline: a [`Sample`] is validated and sorted into a [`Design`];
//! [`proxy::eta_from_design`] builds the proxy responses `η̂`;
//! [`stats`] turns them into Cramér–von Mises and Kolmogorov–Smirnov
//! statistics of a marked empirical process; [`bootstrap::run_test`]
//! calibrates them. [`sim`] reproduces the Monte Carlo designs.

pub mod bandwidth;
pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod followup;
pub mod proxy;
pub mod rng;
pub mod sample;
pub mod sim;
pub mod stats;

pub use bootstrap::{run_test, Case, TestConfig, TestResult};
pub use error::{Error, Result};
pub use followup::{maller_zhou, FollowupResult};
pub use sample::{
    validate, CovValue, CovariateEntry, CovariateKind, CovariateSpec, Design, Observation, Role, Sample,
    ValidationReport,
};
