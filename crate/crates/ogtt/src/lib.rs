//! Bayesian analysis of oral glucose tolerance tests (OGTT).
//!
//! A fasting patient drinks a 75 g glucose solution; blood glucose is
//! measured at a handful of times over the next hours. This crate fits a
//! five-state glucose dynamics model to those readings with MCMC and turns
//! the posterior into predictive glucose bands, a 3-hour glucose
//! prediction, and an insulin-sensitivity summary.
//!
//! Four patient-specific quantities are inferred: insulin tissue
//! sensitivity `theta0`, glucagon liver sensitivity `theta1`, the digestive
//! transfer mean life `theta2`, and the initial glucose `g0`. Everything
//! else (clearance mean lives, the drink transfer time, the homeostasis
//! threshold, the noise scale) is fixed per run and configurable.
//!
//! # Quick start
//!
//! ```
//! use ogtt::inference::{ObservationSet, PriorSpec};
//! use ogtt::model::FixedSettings;
//! use ogtt::sampler::{fit, FitSettings};
//!
//! let obs = ObservationSet::new(vec![
//!     (0.0, 92.0),
//!     (0.5, 172.0),
//!     (1.0, 165.0),
//!     (2.0, 131.0),
//! ])?;
//! let fs = FixedSettings::default();
//! let prior = PriorSpec::anchored_to(obs.first_glucose())?;
//! let settings = FitSettings {
//!     n_iterations: 5_000, // demo-sized; default is 200_000
//!     burn_in: 500,
//!     seed: 1,
//! };
//! let sample = fit(&obs, &fs, &prior, &settings)?;
//! assert_eq!(sample.n_kept(), 4_500);
//! # Ok::<(), ogtt::Error>(())
//! ```
//!
//! The `examples/` directory has one runnable example per capability:
//! forward simulation, the raw sampler, a full fit, predictive bands,
//! recovery experiments, and simulation-based calibration. The `ogtt`
//! binary wraps the same pipeline behind `fit`, `simulate`, `sbc` and
//! `recover` subcommands.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
