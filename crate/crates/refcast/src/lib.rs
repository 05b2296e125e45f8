//! Reference-class forecasting engine and risk toolkit for large-infrastructure
//! cost and schedule estimation.
//!
//! The library turns a reference class of completed projects into empirical
//! overrun distributions, risk-calibrated budget/schedule uplifts, and
//! multilevel-regression predictions:
//!
//! - [`refdata`] — ingestion, validation, and normalization of project records
//!   and country macro series; overrun observations.
//! - [`stats`] — statistics kernel: quantiles, summaries, rank tests,
//!   ANOVA/OLS, kernel density traces, and the transformation registry.
//! - [`rcf`] — reference-class forecasting proper: uplift curves, de-biased
//!   budgets and schedules, viability and debt stress arithmetic,
//!   cross-asset-class comparison.
//! - [`lmm`] — linear mixed-effects engine (single random intercept per
//!   country): design construction, profiled ML/REML fitting, BLUPs,
//!   backward stepwise selection, prediction.
//! - [`papermodels`] — the four published regression models as frozen
//!   coefficient sets plus the two-pronged forecast workflow.
//! - [`synth`] — deterministic seeded synthetic-data generator used as the
//!   simulation oracle for the fitter and for fat-tailed reference classes.
//! - [`fixtures`] — bundled data fixtures (summary distributions, asset-class
//!   benchmarks, published models, example descriptor).

pub mod error;
pub mod fixtures;
pub mod lmm;
pub mod papermodels;
pub mod rcf;
pub mod refdata;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
