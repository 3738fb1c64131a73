//! Load analytics for a balancing authority.
//!
//! Fits a weather-conditioned counterfactual load model, measures how far
//! actual consumption departs from it, scores day-ahead forecasts and computes
//! NERC CPS1 control performance from minute telemetry.

pub mod control;
pub mod error;
pub mod estimator;
pub mod features;
pub mod metrics;
pub mod synth;
pub mod timeseries;
pub mod weather;

pub mod cli;

pub use error::{Error, Result};
