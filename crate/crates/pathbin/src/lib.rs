//! Ground-to-air mmWave channel prediction under link blockage.
//!
//! The crate simulates multipath channel data along a UAV trajectory,
//! arranges the multipath components (MPCs) into path bins by minimum
//! normalized Euclidean distance over six channel parameters, forecasts
//! per-bin channel parameters through a blockage window with an
//! autoregressive model, predicts path-bin death by distance to the LOS
//! bin, and evaluates forecast accuracy against an unbinned per-rank AR
//! baseline.
//!
//! Modules mirror the pipeline stages:
//! - [`types`]: MPC vectors, snapshots, trajectories, bins, configuration
//! - [`sim`]: geometric ray generator (LOS, ground reflection, scatterers)
//! - [`binning`]: path-bin arrangement with birth/death/resurrection
//! - [`forecast`]: AR fitting and multi-step forecasting per bin
//! - [`death`]: distance-based death prediction
//! - [`eval`]: blockage experiment, MSE/MAPE metrics, baseline
//! - [`dataset`] / [`pipeline`]: persistence and CLI stage orchestration

pub mod binning;
pub mod dataset;
pub mod death;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod pipeline;
pub mod sim;
pub mod types;

pub use error::Error;
