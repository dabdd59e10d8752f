//! Dynamic factor models in state-space form.
//!
//! The crate covers the full estimation path: panel handling and
//! standardization ([`timeseries`]), model shape and parameter packing
//! ([`model`]), companion-form state-space construction ([`state_space`]),
//! Kalman filtering and smoothing ([`kalman`]), maximum-likelihood estimation
//! with z-statistics ([`estimation`]), trend/volatility/percentile risk
//! measures ([`risk`]) and forecasting with scenario conditioning
//! ([`forecast`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod forecast;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod risk;
pub mod state_space;
pub mod timeseries;

pub use error::{DfmError, Result};
pub use estimation::{EstimationReport, FitOptions, SignificanceFilter};
pub use forecast::{Forecast, Scenario, ScenarioKind};
pub use model::{DfmSpec, ModelKind, ParamSet, ParamVector};
pub use risk::{RiskSeries, TrendDirection};
pub use state_space::StateSpaceForm;
pub use timeseries::{Frequency, Panel, Period, SeriesStats, TimeIndex};
