//! Vector autoregression with a neural trend.
//!
//! The model is `y_t − μ_t = Σ_i A_i (y_{t−i} − μ_{t−i}) + ε_t`, where the trend
//! `μ_t` is produced by a single-layer LSTM over deterministic time regressors
//! and the VAR block is kept causal by a partial-autocorrelation
//! reparameterization. Parameters are fitted by exact Gaussian maximum
//! likelihood with AdaGrad, and the fitted model yields multi-step forecasts
//! with Gaussian prediction intervals.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the fitting code is tuned for.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod frame;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod numerics;
pub mod scalar;
pub mod simulation;
pub mod trainer;
pub mod trend_net;
pub mod var_stability;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic model types.
pub type Matrix = numerics::Matrix<f64>;
pub type TimeSeriesFrame = frame::TimeSeriesFrame<f64>;
pub type RawVarParams = var_stability::RawVarParams<f64>;
pub type CausalVarParams = var_stability::CausalVarParams<f64>;
pub type TrendNetParams = trend_net::TrendNetParams<f64>;
pub type FittedModel = trainer::FittedModel<f64>;
pub type ForecastResult = forecaster::ForecastResult<f64>;
pub type ModelArchive = io::ModelArchive<f64>;
pub type SimSpec = simulation::SimSpec<f64>;
