//! Multistep daily electricity-consumption forecasting.
//!
//! The crate covers the full pipeline: loading and validating daily series,
//! calendar feature extraction with cyclical (sin/cos) encoding, correlation
//! analysis to choose encodings, sliding-window dataset construction, two
//! from-scratch neural base forecasters (LSTM and 1-D CNN), a per-day
//! stacked MLP ensemble selected by grid search, and MAE/RMSE evaluation
//! over a 7-day horizon.

pub mod calendar;
pub mod correlation;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod series;
pub mod synth;
pub mod window;

pub use error::{Error, Result};
