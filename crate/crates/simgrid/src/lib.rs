//! Synthetic grid data with known ground truth, and a brute-force dummy
//! regression used as the reference for the absorbed estimator.
//!
//! Two generators share the weather processes in [`weather`]:
//!
//! - [`loglinear`] draws plant outcomes directly from the log-linear panel
//!   model, so every elasticity is known exactly.
//! - [`dispatch`] runs a merit-order dispatch of a thermal fleet with ramp
//!   limits, minimum stable load and part-load intensity penalties, plus a
//!   zero-renewables counterfactual.

pub mod dispatch;
pub mod emit;
pub mod loglinear;
pub mod oracle;
pub mod weather;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    /// Net load could not be met (or absorbed) in the named hour.
    #[error("generation failed at {hour}: {message}")]
    Generation { hour: String, message: String },

    #[error("invalid generator parameters: {0}")]
    Argument(String),

    #[error(transparent)]
    Core(#[from] gridshift_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub use dispatch::{run_dispatch, DispatchKernel, DispatchOutcome, DispatchPlant};
pub use loglinear::{generate_panel, generate_plant_hours, true_elasticities, SyntheticDgp, Truth};
pub use oracle::brute_force_fit;
pub use weather::{generate_weather, HourlyWeather, WeatherParams};
