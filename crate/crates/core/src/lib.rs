//! Random function descent: covariance models, step sizes, BLUE estimators,
//! Gaussian random function simulation and optimizers.

pub mod blue;
pub mod covariance;
pub mod error;
pub mod grf;
pub mod matern;
pub mod optimizers;
pub mod scalar_min;
pub mod step_size;

pub use covariance::{IsotropicModel, ModelKind};
pub use error::{Error, Result};
pub use grf::GrfSampler;
pub use step_size::NoiseSpec;
