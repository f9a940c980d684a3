use thiserror::Error;

use crate::evolve::EvolveError;
use crate::experiments::ExperimentError;
use crate::observables::ObservableError;
use crate::operator::ForgeError;
use crate::scaling::ScalingError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that chain several modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
