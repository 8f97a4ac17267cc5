use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown family id `{0}`")]
    UnknownFamily(String),

    #[error("unknown individual id `{0}`")]
    UnknownIndividual(String),

    #[error("invalid family `{id}`: {reason}")]
    InvalidFamily { id: String, reason: String },

    #[error("pedigree error: {0}")]
    Pedigree(String),

    #[error("family `{0}` has no pedigree members")]
    EmptyFamily(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("model spec references unavailable covariate `{0}`")]
    UnavailableCovariate(String),

    #[error("design has no {0} outcomes; logistic fit is undefined")]
    DegenerateOutcome(&'static str),

    #[error("base variance for `{0}` is zero; proportion explained is undefined")]
    ZeroBaseVariance(String),

    #[error("target event count {target} is unattainable; attainable range is [{min}, {max}]")]
    TargetUnattainable { target: f64, min: f64, max: f64 },

    #[error("null model has no calibrated omission probability")]
    Uncalibrated,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
