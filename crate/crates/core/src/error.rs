use thiserror::Error;

/// Invalid model or configuration parameters.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid `{field}`: {message}")]
pub struct ModelError {
    pub field: String,
    pub message: String,
}

impl ModelError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }

    /// Prefixes the field path, e.g. `z` becomes `model.z`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = format!("{parent}.{}", self.field);
        self
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A realized energy factor exceeded the thinning bound.
    #[error("rate bound violated: realized energy factor {factor:.6e} exceeds cap {cap:.6e} ({context})")]
    RateCapExceeded { factor: f64, cap: f64, context: &'static str },
    #[error("quadrature unresolved: {0}")]
    Quadrature(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite energy in initial configuration")]
    InfiniteInitialEnergy,
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
