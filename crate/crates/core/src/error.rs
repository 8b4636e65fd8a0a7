use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("quotient system requires tau2 = 0, got tau2 = {0}")]
    QuotientInvalid(f64),
    #[error("domain error: {0}")]
    DomainError(String),
}

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}; last good state retained")]
    Stalled { t: f64, state: Vec<f64> },
    #[error("non-finite state encountered at t = {t}")]
    NumericalBlowup { t: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum LyapunovError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("radial exponent {0} is not safely negative; spectrum untrustworthy")]
    RadialAnomaly(f64),
    #[error("spectrum has not converged (tail variation {0}); pass allow_unconverged to classify anyway")]
    Unconverged(f64),
    #[error("invalid spectrum settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("need at least {needed} section hits, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no periodic orbit found within the search time {0}")]
    NoCycleFound(f64),
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
