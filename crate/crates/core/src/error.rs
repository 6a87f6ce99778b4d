use thiserror::Error;

/// Errors raised by the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid filter design: {0}")]
    InvalidFilter(String),

    #[error("controllability matrix of (Lambda, Gamma) is singular")]
    FilterNotControllable,

    #[error("realization residual {residual:.3e} of {equation} exceeds tolerance {tolerance:.3e}")]
    Residual {
        equation: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("non-finite value in simulation at t = {t}")]
    NonFinite { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("excitation matrix Z is numerically singular (lambda_min = {0:.3e})")]
    SingularExcitation(f64),

    #[error("Schur complement S_N is indefinite (lambda_min = {0:.3e})")]
    IndefiniteSchur(f64),

    #[error("transfer function evaluated at a pole of its denominator (s = {re} + {im}i)")]
    Pole { re: f64, im: f64 },

    #[error("denominator has a root with non-negative real part ({0:.3e})")]
    UnstableDenominator(f64),

    #[error(
        "no measurement-noise gain bound for p = {0} > 1 outputs; supply an explicit gain override"
    )]
    MultiOutputMeasurementNoise(usize),

    #[error("solver: {0}")]
    Solver(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed CSV input: {0}")]
    Parse(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
