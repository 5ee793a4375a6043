use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need at least {needed} rows for {features} features, have {have}")]
    TooFewRows {
        needed: usize,
        features: usize,
        have: usize,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("singular least-squares system")]
    Singular,

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("parameters outside the model's feasible set: {0}")]
    Infeasible(String),

    #[error("fit did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("no training observations in bin {0}")]
    EmptyBin(usize),

    #[error("point {0:?} lies outside the partitioned region")]
    OutsidePartition(Vec<f64>),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input or configuration rather than
    /// by the numerics of a fit or region computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::TooFewRows { .. }
                | Error::LengthMismatch(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
