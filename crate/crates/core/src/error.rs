use thiserror::Error;

pub type Result<T, E = SpoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpoError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle returned a non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("the complementary operator needs nonnegative variables; split the problem first")]
    RequiresNonneg,

    #[error("SPOlin residual requested but the point carries no sigma multipliers")]
    MissingSigma,

    #[error("bi-active set is nonempty at indices {0:?}")]
    BiActive(Vec<usize>),

    #[error("presolve: {0}")]
    Presolve(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SpoError {
    pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(SpoError::DimensionMismatch {
                what,
                expected,
                got,
            })
        }
    }
}
