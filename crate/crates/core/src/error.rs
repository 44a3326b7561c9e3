use thiserror::Error;

pub type Result<T> = std::result::Result<T, RcarError>;

#[derive(Debug, Error)]
pub enum RcarError {
    /// Invalid noise specification, run file, or parameter value.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error in {context}: {message}")]
    Numeric {
        context: &'static str,
        message: String,
    },

    /// Argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A spectral-radius condition needed for the requested moments fails.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// Parameters fall in (or numerically next to) the excluded set where
    /// the Yule-Walker correction or the test statistic is undefined.
    #[error("pathological parameters: {0}")]
    Pathological(String),

    /// The series cannot support the requested estimator.
    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "trajectory exploded at t = {step} (|X| > 1e300); the log-moment condition probably fails"
    )]
    Explosion { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RcarError {
    pub(crate) fn numeric(context: &'static str, message: impl Into<String>) -> Self {
        RcarError::Numeric {
            context,
            message: message.into(),
        }
    }
}
