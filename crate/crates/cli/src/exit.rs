use rcar_core::RcarError;

pub const USAGE: u8 = 2;
pub const DEGENERATE: u8 = 3;
pub const HYPOTHESIS: u8 = 4;
pub const PATHOLOGICAL: u8 = 5;
pub const INTERNAL: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: String) -> Self {
        Self {
            code: USAGE,
            message,
        }
    }

    pub fn internal(message: String) -> Self {
        Self {
            code: INTERNAL,
            message,
        }
    }
}

pub fn classify(e: RcarError) -> Failure {
    let code = match &e {
        RcarError::Config(_) | RcarError::Domain(_) | RcarError::Io(_) => USAGE,
        RcarError::Degenerate(_) | RcarError::Parse { .. } => DEGENERATE,
        RcarError::Hypothesis(_) | RcarError::Explosion { .. } => HYPOTHESIS,
        RcarError::Pathological(_) => PATHOLOGICAL,
        RcarError::Numeric { .. } => INTERNAL,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}
