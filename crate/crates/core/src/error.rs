use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation axis has zero length")]
    InvalidAxis,

    #[error("unknown control channel {channel} (model has {available})")]
    UnknownChannel { channel: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("samples are not uniformly spaced (index {index})")]
    NonUniformSampling { index: usize },

    #[error("no rotation detected: peak {peak:.3e} below noise floor {floor:.3e}")]
    NoRotationDetected { peak: f64, floor: f64 },

    #[error("peak sharpness undefined: {0}")]
    UndefinedSharpness(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("equator unreachable from the pole about the reference axis (theta_r = {theta:.4} < pi/4); choose a control setting as reference with [reference] channel/f")]
    EquatorUnreachable { theta: f64 },

    #[error("no zero crossing found after the initial departure")]
    NoCrossing,

    #[error("extrema labeling inconsistent: z_max {z_max:.4} < z_min {z_min:.4}")]
    Labeling { z_max: f64, z_min: f64 },

    #[error("axis is at a pole (sin theta ~ 0); azimuth undefined")]
    PoleDegenerate,

    #[error("azimuth unidentifiable: residual landscape is flat")]
    Unidentifiable,

    #[error("linear fit is rank deficient (all control amplitudes identical)")]
    RankDeficient,

    #[error("channel count mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors raised while reading or validating user input, as opposed to
    /// failures of the estimation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::UnknownChannel { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
