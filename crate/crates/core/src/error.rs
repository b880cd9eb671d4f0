use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample rate {given} Hz is below the required minimum of {required} Hz")]
    Undersampled { given: f64, required: f64 },

    #[error("integration failed at t = {time} s: {reason}")]
    IntegrationFailed { time: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("tau {tau} s outside the valid range [{min}, {max}] s")]
    TauOutOfRange { tau: f64, min: f64, max: f64 },

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml encode error: {0}")]
    TomlEncode(#[from] toml::ser::Error),

    #[error("toml decode error: {0}")]
    TomlDecode(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
