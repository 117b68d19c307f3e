use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate histogram")]
    DegenerateHistogram,
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated file")]
    TruncatedFile,
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("clap not found")]
    ClapNotFound,
    #[error("payload length mismatch: expected {expected} frames, found {found}")]
    PayloadLengthMismatch { expected: usize, found: usize },

    #[error("degenerate extrinsics: {0}")]
    DegenerateExtrinsics(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("degenerate lights")]
    DegenerateLights,
    #[error("unusable reference: {0}")]
    UnusableReference(String),
    #[error("empty valid region")]
    EmptyRegion,

    #[error("sample excluded: finger count {0} != 4")]
    SampleExcluded(usize),
    #[error("degenerate mask: {0}")]
    DegenerateMask(String),
    #[error("unknown enhancer: {0}")]
    UnknownEnhancer(String),
    #[error("empty mask")]
    EmptyMask,

    #[error("empty impostor set")]
    EmptyImpostorSet,
    #[error("missing class: {0}")]
    MissingClass(&'static str),
    #[error("too few impostor identities: need {needed}, have {available}")]
    TooFewImpostors { needed: usize, available: usize },
    #[error("missing template: {0}")]
    MissingTemplate(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png: {0}")]
    Png(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateHistogram => "degenerate_histogram",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::TruncatedFile => "truncated_file",
            Error::InvalidImage(_) => "invalid_image",
            Error::ClapNotFound => "clap_not_found",
            Error::PayloadLengthMismatch { .. } => "payload_length_mismatch",
            Error::DegenerateExtrinsics(_) => "degenerate_extrinsics",
            Error::InvalidCalibration(_) => "invalid_calibration",
            Error::DegenerateLights => "degenerate_lights",
            Error::UnusableReference(_) => "unusable_reference",
            Error::EmptyRegion => "empty_region",
            Error::SampleExcluded(_) => "sample_excluded",
            Error::DegenerateMask(_) => "degenerate_mask",
            Error::UnknownEnhancer(_) => "unknown_enhancer",
            Error::EmptyMask => "empty_mask",
            Error::EmptyImpostorSet => "empty_impostor_set",
            Error::MissingClass(_) => "missing_class",
            Error::TooFewImpostors { .. } => "too_few_impostors",
            Error::MissingTemplate(_) => "missing_template",
            Error::InvalidParam(_) => "invalid_param",
            Error::Config(_) => "config",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Png(_) => "png",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
