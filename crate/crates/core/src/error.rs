use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Where inside a tensor-like value an invariant was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Feature { channel: usize, row: usize, col: usize },
    Cell { row: usize, col: usize },
    Weight { row: usize, col: usize },
    Bias { index: usize },
    Fixation { index: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Feature { channel, row, col } => {
                write!(f, "channel {channel}, row {row}, col {col}")
            }
            Location::Cell { row, col } => write!(f, "row {row}, col {col}"),
            Location::Weight { row, col } => write!(f, "weight row {row}, col {col}"),
            Location::Bias { index } => write!(f, "bias {index}"),
            Location::Fixation { index } => write!(f, "fixation {index}"),
        }
    }
}

/// First broken invariant found while constructing a domain value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("zero-sized dimension: {0}")]
    EmptyDimension(&'static str),
    #[error("data length {actual} does not match shape product {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite at {0}")]
    NonFinite(Location),
    #[error("negative density at {0}")]
    Negative(Location),
    #[error("density mean {mean} differs from 1")]
    MeanNotOne { mean: f64 },
    #[error("row count mismatch: {labels} labels require {expected} weight rows, found {rows}")]
    RowCountMismatch {
        labels: usize,
        expected: usize,
        rows: usize,
    },
    #[error("bias length {bias} does not match {rows} weight rows")]
    BiasLengthMismatch { rows: usize, bias: usize },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("negative duration at {0}")]
    NegativeDuration(Location),
    #[error("fixations out of onset order at {0}")]
    OutOfOrder(Location),
    #[error("bounding box of image {0:?} is empty or outside the screen")]
    BoxOutOfBounds(String),
    #[error("bounding boxes of images {0:?} and {1:?} overlap")]
    BoxesOverlap(String, String),
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Errors raised by the gaze pooling pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    Invalid(#[from] Violation),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layout/log mismatch: log is for collage {log:?}, layout is {layout:?}")]
    LayoutLogMismatch { log: String, layout: String },
    #[error("fixation at ({u}, {v}) lies outside the {width}x{height} grid")]
    CoordinateOutOfRange {
        u: f64,
        v: f64,
        height: usize,
        width: usize,
    },
    #[error("no fixations on image")]
    NoFixationsOnImage,
    #[error("density map sums to zero before normalization")]
    ZeroDensity,
    #[error("no fixated images")]
    NoFixatedImages,
    #[error("all fixation durations are zero while duration weighting is on")]
    ZeroDurations,
    #[error("unknown class label {0:?}")]
    UnknownClass(String),
    #[error("unknown collage {0:?}")]
    UnknownCollage(String),
    #[error("missing feature map for image {0:?}")]
    MissingFeatureMap(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {kind}", path.display())]
    Format { path: PathBuf, kind: FormatError },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image export to {}: {message}", path.display())]
    Image { path: PathBuf, message: String },
}

/// Diagnostics for malformed files; paired with the offending path in [`Error::Format`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("bad magic at offset 0: expected \"GZPL\", found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {version} at offset 4")]
    UnsupportedVersion { version: u16 },
    #[error("unsupported dtype tag {tag} at offset 6")]
    UnsupportedDtype { tag: u8 },
    #[error("header truncated: need {expected} bytes, found {actual}")]
    TruncatedHeader { expected: usize, actual: usize },
    #[error("payload length mismatch at offset {offset}: expected {expected} bytes, found {actual}")]
    PayloadLengthMismatch {
        offset: usize,
        expected: usize,
        actual: usize,
    },
    #[error("checksum mismatch at offset {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch {
        offset: usize,
        stored: u32,
        computed: u32,
    },
    #[error("tensor shape mismatch: expected {expected}, found {found:?}")]
    TensorShape { expected: String, found: Vec<usize> },
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Manifest(String),
    #[error("missing path {} referenced by {referenced_by}", path.display())]
    MissingPath {
        path: PathBuf,
        referenced_by: String,
    },
    #[error("invalid data: {0}")]
    Invalid(Violation),
}

impl Error {
    /// Stable, machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid-value",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::LayoutLogMismatch { .. } => "layout-log-mismatch",
            Error::CoordinateOutOfRange { .. } => "coordinate-out-of-range",
            Error::NoFixationsOnImage => "no-fixations-on-image",
            Error::ZeroDensity => "zero-density",
            Error::NoFixatedImages => "no-fixated-images",
            Error::ZeroDurations => "zero-durations",
            Error::UnknownClass(_) => "unknown-class",
            Error::UnknownCollage(_) => "unknown-collage",
            Error::MissingFeatureMap(_) => "missing-feature-map",
            Error::Empty(_) => "empty-input",
            Error::Trial { source, .. } => source.code(),
            Error::Format { kind, .. } => match kind {
                FormatError::BadMagic { .. } => "bad-magic",
                FormatError::UnsupportedVersion { .. } => "unsupported-version",
                FormatError::UnsupportedDtype { .. } => "unsupported-dtype",
                FormatError::TruncatedHeader { .. } => "truncated-header",
                FormatError::PayloadLengthMismatch { .. } => "payload-length-mismatch",
                FormatError::ChecksumMismatch { .. } => "checksum-mismatch",
                FormatError::TensorShape { .. } => "tensor-shape",
                FormatError::Line { .. } => "parse-error",
                FormatError::Manifest(_) => "manifest-error",
                FormatError::MissingPath { .. } => "missing-path",
                FormatError::Invalid(_) => "invalid-data",
            },
            Error::Io { .. } => "io-error",
            Error::Image { .. } => "image-error",
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, kind: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            kind,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
