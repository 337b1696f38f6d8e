use thiserror::Error;

/// Errors raised by constructors, codecs and pipeline stages.
///
/// The `Display` strings are stable identifiers; callers and the CLI match on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid-dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension-mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite-value")]
    NonFinite,
    #[error("out-of-range: {0}")]
    OutOfRange(String),
    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed-pfm-header: {0}")]
    MalformedPfmHeader(String),
    #[error("unsupported-pfm-kind")]
    UnsupportedPfmKind,
    #[error("dimension-overflow")]
    DimensionOverflow,
    #[error("truncated-payload")]
    TruncatedPayload,
    #[error("trailing-bytes")]
    TrailingBytes,
    #[error("bad-flo-magic")]
    BadFloMagic,

    #[error("png-decode: {0}")]
    PngDecode(String),
    #[error("png-encode: {0}")]
    PngEncode(String),
    #[error("unsupported-png-format: {0}")]
    UnsupportedPng(String),
    #[error("non-binary-mask")]
    NonBinaryMask,

    #[error("bad-tensor-header")]
    BadTensorHeader,

    #[error("frame-too-small")]
    FrameTooSmall,
    #[error("behind-camera")]
    BehindCamera,
    #[error("empty-input: {0}")]
    Empty(String),
    #[error("frame {index}: {source}")]
    AtFrame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_frame(index: usize, err: Error) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(err),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
