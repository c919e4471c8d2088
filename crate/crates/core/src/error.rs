use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: {detail}")]
    Shape { layer: usize, detail: String },

    #[error("layer {layer} ({kind}): {detail}")]
    Weights {
        layer: usize,
        kind: &'static str,
        detail: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("batch norm at layer {0} is not preceded by a foldable layer")]
    Unfoldable(usize),

    #[error("out-of-order index {index} (previous {previous})")]
    OutOfOrder { index: u64, previous: u64 },

    #[error("unsorted input: {0}")]
    Unsorted(&'static str),

    #[error("tally exhausted: {events} events but only {remaining} tally entries remain")]
    TallyExhausted { events: usize, remaining: usize },

    #[error("non-monotone tally at entry {0}")]
    NonMonotoneTally(usize),

    #[error("start joint {start} outside tally of {len} entries")]
    StartJoint { start: usize, len: usize },

    #[error("non-positive time delta between consecutive events ({0} s)")]
    TimeDelta(f64),

    #[error("empty search space")]
    EmptySearchSpace,

    #[error("synthetic run contains no collars")]
    NoCollars,

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("malformed weight file: {0}")]
    Format(String),
}
