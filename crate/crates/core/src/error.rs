use thiserror::Error;

/// Errors produced by the divalign library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("checksum mismatch: file declares {declared}, contents hash to {actual}")]
    Checksum { declared: String, actual: String },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("fading functions over different block counts ({0} vs {1})")]
    BlockCountMismatch(u8, u8),

    #[error("column {0} is transmitted but has no block assignment")]
    UnmappedColumn(usize),

    #[error("mapping does not match the rate selection: {0}")]
    MappingShape(String),

    #[error("block count {0} exceeds the supported maximum of {max}", max = crate::dive::MAX_BLOCKS)]
    TooManyBlocks(usize),

    #[error("parity part of the lifted matrix is singular (rank {rank} of {size})")]
    SingularParity { rank: usize, size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("SNR point {snr_db} dB has {errors} block errors; at least {required} are needed")]
    InsufficientErrors {
        snr_db: f64,
        errors: u64,
        required: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
