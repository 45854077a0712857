use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A single record of a line-oriented input could not be parsed.
    #[error("line {line}: {msg}")]
    Record { line: usize, msg: String },

    /// The stream as a whole violates an ordering or continuity rule.
    #[error("stream error at line {line}: {msg}")]
    Stream { line: usize, msg: String },

    #[error("unknown detection label `{0}`")]
    UnknownLabel(String),

    #[error("degenerate bounding box [{x_min}, {y_min}, {x_max}, {y_max}]")]
    DegenerateBox {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
    },

    #[error("annotation: {0}")]
    Annotation(String),

    #[error("invalid participant code `{0}`")]
    ParticipantCode(String),

    #[error("out-of-order input: t={got} ms after t={previous} ms")]
    OutOfOrder { previous: u64, got: u64 },

    #[error("sample spacing gap: expected t={expected} ms, got t={got} ms")]
    SampleGap { expected: u64, got: u64 },

    #[error("invalid window: {0}")]
    Window(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite loss for sequence {index}")]
    NonFiniteLoss { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u8, expected: u8 },

    #[error("event sink failed: {0}")]
    Sink(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
