use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("payload has no data")]
    EmptyPayload,
    #[error("byte budget must be positive")]
    ZeroBudget,
    #[error("budget of {capacity} B cannot hold a single {instance_bytes} B instance")]
    BudgetTooSmall {
        capacity: usize,
        instance_bytes: usize,
    },
    #[error("instance is {actual} B but the buffer stores {expected} B instances")]
    ByteSizeMismatch { expected: usize, actual: usize },
    #[error("projection to {rows} dims from {cols} dims is not semi-orthogonal (rows must not exceed cols)")]
    ProjectionShape { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("codec {codec} expects an image payload")]
    NotAnImage { codec: String },
    #[error("no external latent for instance id {id}")]
    MissingLatent { id: u64 },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("non-finite loss {loss}")]
    NonFiniteLoss { loss: f64 },
    #[error("training diverged at epoch {epoch}, step {step} (lr {lr}, loss {loss})")]
    Diverged {
        epoch: usize,
        step: usize,
        lr: f64,
        loss: f64,
    },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("payloads are not homogeneous: {0}")]
    Heterogeneous(String),
    #[error("invalid training config: {0}")]
    TrainConfig(String),
    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },
    #[error("{path}: truncated IDX file, need {expected} bytes but found {actual}")]
    IdxTruncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("need {needed} classes but the dataset has {available}")]
    InsufficientClasses { needed: usize, available: usize },
    #[error("cannot aggregate runs with different configurations: {0}")]
    MixedConfigs(String),
    #[error("malformed budget {0:?}, expected <number><B|KiB|MiB|GiB>")]
    ParseBudget(String),
    #[error(
        "malformed codec {0:?}, expected identity | resize:<h>x<w> | rp:<m> | external:<path>"
    )]
    ParseCodec(String),
    #[error("config: {0}")]
    Config(String),
    #[error("task {index}: {source}")]
    Task {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_task(self, index: usize) -> Self {
        Error::Task {
            index,
            source: Box::new(self),
        }
    }
}
