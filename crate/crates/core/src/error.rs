use std::path::PathBuf;

use crate::training::TrainHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid size {0} is odd; an even size is required")]
    OddSize(usize),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("solver blew up at step {step} (max |u| = {max_abs:e}){}", sample_suffix(*sample))]
    BlowUp {
        step: usize,
        max_abs: f64,
        sample: Option<usize>,
    },

    #[error("split {requested} exceeds the {available} available samples")]
    SplitTooLarge { requested: usize, available: usize },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("invalid model configuration: {0}")]
    InvalidModelConfig(String),

    #[error("{modes} Fourier modes exceed the grid limit n/2 = {limit}")]
    ModesExceedGrid { modes: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("target field has zero norm")]
    ZeroTarget,

    #[error("radial spectra use different bin layouts")]
    BinMismatch,

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged {
        epoch: usize,
        history: Box<TrainHistory>,
    },
}

fn sample_suffix(sample: Option<usize>) -> String {
    match sample {
        Some(i) => format!(" while generating sample {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerical explosion rather than bad input or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::TrainingDiverged { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::BadMagic { .. }
                | Error::VersionMismatch { .. }
                | Error::ChecksumMismatch { .. }
                | Error::Malformed(_)
        )
    }
}
