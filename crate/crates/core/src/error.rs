use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class count must be greater than 2, got {0}")]
    InvalidClassCount(usize),

    #[error("invalid bias regime: {0}")]
    InvalidRegime(String),

    #[error("no column coverage after {0} attempts")]
    RetriesExhausted(usize),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("line {line}: expected {expected} fields, found {got}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("anchor set has no instances for class {0}")]
    EmptyAnchorClass(usize),

    #[error("training diverged at epoch {epoch}: non-finite loss or parameters")]
    Divergence {
        epoch: usize,
        report: Box<crate::trainer::TrainReport>,
    },

    #[error("lattice minima disagree in argmax; refine the grid")]
    GridTooCoarse,

    #[error("bad IDX magic in {path}: expected {expected:#010x}, got {got:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        got: u32,
    },

    #[error("truncated IDX file {0}")]
    TruncatedFile(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
