use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    DecompositionFailure { rows: usize, cols: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("class layout error: {columns} columns cannot be split into {classes} classes")]
    Layout { columns: usize, classes: usize },

    #[error("between-class scatter is degenerate (trace {0:e}); all class means coincide")]
    DegenerateBetweenClass(f64),

    #[error("class {class} has a zero feature mean (norm {norm:e})")]
    ZeroMean { class: usize, norm: f64 },

    #[error("numerical rank is undefined for the zero matrix")]
    UndefinedRank,

    #[error("operation `{0}` is only defined for linear networks")]
    Unsupported(&'static str),

    #[error("training diverged at step {step} (loss {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error("assumption audits need d > 2K (d = {d}, K = {k})")]
    AuditUnsupported { d: usize, k: usize },

    #[error("X^T X is singular or ill-conditioned")]
    IllConditionedData,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown config key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
