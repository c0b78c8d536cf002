use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("matrix is singular: {0}; use a larger ridge")]
    Singular(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown {kind} `{id}`")]
    Lookup { kind: &'static str, id: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
    #[error("test records leak into the context bank: {0:?}")]
    Leakage(Vec<String>),
    #[error("records without a label: {0:?}")]
    Unlabeled(Vec<String>),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
