//! Search spaces, samplers and the tuning study loop.

mod space;
mod store;
mod study;
mod tpe;

use thiserror::Error;

pub use space::{sample_uniform, ParameterDecl, ParameterSet, Scale, SearchSpace, ValueKind};
pub use store::{load_study, parse_study, save_study, LoadedStudy, StudyWriter};
pub use study::{
    best, continue_study, run_study, trial_seed, Evaluation, Evaluator, Sampler, Study, StudyHeader,
    Trial,
};
pub use tpe::{suggest_tpe, TpeConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutotuneError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("parameter `{0}` is missing")]
    MissingParameter(String),
    #[error("parameter `{0}` is not declared in the search space")]
    UnknownParameter(String),
    #[error("parameter `{name}` = {value} outside [{lower}, {upper}] or not integral")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("study is empty")]
    EmptyStudy,
    #[error("a study needs at least one trial")]
    NoTrials,
    #[error("corrupt study: {0}")]
    CorruptStudy(String),
    #[error("study file line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("evaluation setup failed: {0}")]
    Setup(String),
}
