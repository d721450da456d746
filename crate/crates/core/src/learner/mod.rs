//! The uniform learner lifecycle, training statistics and a name-based registry.

pub mod conformance;
mod hyperparams;
mod registry;
mod stats;

pub use hyperparams::{HyperparamReader, Hyperparams};
pub use registry::{LearnerFactory, Registry};
pub use stats::{stats_validate, Metric, TrainStats};

use std::path::{Path, PathBuf};

use crate::datasets::{DatasetError, DatasetIterator};
use crate::engine::{Action, Data, EngineError, Target};
use crate::package::{package_fetch, ModelPackage, PackageError};

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("NotTrained: {0} must be fitted or loaded first")]
    NotTrained(String),
    #[error("BadHyperparam: {0}")]
    BadHyperparam(String),
    #[error("UnknownLearner: {0}")]
    UnknownLearner(String),
    #[error("DuplicateName: {0}")]
    DuplicateName(String),
    #[error("InvalidName: learner names must be nonempty")]
    InvalidName,
    #[error("EmptyStats: training statistics contain no metrics")]
    EmptyStats,
    #[error("NonFiniteMetric: {0}")]
    NonFiniteMetric(String),
    #[error("EmptySeries: {0}")]
    EmptySeries(String),
    #[error("EmptyDataset: {0}")]
    EmptyDataset(String),
    #[error("MissingClass: class {0} has no samples")]
    MissingClass(u32),
    #[error("DimensionMismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("FormatMismatch: {0}")]
    FormatMismatch(String),
    #[error("CorruptPayload: {0}")]
    CorruptPayload(String),
    #[error("UnsupportedInput: {0}")]
    UnsupportedInput(String),
    #[error("BadAnnotation: {0}")]
    BadAnnotation(String),
    #[error("Unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T, E = LearnerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerState {
    Untrained,
    Trained,
    Optimized,
}

impl LearnerState {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerState::Untrained => "untrained",
            LearnerState::Trained => "trained",
            LearnerState::Optimized => "optimized",
        }
    }
}

/// The lifecycle every learner implements.
///
/// Learners are single-owner mutable objects: they may move between threads
/// but are never shared concurrently.
pub trait Learner: Send {
    /// Registry name of the learner kind.
    fn name(&self) -> &str;

    fn state(&self) -> LearnerState;

    fn fit(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats>;

    fn eval(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats>;

    fn infer(&mut self, data: &Data) -> Result<Vec<Target>>;

    /// Writes a model package to `dest`, which must be absent or empty.
    fn save(&self, dest: &Path) -> Result<ModelPackage>;

    fn load(&mut self, path: &Path) -> Result<()>;

    /// Idempotent; calling it on an optimized learner changes nothing.
    fn optimize(&mut self) -> Result<()>;

    /// Clears streaming state. Stateless learners treat this as a no-op.
    fn reset(&mut self);

    /// Largest relative change `optimize` may introduce in any numeric output.
    fn optimize_tolerance(&self) -> f64 {
        0.0
    }

    /// Fetches a package (`file://` or `http(s)://`) into `cache_dir` and
    /// returns its local root, ready for [`Learner::load`].
    fn download(&mut self, uri: &str, cache_dir: &Path) -> Result<PathBuf> {
        Ok(package_fetch(uri, cache_dir, None)?)
    }

    /// The active-perception view of this learner, if it has one.
    fn as_active(&mut self) -> Option<&mut dyn LearnerActive> {
        None
    }
}

/// A learner whose inference also suggests the next sensing action.
pub trait LearnerActive: Learner {
    /// The returned target carries `suggested_action` equal to the action.
    fn infer_active(&mut self, data: &Data) -> Result<(Target, Action)>;
}

pub(crate) fn require_trained(name: &str, state: LearnerState) -> Result<()> {
    if state == LearnerState::Untrained {
        Err(LearnerError::NotTrained(name.to_string()))
    } else {
        Ok(())
    }
}
