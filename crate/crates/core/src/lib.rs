//! Building blocks for a modular robotics perception toolkit.
//!
//! - [`engine`]: canonical data, targets and active-perception actions
//! - [`learner`]: the shared learner lifecycle and a name-based registry
//! - [`package`]: checksummed model packages and remote fetching
//! - [`datasets`]: dataset iterators, external formats and splitting
//! - [`learners`]: reference learners exercising the lifecycle
//! - [`active`]: a gym-style environment and an active-perception agent
//! - [`bench`]: latency / throughput / memory measurement against budgets

pub mod active;
pub mod bench;
pub mod datasets;
pub mod engine;
pub mod learner;
pub mod learners;
pub mod package;

mod scalar;

pub use scalar::Scalar;
