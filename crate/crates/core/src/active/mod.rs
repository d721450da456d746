//! Active perception: a gym-style environment contract, a sphere-bearing
//! environment, and an agent that suggests where to look next.

mod agent;
mod env;
mod episode;

pub use agent::{ActiveBearingLearner, ACTIVE_PAYLOAD};
pub use env::{
    angular_distance, direction, wrap_angle, Environment, Observation, SphereBearingEnv,
    SphereEnvConfig,
};
pub use episode::{run_episode, EpisodeTrace, TraceStep};

use crate::engine::EngineError;
use crate::learner::LearnerError;

#[derive(Debug, thiserror::Error)]
pub enum ActiveError {
    #[error("NotReset: call reset before step")]
    NotReset,
    #[error("EpisodeDone: the episode has ended; call reset")]
    EpisodeDone,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("BadObservation: {0}")]
    BadObservation(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Seeds of the fixed noiseless evaluation panel.
pub const PANEL_SEEDS: &[u64] = &[
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20,
];
