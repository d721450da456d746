use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::env::{angular_distance, direction, Observation, SphereBearingEnv};
use super::{ActiveError, Environment};
use crate::engine::{Action, Target};
use crate::learner::LearnerActive;

/// One observation and the learner's response to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Number of actions executed before this observation.
    pub step: usize,
    pub theta: f64,
    pub phi: f64,
    /// Suggested action in response to this observation.
    pub a1: f64,
    pub a2: f64,
    pub intensity: f64,
    /// Angle between the current pointing direction and the source.
    pub angular_error: f64,
    /// Angle between the learner's predicted direction and the source.
    pub best_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    /// Prediction error after the last observation.
    pub fn final_angular_error(&self) -> Option<f64> {
        self.steps.last().map(|s| s.best_error)
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

fn respond(
    learner: &mut dyn LearnerActive,
    obs: &Observation,
    step: usize,
    hidden: [f64; 3],
) -> Result<(TraceStep, Action), ActiveError> {
    let (target, action) = learner.infer_active(&obs.to_data())?;
    let estimate = match &target {
        Target::Vector(v) if v.values.len() == 3 => [v.values[0], v.values[1], v.values[2]],
        other => {
            return Err(ActiveError::BadObservation(format!(
                "learner predicted {} instead of a 3-vector",
                other.type_tag()
            )))
        }
    };
    let axes = action.axes();
    let entry = TraceStep {
        step,
        theta: obs.theta,
        phi: obs.phi,
        a1: axes.first().copied().unwrap_or(0.0),
        a2: axes.get(1).copied().unwrap_or(0.0),
        intensity: obs.intensity,
        angular_error: angular_distance(direction(obs.theta, obs.phi), hidden),
        best_error: angular_distance(estimate, hidden),
    };
    Ok((entry, action))
}

/// Runs one episode: reset both sides, then observe, infer and step until the
/// environment reports done or `max_steps` actions have been taken.
///
/// The trace holds one entry per observation, including the initial one and
/// the one after the last action.
pub fn run_episode(
    env: &mut SphereBearingEnv,
    learner: &mut dyn LearnerActive,
    seed: u64,
    max_steps: usize,
) -> Result<EpisodeTrace, ActiveError> {
    learner.reset();
    let mut obs = env.reset(seed);
    let hidden = env.hidden_dir().expect("episode started");
    let mut trace = EpisodeTrace::default();
    let mut done = false;
    for step in 0.. {
        let (entry, action) = respond(learner, &obs, step, hidden)?;
        trace.steps.push(entry);
        if done || step >= max_steps {
            break;
        }
        (obs, _, done) = env.step(&action)?;
    }
    Ok(trace)
}
