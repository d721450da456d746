use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::env::{direction, wrap_angle, Observation};
use crate::datasets::DatasetIterator;
use crate::engine::{Action, Data, Target, VectorTarget};
use crate::learner::{
    HyperparamReader, Hyperparams, Learner, LearnerActive, LearnerError, LearnerState, Result,
    TrainStats,
};
use crate::package::{package_write, Manifest, ModelFormat, ModelPackage};
use crate::Scalar;

pub const ACTIVE_PAYLOAD: &str = "active_bearing.json";

/// Climb-length factors applied when an axis slope flips / keeps its sign.
const SHRINK: f64 = 0.5;
const GROW: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivePayload {
    probe_step: f64,
}

/// Position in the five-step probe/climb cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Phase {
    #[default]
    Anchor,
    ThetaPlus,
    ThetaBack,
    PhiPlus,
    PhiBack,
}

#[derive(Debug, Clone, Default)]
struct Episode {
    phase: Phase,
    /// Observations of the current cycle, in order.
    cycle: Vec<Observation>,
    /// Per-axis climb length in action units.
    scale: [f64; 2],
    /// Sign of the previous nonzero slope per axis.
    last_sign: [f64; 2],
    best: Option<Observation>,
}

/// Gradient-climbing bearing estimator for [`super::SphereBearingEnv`].
///
/// Each cycle takes an anchor reading, probes `+theta`, back, `+phi`, back
/// (probe actions of magnitude `probe_step`), estimates the intensity slope
/// along each axis by finite differences over the recorded poses, and then
/// emits a climb action. Each climb component is the sign of its slope times
/// a per-axis length that starts at a full unit action, halves when the
/// slope changes sign and grows by a fifth (up to a full action) while it
/// keeps its sign. A zero slope leaves that axis still. At a pole, where the
/// azimuth has no effect, the learner turns the azimuth until moving back
/// down helps.
///
/// The prediction is the pointing direction of the brightest reading so far.
#[derive(Debug, Clone)]
pub struct ActiveBearingLearner {
    probe_step: f64,
    state: LearnerState,
    episode: Episode,
}

impl ActiveBearingLearner {
    pub fn new(hp: &Hyperparams) -> Result<Self> {
        let r = HyperparamReader::new("active_bearing", hp, &["probe_step"])?;
        let probe_step = r.positive_f64_or("probe_step", 0.2)?;
        if probe_step > 1.0 {
            return Err(LearnerError::BadHyperparam(format!(
                "active_bearing: 'probe_step' must be in (0, 1], got {probe_step}"
            )));
        }
        Ok(Self {
            probe_step,
            state: LearnerState::Trained,
            episode: Self::fresh_episode(),
        })
    }

    pub fn probe_step(&self) -> f64 {
        self.probe_step
    }

    fn fresh_episode() -> Episode {
        Episode {
            scale: [1.0; 2],
            ..Default::default()
        }
    }

    /// Direction of the brightest observation so far.
    pub fn estimate(&self) -> Option<[f64; 3]> {
        self.episode.best.map(|o| direction(o.theta, o.phi))
    }

    /// One-sided slope between two readings along an axis, or `None` when
    /// the pose did not move along it (for example at the elevation limit).
    fn slope(a: &Observation, b: &Observation, along_theta: bool) -> Option<f64> {
        let delta = if along_theta {
            wrap_angle(b.theta - a.theta)
        } else {
            b.phi - a.phi
        };
        (delta.abs() > 1e-12).then(|| (b.intensity - a.intensity) / delta)
    }

    fn climb(&mut self) -> Action {
        let ep = &mut self.episode;
        let [a, b, c, d, e] = ep.cycle[..] else {
            unreachable!("a full cycle holds five readings")
        };
        let g_theta = Self::slope(&a, &b, true)
            .or_else(|| Self::slope(&b, &c, true))
            .unwrap_or(0.0);
        let g_phi = Self::slope(&c, &d, false)
            .or_else(|| Self::slope(&d, &e, false))
            .unwrap_or(0.0);
        let mut axes = [0.0; 2];
        for (i, g) in [g_theta, g_phi].into_iter().enumerate() {
            let s = g.signum() * ep.last_sign[i];
            if s > 0.0 {
                ep.scale[i] = (ep.scale[i] * GROW).min(1.0);
            } else if s < 0.0 {
                ep.scale[i] *= SHRINK;
            }
            if g != 0.0 {
                ep.last_sign[i] = g.signum();
                axes[i] = g.signum() * ep.scale[i];
            }
        }
        // At a pole the azimuth probes see no change and elevation cannot go
        // further out; turning the azimuth is free there and eventually
        // brings a meridian leading toward the source under the sensor.
        let at_limit = a.phi.abs() >= FRAC_PI_2 - 1e-9;
        let outward = g_phi != 0.0 && g_phi.signum() == a.phi.signum();
        if at_limit && outward && g_theta == 0.0 {
            let dir = if ep.last_sign[0] == 0.0 { 1.0 } else { ep.last_sign[0] };
            axes = [dir, 0.0];
        }
        Action::new(&axes).expect("components within [-1, 1]")
    }

    fn step(&mut self, obs: Observation) -> Action {
        let ep = &mut self.episode;
        if ep.best.is_none_or(|b| obs.intensity > b.intensity) {
            ep.best = Some(obs);
        }
        if ep.phase == Phase::Anchor {
            ep.cycle.clear();
        }
        ep.cycle.push(obs);
        let p = self.probe_step;
        let (next, axes) = match ep.phase {
            Phase::Anchor => (Phase::ThetaPlus, vec![p, 0.0]),
            Phase::ThetaPlus => (Phase::ThetaBack, vec![-p, 0.0]),
            Phase::ThetaBack => (Phase::PhiPlus, vec![0.0, p]),
            Phase::PhiPlus => (Phase::PhiBack, vec![0.0, -p]),
            Phase::PhiBack => {
                self.episode.phase = Phase::Anchor;
                return self.climb();
            }
        };
        ep.phase = next;
        Action::new(&axes).expect("probe within [-1, 1]")
    }
}

impl Learner for ActiveBearingLearner {
    fn name(&self) -> &str {
        "active_bearing"
    }

    fn state(&self) -> LearnerState {
        self.state
    }

    fn fit(&mut self, _ds: &dyn DatasetIterator) -> Result<TrainStats> {
        Err(LearnerError::Unsupported(
            "active_bearing has no trainable parameters".into(),
        ))
    }

    fn eval(&mut self, _ds: &dyn DatasetIterator) -> Result<TrainStats> {
        Err(LearnerError::Unsupported(
            "active_bearing is evaluated by running episodes".into(),
        ))
    }

    fn infer(&mut self, data: &Data) -> Result<Vec<Target>> {
        Ok(vec![self.infer_active(data)?.0])
    }

    fn save(&self, dest: &Path) -> Result<ModelPackage> {
        let mut manifest = Manifest::new("active_bearing", ModelFormat::Native, vec![ACTIVE_PAYLOAD.into()]);
        manifest.optimized = self.state == LearnerState::Optimized;
        manifest
            .inference_params
            .insert("probe_step".into(), Scalar::Float(self.probe_step));
        let mut bytes = serde_json::to_vec_pretty(&ActivePayload {
            probe_step: self.probe_step,
        })
        .expect("payload serializes");
        bytes.push(b'\n');
        let payloads = BTreeMap::from([(ACTIVE_PAYLOAD.to_string(), bytes)]);
        Ok(package_write(&manifest, &payloads, dest)?)
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let pkg = ModelPackage::open(path)?;
        let m = pkg.manifest();
        if m.model_format != ModelFormat::Native {
            return Err(LearnerError::FormatMismatch(format!(
                "active_bearing reads native packages, {} is {}",
                path.display(),
                m.model_format.as_str()
            )));
        }
        let p: ActivePayload = serde_json::from_slice(&pkg.read_payload(ACTIVE_PAYLOAD)?)
            .map_err(|e| LearnerError::CorruptPayload(format!("{ACTIVE_PAYLOAD}: {e}")))?;
        let hp = Hyperparams::from([("probe_step".to_string(), Scalar::Float(p.probe_step))]);
        let mut fresh = Self::new(&hp).map_err(|e| LearnerError::CorruptPayload(e.to_string()))?;
        if m.optimized {
            fresh.state = LearnerState::Optimized;
        }
        *self = fresh;
        Ok(())
    }

    /// Nothing to precompute; only marks the learner optimized.
    fn optimize(&mut self) -> Result<()> {
        self.state = LearnerState::Optimized;
        Ok(())
    }

    fn reset(&mut self) {
        self.episode = Self::fresh_episode();
    }

    fn as_active(&mut self) -> Option<&mut dyn LearnerActive> {
        Some(self)
    }
}

impl LearnerActive for ActiveBearingLearner {
    /// Consumes an observation vector `[theta, phi, intensity]`.
    fn infer_active(&mut self, data: &Data) -> Result<(Target, Action)> {
        let obs = Observation::from_data(data).map_err(|e| LearnerError::UnsupportedInput(e.to_string()))?;
        let action = self.step(obs);
        let estimate = self.estimate().expect("an observation was recorded");
        let target = Target::Vector(VectorTarget::new(estimate.to_vec()).with_action(action.clone()));
        Ok((target, action))
    }
}
