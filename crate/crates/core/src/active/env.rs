use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ActiveError;
use crate::engine::{Action, Data, EngineError, Vector};

/// Unit vector for azimuth `theta` and elevation `phi`.
pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()]
}

/// Great-circle angle between two unit vectors, accurate near 0 and near pi.
pub fn angular_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}

/// Wraps an angle into `[-pi, pi)`, leaving in-range values untouched.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        theta
    } else {
        let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
        if w >= PI {
            w - 2.0 * PI
        } else {
            w
        }
    }
}

/// What the sensor reports after each reset or step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub intensity: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Observation {
    /// Encodes as the vector `[theta, phi, intensity]` accepted by learners.
    pub fn to_data(&self) -> Data {
        Data::Vector(Vector::new(vec![self.theta, self.phi, self.intensity]).expect("finite observation"))
    }

    pub fn from_data(data: &Data) -> Result<Self, ActiveError> {
        match data {
            Data::Vector(v) if v.len() == 3 => {
                let x = v.values();
                Ok(Self {
                    theta: x[0],
                    phi: x[1],
                    intensity: x[2],
                })
            }
            other => Err(ActiveError::BadObservation(format!(
                "expected vector [theta, phi, intensity], got {} of length {}",
                other.kind(),
                match other {
                    Data::Vector(v) => v.len(),
                    _ => 0,
                }
            ))),
        }
    }
}

/// The gym-style contract: `reset` starts an episode, `step` advances it.
pub trait Environment {
    /// Number of action axes the environment consumes.
    fn num_axes(&self) -> usize;

    fn reset(&mut self, seed: u64) -> Observation;

    /// Returns the new observation, the reward and whether the episode ended.
    fn step(&mut self, action: &Action) -> Result<(Observation, f64, bool), ActiveError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereEnvConfig {
    /// Decay rate of intensity with angular distance.
    pub kappa: f64,
    /// Standard deviation of additive Gaussian observation noise.
    pub noise_sigma: f64,
    /// Radians moved per unit action component.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for SphereEnvConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            noise_sigma: 0.0,
            max_step: PI / 18.0,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
struct Episode {
    hidden: [f64; 3],
    theta: f64,
    phi: f64,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

/// A sensor on a sphere that must turn toward a hidden source.
///
/// Intensity is `exp(-kappa * d)` plus optional Gaussian noise, where `d` is
/// the angle between the sensor's pointing direction and the source. Actions
/// have two axes: azimuth and elevation change, each scaled by `max_step`.
#[derive(Debug, Clone)]
pub struct SphereBearingEnv {
    config: SphereEnvConfig,
    episode: Option<Episode>,
}

impl SphereBearingEnv {
    pub fn new(config: SphereEnvConfig) -> Result<Self, ActiveError> {
        let ok = config.kappa.is_finite()
            && config.kappa > 0.0
            && config.noise_sigma.is_finite()
            && config.noise_sigma >= 0.0
            && config.max_step.is_finite()
            && config.max_step > 0.0
            && config.max_steps > 0;
        if !ok {
            return Err(ActiveError::InvalidConfig(format!("{config:?}")));
        }
        Ok(Self {
            config,
            episode: None,
        })
    }

    pub fn config(&self) -> &SphereEnvConfig {
        &self.config
    }

    /// Starts an episode with an explicit source direction (normalized here).
    pub fn reset_with_hidden(&mut self, hidden: [f64; 3], seed: u64) -> Observation {
        let n = (hidden[0] * hidden[0] + hidden[1] * hidden[1] + hidden[2] * hidden[2]).sqrt();
        let hidden = [hidden[0] / n, hidden[1] / n, hidden[2] / n];
        self.start(hidden, ChaCha8Rng::seed_from_u64(seed))
    }

    fn start(&mut self, hidden: [f64; 3], rng: ChaCha8Rng) -> Observation {
        self.episode = Some(Episode {
            hidden,
            theta: 0.0,
            phi: 0.0,
            steps: 0,
            done: false,
            rng,
        });
        self.observe().0
    }

    /// Source direction of the current episode.
    pub fn hidden_dir(&self) -> Option<[f64; 3]> {
        self.episode.as_ref().map(|e| e.hidden)
    }

    /// Current `(theta, phi)`.
    pub fn pose(&self) -> Option<(f64, f64)> {
        self.episode.as_ref().map(|e| (e.theta, e.phi))
    }

    pub fn steps(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    /// Angle between the pointing direction and the source.
    pub fn angular_error(&self) -> Option<f64> {
        self.episode
            .as_ref()
            .map(|e| angular_distance(direction(e.theta, e.phi), e.hidden))
    }

    /// Observation at the current pose plus its noiseless intensity.
    fn observe(&mut self) -> (Observation, f64) {
        let sigma = self.config.noise_sigma;
        let kappa = self.config.kappa;
        let e = self.episode.as_mut().expect("episode started");
        let d = angular_distance(direction(e.theta, e.phi), e.hidden);
        let clean = (-kappa * d).exp();
        let noise = if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("valid sigma").sample(&mut e.rng)
        } else {
            0.0
        };
        (
            Observation {
                intensity: clean + noise,
                theta: e.theta,
                phi: e.phi,
            },
            clean,
        )
    }
}

impl Environment for SphereBearingEnv {
    fn num_axes(&self) -> usize {
        2
    }

    /// Samples the source uniformly on the sphere and points the sensor at `(0, 0)`.
    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let az: f64 = rng.gen_range(-PI..PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        self.start([r * az.cos(), r * az.sin(), z], rng)
    }

    fn step(&mut self, action: &Action) -> Result<(Observation, f64, bool), ActiveError> {
        let max_step = self.config.max_step;
        let max_steps = self.config.max_steps;
        let e = self.episode.as_mut().ok_or(ActiveError::NotReset)?;
        if e.done {
            return Err(ActiveError::EpisodeDone);
        }
        let a = action.axes();
        if a.len() != 2 {
            return Err(EngineError::AxisCountInvalid(a.len()).into());
        }
        e.theta = wrap_angle(e.theta + a[0] * max_step);
        e.phi = (e.phi + a[1] * max_step).clamp(-FRAC_PI_2, FRAC_PI_2);
        e.steps += 1;
        let steps = e.steps;
        let (obs, clean) = self.observe();
        let done = steps >= max_steps || clean > 0.999;
        self.episode.as_mut().expect("episode started").done = done;
        Ok((obs, obs.intensity, done))
    }
}
