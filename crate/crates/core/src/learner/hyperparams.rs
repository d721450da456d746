use std::collections::{BTreeMap, BTreeSet};

use super::{LearnerError, Result};
use crate::Scalar;

/// Constructor parameters of a learner, keyed by name.
pub type Hyperparams = BTreeMap<String, Scalar>;

/// Strict, typed access to [`Hyperparams`].
///
/// Construct it with the keys a learner understands; any other key is
/// rejected up front.
pub struct HyperparamReader<'a> {
    learner: &'a str,
    hp: &'a Hyperparams,
}

impl<'a> HyperparamReader<'a> {
    pub fn new(learner: &'a str, hp: &'a Hyperparams, allowed: &[&str]) -> Result<Self> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        if let Some(bad) = hp.keys().find(|k| !allowed.contains(k.as_str())) {
            let known: Vec<&str> = allowed.into_iter().collect();
            return Err(LearnerError::BadHyperparam(format!(
                "{learner} does not accept '{bad}' (known: {})",
                known.join(", ")
            )));
        }
        Ok(Self { learner, hp })
    }

    fn wrong_type(&self, key: &str, want: &str, got: &Scalar) -> LearnerError {
        LearnerError::BadHyperparam(format!(
            "{}: '{key}' must be {want}, got {got}",
            self.learner
        ))
    }

    /// A finite number; integers are accepted.
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.hp.get(key) {
            None => Ok(default),
            Some(v) => match v.as_f64() {
                Some(f) if f.is_finite() => Ok(f),
                _ => Err(self.wrong_type(key, "a finite number", v)),
            },
        }
    }

    pub fn positive_f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(LearnerError::BadHyperparam(format!(
                "{}: '{key}' must be positive, got {v}",
                self.learner
            )))
        }
    }

    pub fn str_or(&self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.hp.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| self.wrong_type(key, "a string", v)),
        }
    }
}
