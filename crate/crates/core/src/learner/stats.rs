use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LearnerError, Result};

/// One training or evaluation metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metric {
    Scalar(f64),
    /// One value per iteration (or per class, per sample...).
    Series(Vec<f64>),
}

/// The dictionary returned by `fit` and `eval`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainStats(BTreeMap<String, Metric>);

impl TrainStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(mut self, key: impl Into<String>, value: f64) -> Self {
        self.0.insert(key.into(), Metric::Scalar(value));
        self
    }

    pub fn series(mut self, key: impl Into<String>, values: Vec<f64>) -> Self {
        self.0.insert(key.into(), Metric::Series(values));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Metric> {
        self.0.get(key)
    }

    pub fn get_scalar(&self, key: &str) -> Option<f64> {
        match self.0.get(key) {
            Some(Metric::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Metric)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Accepts nonempty stats whose values are all finite and whose series are nonempty.
pub fn stats_validate(stats: &TrainStats) -> Result<()> {
    if stats.is_empty() {
        return Err(LearnerError::EmptyStats);
    }
    for (key, metric) in stats.iter() {
        match metric {
            Metric::Scalar(v) if !v.is_finite() => {
                return Err(LearnerError::NonFiniteMetric(format!("{key} = {v}")))
            }
            Metric::Series(s) if s.is_empty() => return Err(LearnerError::EmptySeries(key.clone())),
            Metric::Series(s) => {
                if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(LearnerError::NonFiniteMetric(format!("{key}[{i}] = {v}")));
                }
            }
            Metric::Scalar(_) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_examples() {
        let ok = TrainStats::new()
            .series("train_loss", vec![0.9, 0.5])
            .scalar("accuracy", 1.0);
        assert!(stats_validate(&ok).is_ok());
        assert!(matches!(stats_validate(&TrainStats::new()), Err(LearnerError::EmptyStats)));
        let nan = TrainStats::new().series("loss", vec![f64::NAN]);
        assert!(matches!(stats_validate(&nan), Err(LearnerError::NonFiniteMetric(_))));
        let inf = TrainStats::new().scalar("loss", f64::INFINITY);
        assert!(matches!(stats_validate(&inf), Err(LearnerError::NonFiniteMetric(_))));
        let empty = TrainStats::new().series("loss", vec![]);
        assert!(matches!(stats_validate(&empty), Err(LearnerError::EmptySeries(_))));
    }

    #[test]
    fn json_shape() {
        let s = TrainStats::new().series("a", vec![1.0]).scalar("b", 2.5);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"a":[1.0],"b":2.5}"#);
        assert_eq!(serde_json::from_str::<TrainStats>(&text).unwrap(), s);
    }
}
