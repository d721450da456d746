use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetIterator;
use crate::engine::{Annotation, Category, Data, Target};
use crate::learner::{
    require_trained, HyperparamReader, Hyperparams, Learner, LearnerError, LearnerState, Result,
    TrainStats,
};
use crate::package::{package_write, Manifest, ModelFormat, ModelPackage};
use crate::Scalar;

pub const EWMA_PAYLOAD: &str = "ewma.json";
pub const NORMAL: u32 = 0;
pub const ANOMALY: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EwmaPayload {
    alpha: f64,
    threshold: f64,
    /// Input width seen during `fit`, if any.
    dim: Option<usize>,
}

/// Streaming state of the detector.
#[derive(Debug, Clone, Default, PartialEq)]
struct Stream {
    mean: Option<Vec<f64>>,
}

impl Stream {
    /// Classifies `x` against the running mean, then folds it in.
    /// Returns the verdict and the max-norm deviation (0 for the first sample).
    fn step(&mut self, x: &[f64], alpha: f64, threshold: f64) -> Result<(Category, f64)> {
        let Some(mean) = self.mean.as_mut() else {
            self.mean = Some(x.to_vec());
            return Ok((label(NORMAL).with_confidence(1.0), 0.0));
        };
        if mean.len() != x.len() {
            return Err(LearnerError::DimensionMismatch {
                expected: mean.len(),
                actual: x.len(),
            });
        }
        let dev = mean
            .iter()
            .zip(x)
            .map(|(m, v)| (v - m).abs())
            .fold(0.0, f64::max);
        let verdict = if dev > threshold { ANOMALY } else { NORMAL };
        if alpha == 1.0 {
            mean.copy_from_slice(x);
        } else {
            // incremental form keeps a constant stream exactly fixed
            for (m, v) in mean.iter_mut().zip(x) {
                *m += alpha * (v - *m);
            }
        }
        Ok((label(verdict), dev))
    }
}

fn label(index: u32) -> Category {
    Category::new(index).with_description(if index == ANOMALY { "anomaly" } else { "normal" })
}

fn rows(data: &Data) -> Result<Vec<&[f64]>> {
    match data {
        Data::Vector(v) => Ok(vec![v.values()]),
        Data::Timeseries(t) => Ok(t.samples().iter().map(Vec::as_slice).collect()),
        other => Err(LearnerError::UnsupportedInput(format!(
            "ewma accepts vector or timeseries, got {}",
            other.kind()
        ))),
    }
}

/// Streaming anomaly detector over an exponentially weighted moving average.
///
/// Each sample is judged against the mean of the samples before it by the
/// largest per-channel absolute deviation; the mean is updated afterwards.
/// Hyperparameters: `alpha` in (0, 1] (default 0.1) and positive `threshold`
/// (default 3). The learner must be fitted or loaded before `infer`.
#[derive(Debug, Clone)]
pub struct EwmaLearner {
    alpha: f64,
    threshold: f64,
    dim: Option<usize>,
    state: LearnerState,
    stream: Stream,
}

impl EwmaLearner {
    pub fn new(hp: &Hyperparams) -> Result<Self> {
        let r = HyperparamReader::new("ewma", hp, &["alpha", "threshold"])?;
        let alpha = r.positive_f64_or("alpha", 0.1)?;
        let threshold = r.positive_f64_or("threshold", 3.0)?;
        if alpha > 1.0 {
            return Err(LearnerError::BadHyperparam(format!(
                "ewma: 'alpha' must be in (0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            threshold,
            dim: None,
            state: LearnerState::Untrained,
            stream: Stream::default(),
        })
    }

    /// A ready-to-use detector, as if loaded from a package.
    pub fn with_params(alpha: f64, threshold: f64) -> Result<Self> {
        let hp = Hyperparams::from([
            ("alpha".to_string(), Scalar::Float(alpha)),
            ("threshold".to_string(), Scalar::Float(threshold)),
        ]);
        let mut l = Self::new(&hp)?;
        l.state = LearnerState::Trained;
        Ok(l)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Current running mean, if a sample has been seen since the last reset.
    pub fn mean(&self) -> Option<&[f64]> {
        self.stream.mean.as_deref()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => Err(LearnerError::DimensionMismatch {
                expected: d,
                actual: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Streams `ds` from an empty mean, returning per-sample deviations and
    /// verdicts paired with any category labels.
    fn replay(&self, ds: &dyn DatasetIterator) -> Result<Vec<(f64, u32, Option<u32>)>> {
        let mut stream = Stream::default();
        let mut out = Vec::new();
        for item in ds.iter() {
            let (data, ann) = item?;
            let truth = match &ann {
                Annotation::Target(Target::Category(c)) => Some(c.index),
                _ => None,
            };
            for x in rows(&data)? {
                self.check_dim(x)?;
                let (cat, dev) = stream.step(x, self.alpha, self.threshold)?;
                out.push((dev, cat.index, truth));
            }
        }
        if out.is_empty() {
            return Err(LearnerError::EmptyDataset("ewma".into()));
        }
        Ok(out)
    }

    fn summarize(steps: &[(f64, u32, Option<u32>)]) -> TrainStats {
        let n = steps.len() as f64;
        let anomalies = steps.iter().filter(|s| s.1 == ANOMALY).count() as f64;
        let mut stats = TrainStats::new()
            .scalar("n", n)
            .scalar("anomaly_rate", anomalies / n)
            .series("deviation", steps.iter().map(|s| s.0).collect());
        let labelled: Vec<_> = steps.iter().filter_map(|s| s.2.map(|t| (s.1, t))).collect();
        if !labelled.is_empty() {
            let correct = labelled.iter().filter(|(p, t)| p == t).count();
            stats = stats.scalar("accuracy", correct as f64 / labelled.len() as f64);
        }
        stats
    }
}

impl Learner for EwmaLearner {
    fn name(&self) -> &str {
        "ewma"
    }

    fn state(&self) -> LearnerState {
        self.state
    }

    /// Records the input width and reports how the configured detector
    /// behaves on `ds`; the live stream starts empty afterwards.
    fn fit(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats> {
        let first = ds.iter().next().ok_or_else(|| LearnerError::EmptyDataset("ewma".into()))??;
        let width = rows(&first.0)?.first().map(|r| r.len());
        let previous = self.dim;
        self.dim = width;
        let steps = match self.replay(ds) {
            Ok(s) => s,
            Err(e) => {
                self.dim = previous;
                return Err(e);
            }
        };
        self.state = LearnerState::Trained;
        self.stream = Stream::default();
        Ok(Self::summarize(&steps))
    }

    fn eval(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats> {
        require_trained("ewma", self.state)?;
        Ok(Self::summarize(&self.replay(ds)?))
    }

    fn infer(&mut self, data: &Data) -> Result<Vec<Target>> {
        require_trained("ewma", self.state)?;
        let rows = rows(data)?;
        let mut out = Vec::with_capacity(rows.len());
        for x in rows {
            self.check_dim(x)?;
            out.push(Target::Category(self.stream.step(x, self.alpha, self.threshold)?.0));
        }
        Ok(out)
    }

    fn save(&self, dest: &Path) -> Result<ModelPackage> {
        require_trained("ewma", self.state)?;
        let payload = EwmaPayload {
            alpha: self.alpha,
            threshold: self.threshold,
            dim: self.dim,
        };
        let mut manifest = Manifest::new("ewma", ModelFormat::Native, vec![EWMA_PAYLOAD.into()]);
        manifest.classes = Some(vec!["normal".into(), "anomaly".into()]);
        manifest.optimized = self.state == LearnerState::Optimized;
        manifest.inference_params = BTreeMap::from([
            ("alpha".to_string(), Scalar::Float(self.alpha)),
            ("threshold".to_string(), Scalar::Float(self.threshold)),
        ]);
        let mut bytes = serde_json::to_vec_pretty(&payload).expect("payload serializes");
        bytes.push(b'\n');
        let payloads = BTreeMap::from([(EWMA_PAYLOAD.to_string(), bytes)]);
        Ok(package_write(&manifest, &payloads, dest)?)
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let pkg = ModelPackage::open(path)?;
        let m = pkg.manifest();
        if m.model_format != ModelFormat::Native {
            return Err(LearnerError::FormatMismatch(format!(
                "ewma reads native packages, {} is {}",
                path.display(),
                m.model_format.as_str()
            )));
        }
        let bytes = pkg.read_payload(EWMA_PAYLOAD)?;
        let p: EwmaPayload = serde_json::from_slice(&bytes)
            .map_err(|e| LearnerError::CorruptPayload(format!("{EWMA_PAYLOAD}: {e}")))?;
        let mut fresh = Self::with_params(p.alpha, p.threshold)
            .map_err(|e| LearnerError::CorruptPayload(e.to_string()))?;
        fresh.dim = p.dim;
        if m.optimized {
            fresh.state = LearnerState::Optimized;
        }
        *self = fresh;
        Ok(())
    }

    /// Nothing to precompute; only marks the learner optimized.
    fn optimize(&mut self) -> Result<()> {
        require_trained("ewma", self.state)?;
        self.state = LearnerState::Optimized;
        Ok(())
    }

    fn reset(&mut self) {
        self.stream = Stream::default();
    }
}
