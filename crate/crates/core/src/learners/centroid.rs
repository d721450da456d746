use std::collections::BTreeMap;
use std::path::Path;

use crate::datasets::DatasetIterator;
use crate::engine::{Annotation, Category, Data, Target};
use crate::learner::{
    require_trained, HyperparamReader, Hyperparams, Learner, LearnerError, LearnerState, Result,
    TrainStats,
};
use crate::package::{package_write, Manifest, ModelFormat, ModelPackage};
use crate::Scalar;

pub const CENTROID_PAYLOAD: &str = "centroids.bin";
const MAGIC: &[u8; 4] = b"ODRC";

/// Relative tolerance declared for `optimize`; integer-valued inputs match exactly.
pub const CENTROID_OPTIMIZE_TOLERANCE: f64 = 1e-12;

/// Flattens a vector or image into the feature space; images map to `v / 255`
/// in canonical (CHW, RGB) order.
pub fn features(data: &Data) -> Result<Vec<f64>> {
    match data {
        Data::Vector(v) => Ok(v.values().to_vec()),
        Data::Image(img) => Ok(img.to_unit_f64()),
        other => Err(LearnerError::UnsupportedInput(format!(
            "centroid accepts vector or image, got {}",
            other.kind()
        ))),
    }
}

/// Encodes `C x D` row-major centroids as the native payload.
pub fn encode_centroids(rows: &[Vec<f64>]) -> Vec<u8> {
    let d = rows.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(12 + rows.len() * d * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_centroids(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let corrupt = |m: &str| LearnerError::CorruptPayload(format!("{CENTROID_PAYLOAD}: {m}"));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(corrupt("missing ODRC header"));
    }
    let c = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if c == 0 || d == 0 {
        return Err(corrupt("empty matrix"));
    }
    let expected = c
        .checked_mul(d)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12));
    if expected != Some(bytes.len()) {
        return Err(corrupt(&format!("{} bytes do not hold {c}x{d} floats", bytes.len())));
    }
    let values: Vec<f64> = bytes[12..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(corrupt("non-finite centroid value"));
    }
    Ok(values.chunks(d).map(<[f64]>::to_vec).collect())
}

#[derive(Debug, Clone)]
struct Model {
    centroids: Vec<Vec<f64>>,
    class_names: Option<Vec<String>>,
    /// `‖c‖²` per centroid once optimized.
    sq_norms: Option<Vec<f64>>,
}

/// Nearest-centroid classifier over vectors and images.
///
/// Hyperparameters: `temperature` (positive, default 1) scales the softmax
/// over negative squared distances; `device` accepts only `"cpu"`.
#[derive(Debug, Clone)]
pub struct CentroidLearner {
    temperature: f64,
    model: Option<Model>,
}

impl CentroidLearner {
    pub fn new(hp: &Hyperparams) -> Result<Self> {
        let r = HyperparamReader::new("centroid", hp, &["temperature", "device"])?;
        let temperature = r.positive_f64_or("temperature", 1.0)?;
        let device = r.str_or("device", "cpu")?;
        if device != "cpu" {
            return Err(LearnerError::BadHyperparam(format!(
                "centroid: device '{device}' is not available (only 'cpu')"
            )));
        }
        Ok(Self {
            temperature,
            model: None,
        })
    }

    /// A trained learner from explicit centroids.
    pub fn from_centroids(
        centroids: Vec<Vec<f64>>,
        class_names: Option<Vec<String>>,
        temperature: f64,
    ) -> Result<Self> {
        let d = centroids.first().map(Vec::len).ok_or_else(|| {
            LearnerError::EmptyDataset("at least one centroid is required".into())
        })?;
        if let Some(bad) = centroids.iter().find(|c| c.len() != d) {
            return Err(LearnerError::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        if d == 0 || centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LearnerError::BadAnnotation("centroids must be finite and nonempty".into()));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(LearnerError::BadHyperparam(format!(
                "centroid: 'temperature' must be positive, got {temperature}"
            )));
        }
        if let Some(names) = &class_names {
            if names.len() != centroids.len() {
                return Err(LearnerError::BadAnnotation(format!(
                    "{} class names for {} centroids",
                    names.len(),
                    centroids.len()
                )));
            }
        }
        Ok(Self {
            temperature,
            model: Some(Model {
                centroids,
                class_names,
                sq_norms: None,
            }),
        })
    }

    pub fn centroids(&self) -> Option<&[Vec<f64>]> {
        self.model.as_ref().map(|m| m.centroids.as_slice())
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.model.as_ref().and_then(|m| m.class_names.as_deref())
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn trained(&self) -> Result<&Model> {
        self.model
            .as_ref()
            .ok_or_else(|| LearnerError::NotTrained("centroid".into()))
    }

    fn squared_distances(model: &Model, x: &[f64]) -> Vec<f64> {
        match &model.sq_norms {
            None => model
                .centroids
                .iter()
                .map(|c| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect(),
            Some(norms) => {
                let xx: f64 = x.iter().map(|v| v * v).sum();
                model
                    .centroids
                    .iter()
                    .zip(norms)
                    .map(|(c, cc)| {
                        let xc: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
                        (xx - 2.0 * xc + cc).max(0.0)
                    })
                    .collect()
            }
        }
    }

    /// Classifies one feature vector.
    pub fn classify(&self, x: &[f64]) -> Result<Category> {
        let model = self.trained()?;
        let d = model.centroids[0].len();
        if x.len() != d {
            return Err(LearnerError::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let dist = Self::squared_distances(model, x);
        let (best, d_min) = dist
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let z: f64 = dist
            .iter()
            .map(|dj| (-(dj - d_min) / self.temperature).exp())
            .sum();
        let mut cat = Category::new(best as u32).with_confidence(1.0 / z);
        if let Some(names) = &model.class_names {
            cat = cat.with_description(names[best].clone());
        }
        Ok(cat)
    }

    fn labelled(ds: &dyn DatasetIterator) -> Result<Vec<(Vec<f64>, Category)>> {
        let mut out = Vec::with_capacity(ds.len());
        for item in ds.iter() {
            let (data, ann) = item?;
            let cat = match ann {
                Annotation::Target(Target::Category(c)) => c,
                other => {
                    return Err(LearnerError::BadAnnotation(format!(
                        "centroid needs category labels, got {other:?}"
                    )))
                }
            };
            out.push((features(&data)?, cat));
        }
        Ok(out)
    }

    fn accuracy(&self, items: &[(Vec<f64>, Category)]) -> Result<f64> {
        let mut correct = 0usize;
        for (x, label) in items {
            if self.classify(x)?.index == label.index {
                correct += 1;
            }
        }
        Ok(correct as f64 / items.len() as f64)
    }
}

impl Learner for CentroidLearner {
    fn name(&self) -> &str {
        "centroid"
    }

    fn state(&self) -> LearnerState {
        match &self.model {
            None => LearnerState::Untrained,
            Some(m) if m.sq_norms.is_some() => LearnerState::Optimized,
            Some(_) => LearnerState::Trained,
        }
    }

    fn fit(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats> {
        let items = Self::labelled(ds)?;
        if items.is_empty() {
            return Err(LearnerError::EmptyDataset("centroid fit".into()));
        }
        let d = items[0].0.len();
        let classes = items.iter().map(|(_, c)| c.index).max().expect("nonempty") as usize + 1;
        let mut sums = vec![vec![0.0; d]; classes];
        let mut counts = vec![0usize; classes];
        let mut names: Vec<Option<String>> = vec![None; classes];
        for (x, cat) in &items {
            if x.len() != d {
                return Err(LearnerError::DimensionMismatch {
                    expected: d,
                    actual: x.len(),
                });
            }
            let c = cat.index as usize;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += v;
            }
            counts[c] += 1;
            if names[c].is_none() {
                names[c] = cat.description.clone();
            }
        }
        if let Some(missing) = counts.iter().position(|&n| n == 0) {
            return Err(LearnerError::MissingClass(missing as u32));
        }
        let centroids: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| s.into_iter().map(|v| v / n as f64).collect())
            .collect();
        let class_names = names.into_iter().collect::<Option<Vec<String>>>();
        self.model = Some(Model {
            centroids,
            class_names,
            sq_norms: None,
        });
        let acc = self.accuracy(&items)?;
        Ok(TrainStats::new()
            .series("per_class_counts", counts.iter().map(|&n| n as f64).collect())
            .scalar("train_accuracy", acc))
    }

    fn eval(&mut self, ds: &dyn DatasetIterator) -> Result<TrainStats> {
        self.trained()?;
        let items = Self::labelled(ds)?;
        if items.is_empty() {
            return Err(LearnerError::EmptyDataset("centroid eval".into()));
        }
        Ok(TrainStats::new()
            .scalar("accuracy", self.accuracy(&items)?)
            .scalar("n", items.len() as f64))
    }

    fn infer(&mut self, data: &Data) -> Result<Vec<Target>> {
        require_trained("centroid", self.state())?;
        Ok(vec![Target::Category(self.classify(&features(data)?)?)])
    }

    fn save(&self, dest: &Path) -> Result<ModelPackage> {
        let model = self.trained()?;
        let mut manifest = Manifest::new("centroid", ModelFormat::Native, vec![CENTROID_PAYLOAD.into()]);
        manifest.classes = model.class_names.clone();
        manifest.optimized = model.sq_norms.is_some();
        if manifest.optimized {
            manifest
                .optimizer_info
                .insert("method".into(), "precomputed_squared_norms".into());
        }
        manifest
            .inference_params
            .insert("temperature".into(), Scalar::Float(self.temperature));
        let payloads = BTreeMap::from([(CENTROID_PAYLOAD.to_string(), encode_centroids(&model.centroids))]);
        Ok(package_write(&manifest, &payloads, dest)?)
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let pkg = ModelPackage::open(path)?;
        let m = pkg.manifest();
        if m.model_format != ModelFormat::Native {
            return Err(LearnerError::FormatMismatch(format!(
                "centroid reads native packages, {} is {}",
                path.display(),
                m.model_format.as_str()
            )));
        }
        let centroids = decode_centroids(&pkg.read_payload(CENTROID_PAYLOAD)?)?;
        let temperature = match m.inference_params.get("temperature") {
            None => self.temperature,
            Some(v) => v.as_f64().filter(|t| t.is_finite() && *t > 0.0).ok_or_else(|| {
                LearnerError::CorruptPayload(format!("temperature {v} is not a positive number"))
            })?,
        };
        let mut loaded = Self::from_centroids(centroids, m.classes.clone(), temperature)
            .map_err(|e| LearnerError::CorruptPayload(e.to_string()))?;
        if m.optimized {
            loaded.optimize()?;
        }
        *self = loaded;
        Ok(())
    }

    fn optimize(&mut self) -> Result<()> {
        let model = self
            .model
            .as_mut()
            .ok_or_else(|| LearnerError::NotTrained("centroid".into()))?;
        if model.sq_norms.is_none() {
            model.sq_norms = Some(
                model
                    .centroids
                    .iter()
                    .map(|c| c.iter().map(|v| v * v).sum())
                    .collect(),
            );
        }
        Ok(())
    }

    fn reset(&mut self) {}

    fn optimize_tolerance(&self) -> f64 {
        CENTROID_OPTIMIZE_TOLERANCE
    }
}
