//! Non-image sensor data and the [`Data`] sum type.

use super::{EngineError, Image};

/// A one-dimensional vector of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    values: Vec<f64>,
}

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self, EngineError> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite(format!("vector value {v}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_matrix(rows: &[Vec<f64>], min_width: usize, what: &str) -> Result<usize, EngineError> {
    let width = rows.first().map_or(0, Vec::len);
    if width < min_width {
        return Err(EngineError::InvalidShape(format!(
            "{what}: width {width} < {min_width}"
        )));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(EngineError::InvalidShape(format!(
            "{what}: row {i} has width {}, expected {width}",
            r.len()
        )));
    }
    Ok(width)
}

/// T timesteps of D-channel measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeseries {
    samples: Vec<Vec<f64>>,
}

impl Timeseries {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, EngineError> {
        check_matrix(&samples, 1, "timeseries")?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channels(&self) -> usize {
        self.samples[0].len()
    }
}

/// A nonempty sequence of frames sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Image>,
}

impl Video {
    pub fn new(frames: Vec<Image>) -> Result<Self, EngineError> {
        let first = frames
            .first()
            .ok_or_else(|| EngineError::InvalidShape("video has no frames".into()))?;
        let dims = (first.width(), first.height(), first.channels());
        if let Some(i) = frames
            .iter()
            .position(|f| (f.width(), f.height(), f.channels()) != dims)
        {
            return Err(EngineError::InvalidShape(format!(
                "frame {i} differs from frame 0"
            )));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }
}

/// N points of D >= 3 channels (x, y, z in meters, then extras such as intensity).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dims: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, EngineError> {
        let dims = if points.is_empty() {
            3
        } else {
            check_matrix(&points, 3, "point cloud")?
        };
        Ok(Self { points, dims })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudWithCalibration {
    cloud: PointCloud,
    calibration: [[f64; 4]; 3],
}

impl PointCloudWithCalibration {
    /// `calibration` must be a 3x4 projection matrix.
    pub fn new(cloud: PointCloud, calibration: Vec<Vec<f64>>) -> Result<Self, EngineError> {
        if calibration.len() != 3 || calibration.iter().any(|r| r.len() != 4) {
            return Err(EngineError::InvalidShape(
                "calibration must be 3x4".into(),
            ));
        }
        let mut m = [[0.0; 4]; 3];
        for (dst, src) in m.iter_mut().zip(&calibration) {
            dst.copy_from_slice(src);
        }
        Ok(Self {
            cloud,
            calibration: m,
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn calibration(&self) -> &[[f64; 4]; 3] {
        &self.calibration
    }
}

/// Any input a learner may consume.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Image(Image),
    Video(Video),
    Vector(Vector),
    Timeseries(Timeseries),
    PointCloud(PointCloud),
    PointCloudWithCalibration(PointCloudWithCalibration),
}

impl Data {
    pub fn kind(&self) -> &'static str {
        match self {
            Data::Image(_) => "image",
            Data::Video(_) => "video",
            Data::Vector(_) => "vector",
            Data::Timeseries(_) => "timeseries",
            Data::PointCloud(_) => "point_cloud",
            Data::PointCloudWithCalibration(_) => "point_cloud_with_calibration",
        }
    }
}

impl From<Image> for Data {
    fn from(v: Image) -> Self {
        Data::Image(v)
    }
}

impl From<Vector> for Data {
    fn from(v: Vector) -> Self {
        Data::Vector(v)
    }
}

impl From<Timeseries> for Data {
    fn from(v: Timeseries) -> Self {
        Data::Timeseries(v)
    }
}
