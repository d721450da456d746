//! Canonical data types, targets, actions and their conversions.
//!
//! Everything downstream (learners, datasets, the CLI and FFI surfaces) speaks
//! in terms of these types, so a detector and a classifier can be swapped
//! without touching the surrounding pipeline.

mod action;
mod data;
mod draw;
mod image;
mod pnm;
mod target;
mod wire;

pub use action::{Action, MAX_AXES};
pub use data::{Data, PointCloud, PointCloudWithCalibration, Timeseries, Vector, Video};
pub use draw::{draw_bounding_boxes, PALETTE};
pub use image::{f32_to_u8, u8_to_f32, ChannelOrder, DType, Image, ImageFormat, Layout, PixelBuffer};
pub use pnm::{image_open, image_save};
pub use target::{
    iou, Annotation, BaseTarget, BoundingBox, BoundingBox3D, Category, Heatmap, Pose,
    SpeechCommand, Target, VectorTarget, ABSENT_KEYPOINT,
};
pub use wire::{target_from_wire, target_to_wire};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("LengthMismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("ValueOutOfRange: {0} is outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("BadChannels: {0} (expected 1 or 3)")]
    BadChannels(usize),
    #[error("DTypeMismatch: buffer sample type differs from the requested format")]
    DTypeMismatch,
    #[error("FileNotFound: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),
    #[error("CorruptHeader: {0}")]
    CorruptHeader(String),
    #[error("AxisCountInvalid: {0} (expected 1..=4)")]
    AxisCountInvalid(usize),
    #[error("ComponentOutOfRange: axis {axis} = {value}")]
    ComponentOutOfRange { axis: usize, value: f64 },
    #[error("NonFinite: {0}")]
    NonFinite(String),
    #[error("InvalidShape: {0}")]
    InvalidShape(String),
    #[error("InvalidTarget: {0}")]
    InvalidTarget(String),
    #[error("UnknownTypeTag: {0}")]
    UnknownTypeTag(String),
    #[error("SchemaViolation: {0}")]
    SchemaViolation(String),
    #[error("IndexOutOfRange: class {index} with {count} class names")]
    IndexOutOfRange { index: u32, count: usize },
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}
