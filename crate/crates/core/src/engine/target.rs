//! Prediction and annotation types.
//!
//! Every concrete type implements [`BaseTarget`]. The ones that can serve both
//! as model output and as ground truth are also variants of [`Target`] and may
//! carry a confidence and a suggested [`Action`]. Annotation-only values (such
//! as the list of boxes attached to one COCO image) live in [`Annotation`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Action, EngineError};

/// Root of the target hierarchy.
pub trait BaseTarget: fmt::Debug + Clone + PartialEq + Send + Sync {}

/// Sentinel stored for keypoints that were not detected.
pub const ABSENT_KEYPOINT: [f64; 2] = [-1.0, -1.0];

macro_rules! target_meta {
    ($(#[$m:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $field:ident : $ty:ty,)* }) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            $($(#[$fm])* pub $field: $ty,)*
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub confidence: Option<f64>,
            #[serde(default, rename = "action", skip_serializing_if = "Option::is_none")]
            pub suggested_action: Option<Action>,
        }

        impl BaseTarget for $name {}

        impl $name {
            pub fn with_confidence(mut self, confidence: f64) -> Self {
                self.confidence = Some(confidence);
                self
            }

            pub fn with_action(mut self, action: Action) -> Self {
                self.suggested_action = Some(action);
                self
            }
        }
    };
}

target_meta! {
    /// A class id with an optional human-readable label.
    pub struct Category {
        pub index: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub description: Option<String>,
    }
}

target_meta! {
    /// Axis-aligned box; `(x, y)` is the top-left corner in pixels.
    pub struct BoundingBox {
        pub category: Category,
        pub x: f64,
        pub y: f64,
        pub w: f64,
        pub h: f64,
    }
}

target_meta! {
    /// Oriented 3D box in meters; `size` is (length, width, height).
    pub struct BoundingBox3D {
        pub category: Category,
        pub center: [f64; 3],
        pub size: [f64; 3],
        pub yaw: f64,
    }
}

target_meta! {
    /// Keypoints in pixel coordinates; absent ones hold [`ABSENT_KEYPOINT`].
    pub struct Pose {
        pub keypoints: Vec<[f64; 2]>,
    }
}

target_meta! {
    /// Dense per-pixel class ids, row-major.
    pub struct Heatmap {
        pub class_map: Vec<Vec<u32>>,
        pub num_classes: u32,
    }
}

target_meta! {
    pub struct SpeechCommand {
        pub command: Category,
    }
}

target_meta! {
    /// A real-valued prediction, e.g. an estimated direction.
    pub struct VectorTarget {
        pub values: Vec<f64>,
    }
}

impl Category {
    pub fn new(index: u32) -> Self {
        Self {
            index,
            description: None,
            confidence: None,
            suggested_action: None,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }
}

impl BoundingBox {
    pub fn new(category: Category, x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            category,
            x,
            y,
            w,
            h,
            confidence: None,
            suggested_action: None,
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

impl Pose {
    pub fn new(keypoints: Vec<[f64; 2]>) -> Self {
        Self {
            keypoints,
            confidence: None,
            suggested_action: None,
        }
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.keypoints.get(i).is_some_and(|k| *k != ABSENT_KEYPOINT)
    }
}

impl Heatmap {
    pub fn new(class_map: Vec<Vec<u32>>, num_classes: u32) -> Self {
        Self {
            class_map,
            num_classes,
            confidence: None,
            suggested_action: None,
        }
    }
}

impl SpeechCommand {
    pub fn new(command: Category) -> Self {
        Self {
            command,
            confidence: None,
            suggested_action: None,
        }
    }
}

impl VectorTarget {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            confidence: None,
            suggested_action: None,
        }
    }
}

/// Any target that can be both a prediction and an annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    Category(Category),
    BoundingBox(BoundingBox),
    #[serde(rename = "bounding_box_3d")]
    BoundingBox3D(BoundingBox3D),
    Pose(Pose),
    Heatmap(Heatmap),
    SpeechCommand(SpeechCommand),
    Vector(VectorTarget),
}

impl BaseTarget for Target {}

macro_rules! each_variant {
    ($self:expr, $t:ident => $body:expr) => {
        match $self {
            Target::Category($t) => $body,
            Target::BoundingBox($t) => $body,
            Target::BoundingBox3D($t) => $body,
            Target::Pose($t) => $body,
            Target::Heatmap($t) => $body,
            Target::SpeechCommand($t) => $body,
            Target::Vector($t) => $body,
        }
    };
}

impl Target {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Target::Category(_) => "category",
            Target::BoundingBox(_) => "bounding_box",
            Target::BoundingBox3D(_) => "bounding_box_3d",
            Target::Pose(_) => "pose",
            Target::Heatmap(_) => "heatmap",
            Target::SpeechCommand(_) => "speech_command",
            Target::Vector(_) => "vector",
        }
    }

    pub fn confidence(&self) -> Option<f64> {
        each_variant!(self, t => t.confidence)
    }

    pub fn suggested_action(&self) -> Option<&Action> {
        each_variant!(self, t => t.suggested_action.as_ref())
    }

    pub fn set_suggested_action(&mut self, action: Option<Action>) {
        each_variant!(self, t => t.suggested_action = action)
    }

    /// Checks the invariants that public fields cannot enforce on their own.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidTarget(msg));
        if let Some(c) = self.confidence() {
            if !(0.0..=1.0).contains(&c) {
                return bad(format!("confidence {c} outside [0, 1]"));
            }
        }
        match self {
            Target::Category(c) => check_category(c),
            Target::BoundingBox(b) => {
                check_category(&b.category)?;
                if !(b.w >= 0.0 && b.h >= 0.0) || ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) {
                    return bad(format!("box extent ({}, {}) must be finite and >= 0", b.w, b.h));
                }
                Ok(())
            }
            Target::BoundingBox3D(b) => {
                check_category(&b.category)?;
                if !b.size.iter().all(|&s| s >= 0.0) {
                    return bad(format!("3D box size {:?} must be >= 0", b.size));
                }
                if !(b.yaw > -PI && b.yaw <= PI) {
                    return bad(format!("yaw {} outside (-pi, pi]", b.yaw));
                }
                Ok(())
            }
            Target::Pose(p) => {
                for (i, k) in p.keypoints.iter().enumerate() {
                    if *k != ABSENT_KEYPOINT && (k[0] < 0.0 || k[1] < 0.0) {
                        return bad(format!("keypoint {i} {k:?} is negative but not the sentinel"));
                    }
                }
                Ok(())
            }
            Target::Heatmap(h) => {
                let width = h.class_map.first().map_or(0, Vec::len);
                if h.class_map.iter().any(|r| r.len() != width) {
                    return bad("heatmap rows differ in width".into());
                }
                if let Some(id) = h.class_map.iter().flatten().find(|&&id| id >= h.num_classes) {
                    return bad(format!("class id {id} >= num_classes {}", h.num_classes));
                }
                Ok(())
            }
            Target::SpeechCommand(s) => {
                check_category(&s.command)?;
                match s.command.description.as_deref() {
                    Some(d) if !d.is_empty() => Ok(()),
                    _ => bad("speech command needs a nonempty description".into()),
                }
            }
            Target::Vector(v) => {
                if v.values.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    bad("vector target has non-finite values".into())
                }
            }
        }
    }
}

fn check_category(c: &Category) -> Result<(), EngineError> {
    match c.confidence {
        Some(v) if !(0.0..=1.0).contains(&v) => Err(EngineError::InvalidTarget(format!(
            "category confidence {v} outside [0, 1]"
        ))),
        _ => Ok(()),
    }
}

macro_rules! impl_from_target {
    ($($variant:ident($ty:ty)),*) => {
        $(impl From<$ty> for Target {
            fn from(v: $ty) -> Self {
                Target::$variant(v)
            }
        })*
    };
}

impl_from_target!(
    Category(Category),
    BoundingBox(BoundingBox),
    BoundingBox3D(BoundingBox3D),
    Pose(Pose),
    Heatmap(Heatmap),
    SpeechCommand(SpeechCommand),
    Vector(VectorTarget)
);

/// Ground truth attached to one dataset item.
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    Target(Target),
    /// All boxes of one image, in annotation order.
    Boxes(Vec<BoundingBox>),
}

impl BaseTarget for Annotation {}

impl Annotation {
    pub fn as_category(&self) -> Option<&Category> {
        match self {
            Annotation::Target(Target::Category(c)) => Some(c),
            _ => None,
        }
    }
}

impl From<Target> for Annotation {
    fn from(t: Target) -> Self {
        Annotation::Target(t)
    }
}

/// Intersection over union of two axis-aligned boxes; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn category_head(c: &Category) -> String {
    match &c.description {
        Some(d) => format!("{} '{d}'", c.index),
        None => c.index.to_string(),
    }
}

fn meta_parts(confidence: Option<f64>, action: Option<&Action>) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(c) = confidence {
        out.push(format!("conf={c:.3}"));
    }
    if let Some(a) = action {
        let axes: Vec<String> = a.axes().iter().map(|v| format!("{v:.3}")).collect();
        out.push(format!("action=[{}]", axes.join(", ")));
    }
    out
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, mut parts): (&str, Vec<String>) = match self {
            Target::Category(c) => ("Category", vec![category_head(c)]),
            Target::BoundingBox(b) => (
                "BoundingBox",
                vec![
                    category_head(&b.category),
                    format!("x={:.2}", b.x),
                    format!("y={:.2}", b.y),
                    format!("w={:.2}", b.w),
                    format!("h={:.2}", b.h),
                ],
            ),
            Target::BoundingBox3D(b) => (
                "BoundingBox3D",
                vec![
                    category_head(&b.category),
                    format!(
                        "center=({:.2}, {:.2}, {:.2})",
                        b.center[0], b.center[1], b.center[2]
                    ),
                    format!("size=({:.2}, {:.2}, {:.2})", b.size[0], b.size[1], b.size[2]),
                    format!("yaw={:.3}", b.yaw),
                ],
            ),
            Target::Pose(p) => {
                let kps: Vec<String> = p
                    .keypoints
                    .iter()
                    .map(|k| {
                        if *k == ABSENT_KEYPOINT {
                            "absent".to_string()
                        } else {
                            format!("({:.2}, {:.2})", k[0], k[1])
                        }
                    })
                    .collect();
                ("Pose", vec![format!("[{}]", kps.join(", "))])
            }
            Target::Heatmap(h) => (
                "Heatmap",
                vec![
                    format!(
                        "{}x{}",
                        h.class_map.first().map_or(0, Vec::len),
                        h.class_map.len()
                    ),
                    format!("classes={}", h.num_classes),
                ],
            ),
            Target::SpeechCommand(s) => ("SpeechCommand", vec![category_head(&s.command)]),
            Target::Vector(v) => {
                let vals: Vec<String> = v.values.iter().map(|x| format!("{x:.4}")).collect();
                ("Vector", vec![format!("[{}]", vals.join(", "))])
            }
        };
        parts.extend(meta_parts(self.confidence(), self.suggested_action()));
        write!(f, "{name}({})", parts.join(", "))
    }
}
