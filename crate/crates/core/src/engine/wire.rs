//! JSON wire records for targets: a `"type"` tag plus the type's fields.

use serde_json::Value;

use super::{EngineError, Target};

const TAGS: [&str; 7] = [
    "category",
    "bounding_box",
    "bounding_box_3d",
    "pose",
    "heatmap",
    "speech_command",
    "vector",
];

/// Serializes a target as a single-line JSON object.
pub fn target_to_wire(t: &Target) -> String {
    serde_json::to_string(t).expect("targets always serialize")
}

pub fn target_from_wire(record: &str) -> Result<Target, EngineError> {
    let value: Value = serde_json::from_str(record)
        .map_err(|e| EngineError::SchemaViolation(format!("not JSON: {e}")))?;
    let tag = value
        .get("type")
        .ok_or_else(|| EngineError::SchemaViolation("missing \"type\" field".into()))?
        .as_str()
        .ok_or_else(|| EngineError::SchemaViolation("\"type\" must be a string".into()))?;
    if !TAGS.contains(&tag) {
        return Err(EngineError::UnknownTypeTag(tag.to_string()));
    }
    let target: Target =
        serde_json::from_value(value).map_err(|e| EngineError::SchemaViolation(e.to_string()))?;
    target
        .validate()
        .map_err(|e| EngineError::SchemaViolation(e.to_string()))?;
    Ok(target)
}
