//! Model packages: a `manifest.json` describing a set of payload files.
//!
//! On disk a package is a directory:
//!
//! ```text
//! my_model/
//!   manifest.json
//!   centroids.bin        <- listed in model_paths, SHA-256 in checksums
//! ```
//!
//! Payloads are opaque bytes; an `"onnx"` package simply carries an ONNX graph
//! file that this crate never executes.

mod fetch;

pub use fetch::{archive_package, package_fetch};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Scalar;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PackageError {
    #[error("PathEscape: {0}")]
    PathEscape(String),
    #[error("DestNotEmpty: {}", .0.display())]
    DestNotEmpty(PathBuf),
    #[error("ChecksumMismatch: {0}")]
    ChecksumMismatch(String),
    #[error("MissingManifest: {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("MissingPayload: {0}")]
    MissingPayload(String),
    #[error("SchemaViolation: {0}")]
    SchemaViolation(String),
    #[error("UnsupportedScheme: {0}")]
    UnsupportedScheme(String),
    #[error("TransferFailed: {0}")]
    TransferFailed(String),
    #[error("DigestMismatch: expected {expected}, got {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error("InvalidArchive: {0}")]
    InvalidArchive(String),
    #[error("Io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Onnx,
    Native,
}

impl ModelFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFormat::Onnx => "onnx",
            ModelFormat::Native => "native",
        }
    }
}

/// Contents of `manifest.json`. Unknown top-level keys are rejected; free-form
/// information belongs in `metadata`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub schema_version: u32,
    pub model_format: ModelFormat,
    pub model_paths: Vec<String>,
    /// Lowercase hex SHA-256 per entry of `model_paths`.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    #[serde(default)]
    pub optimized: bool,
    #[serde(default)]
    pub optimizer_info: BTreeMap<String, String>,
    #[serde(default)]
    pub inference_params: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(name: impl Into<String>, model_format: ModelFormat, model_paths: Vec<String>) -> Self {
        Self {
            name: name.into(),
            schema_version: SCHEMA_VERSION,
            model_format,
            model_paths,
            checksums: BTreeMap::new(),
            classes: None,
            optimized: false,
            optimizer_info: BTreeMap::new(),
            inference_params: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PackageError> {
        serde_json::from_str(text).map_err(|e| PackageError::SchemaViolation(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    fn check_schema(&self) -> Result<(), PackageError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(PackageError::SchemaViolation(format!(
                "schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &self.model_paths {
            if !seen.insert(p) {
                return Err(PackageError::SchemaViolation(format!("duplicate path {p}")));
            }
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Accepts only relative, `/`-separated paths that stay inside the package.
pub fn check_relative_path(p: &str) -> Result<(), PackageError> {
    let escape = || PackageError::PathEscape(p.to_string());
    if p.is_empty() || p.starts_with('/') || p.contains('\\') || p.contains(':') {
        return Err(escape());
    }
    if p.split('/').any(|c| c.is_empty() || c == "." || c == "..") {
        return Err(escape());
    }
    Ok(())
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// A validated package directory.
#[derive(Debug, Clone)]
pub struct ModelPackage {
    root: PathBuf,
    manifest: Manifest,
}

impl ModelPackage {
    /// Opens and fully validates the package at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, PackageError> {
        let root = root.as_ref().to_path_buf();
        let manifest = package_validate(&root)?;
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn read_payload(&self, rel: &str) -> Result<Vec<u8>, PackageError> {
        if !self.manifest.model_paths.iter().any(|p| p == rel) {
            return Err(PackageError::MissingPayload(rel.to_string()));
        }
        let bytes = fs::read(self.root.join(rel))?;
        if sha256_hex(&bytes) != self.manifest.checksums[rel] {
            return Err(PackageError::ChecksumMismatch(rel.to_string()));
        }
        Ok(bytes)
    }
}

/// Writes a new package to `dest`, computing a checksum for every payload.
///
/// `dest` must be absent or an empty directory. Checksums already present in
/// `manifest` must agree with the payload bytes.
pub fn package_write(
    manifest: &Manifest,
    payloads: &BTreeMap<String, Vec<u8>>,
    dest: impl AsRef<Path>,
) -> Result<ModelPackage, PackageError> {
    let dest = dest.as_ref();
    for p in manifest.model_paths.iter().chain(payloads.keys()) {
        check_relative_path(p)?;
    }
    manifest.check_schema()?;
    let listed: BTreeSet<&String> = manifest.model_paths.iter().collect();
    let given: BTreeSet<&String> = payloads.keys().collect();
    if listed != given {
        return Err(PackageError::SchemaViolation(
            "model_paths must list exactly the supplied payloads".into(),
        ));
    }
    if let Some(extra) = manifest.checksums.keys().find(|k| !listed.contains(k)) {
        return Err(PackageError::SchemaViolation(format!(
            "checksum for unlisted path {extra}"
        )));
    }

    let mut out = manifest.clone();
    for (path, bytes) in payloads {
        let digest = sha256_hex(bytes);
        if let Some(given) = manifest.checksums.get(path) {
            if !given.eq_ignore_ascii_case(&digest) {
                return Err(PackageError::ChecksumMismatch(path.clone()));
            }
        }
        out.checksums.insert(path.clone(), digest);
    }

    if dest.exists() {
        let occupied = !dest.is_dir() || fs::read_dir(dest)?.next().is_some();
        if occupied {
            return Err(PackageError::DestNotEmpty(dest.to_path_buf()));
        }
    }
    fs::create_dir_all(dest)?;
    for (path, bytes) in payloads {
        let target = dest.join(path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(target, bytes)?;
    }
    fs::write(dest.join(MANIFEST_FILE), out.to_json())?;
    ModelPackage::open(dest)
}

/// Parses the manifest at `root` and re-verifies every payload checksum.
pub fn package_validate(root: impl AsRef<Path>) -> Result<Manifest, PackageError> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(PackageError::MissingManifest(manifest_path))
        }
        Err(e) if e.kind() == io::ErrorKind::InvalidData => {
            return Err(PackageError::SchemaViolation("manifest is not UTF-8".into()))
        }
        Err(e) => return Err(e.into()),
    };
    let manifest = Manifest::from_json(&text)?;
    manifest.check_schema()?;

    for p in &manifest.model_paths {
        check_relative_path(p)
            .map_err(|_| PackageError::SchemaViolation(format!("path escapes package: {p}")))?;
    }
    if let Some(extra) = manifest
        .checksums
        .keys()
        .find(|k| !manifest.model_paths.contains(k))
    {
        return Err(PackageError::SchemaViolation(format!(
            "checksum for unlisted path {extra}"
        )));
    }
    for p in &manifest.model_paths {
        let expected = manifest
            .checksums
            .get(p)
            .ok_or_else(|| PackageError::SchemaViolation(format!("no checksum for {p}")))?;
        if !is_sha256_hex(expected) {
            return Err(PackageError::SchemaViolation(format!(
                "checksum for {p} is not lowercase hex SHA-256"
            )));
        }
        let bytes = match fs::read(root.join(p)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(PackageError::MissingPayload(p.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        if &sha256_hex(&bytes) != expected {
            return Err(PackageError::ChecksumMismatch(p.clone()));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payloads(entries: &[(&str, &[u8])]) -> BTreeMap<String, Vec<u8>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect()
    }

    #[test]
    fn sha256_of_010203() {
        // recomputed independently with `printf '\x01\x02\x03' | sha256sum`
        assert_eq!(
            sha256_hex(&[1, 2, 3]),
            "039058c6f2c0cb492c533b0a4d14ef77cc0f78abccced5287d84a1a2011cfb81"
        );
    }

    #[test]
    fn write_computes_checksums_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("pkg");
        let m = Manifest::new("m", ModelFormat::Native, vec!["model.bin".into()]);
        let pkg = package_write(&m, &payloads(&[("model.bin", &[1, 2, 3])]), &dest).unwrap();
        assert_eq!(
            pkg.manifest().checksums["model.bin"],
            "039058c6f2c0cb492c533b0a4d14ef77cc0f78abccced5287d84a1a2011cfb81"
        );
        assert_eq!(package_validate(&dest).unwrap(), *pkg.manifest());
        assert_eq!(pkg.read_payload("model.bin").unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn path_rules() {
        for bad in ["../x", "/abs", "a/../b", "a\\b", "", "a//b", "./a", "c:x"] {
            assert!(check_relative_path(bad).is_err(), "{bad}");
        }
        for good in ["a", "a/b.onnx", "weights/v1/x.bin"] {
            check_relative_path(good).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new("m", ModelFormat::Native, vec!["../x".into()]);
        let err = package_write(&m, &payloads(&[("../x", b"1")]), dir.path().join("p")).unwrap_err();
        assert!(matches!(err, PackageError::PathEscape(p) if p == "../x"));
    }

    #[test]
    fn dest_must_be_empty() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("junk"), b"x").unwrap();
        let m = Manifest::new("m", ModelFormat::Native, vec!["a".into()]);
        let err = package_write(&m, &payloads(&[("a", b"1")]), dir.path()).unwrap_err();
        assert!(matches!(err, PackageError::DestNotEmpty(_)));
    }

    #[test]
    fn prefilled_checksum_must_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("m", ModelFormat::Onnx, vec!["g.onnx".into()]);
        m.checksums.insert("g.onnx".into(), sha256_hex(b"other"));
        let err = package_write(&m, &payloads(&[("g.onnx", b"graph")]), dir.path().join("p"))
            .unwrap_err();
        assert!(matches!(err, PackageError::ChecksumMismatch(p) if p == "g.onnx"));

        m.checksums.insert("g.onnx".into(), sha256_hex(b"graph"));
        package_write(&m, &payloads(&[("g.onnx", b"graph")]), dir.path().join("p")).unwrap();
    }

    #[test]
    fn payload_set_must_match_paths() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new("m", ModelFormat::Native, vec!["a".into()]);
        let err = package_write(&m, &payloads(&[("a", b"1"), ("b", b"2")]), dir.path().join("p"))
            .unwrap_err();
        assert!(matches!(err, PackageError::SchemaViolation(_)));
    }

    #[test]
    fn tamper_and_delete_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("pkg");
        let m = Manifest::new("m", ModelFormat::Native, vec!["w/model.bin".into(), "b".into()]);
        package_write(&m, &payloads(&[("w/model.bin", &[9; 16]), ("b", b"bb")]), &dest).unwrap();

        let mut bytes = fs::read(dest.join("w/model.bin")).unwrap();
        bytes[3] ^= 1;
        fs::write(dest.join("w/model.bin"), &bytes).unwrap();
        assert!(matches!(
            package_validate(&dest),
            Err(PackageError::ChecksumMismatch(p)) if p == "w/model.bin"
        ));

        fs::remove_file(dest.join("w/model.bin")).unwrap();
        assert!(matches!(
            package_validate(&dest),
            Err(PackageError::MissingPayload(p)) if p == "w/model.bin"
        ));
    }

    #[test]
    fn schema_problems() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            package_validate(dir.path()),
            Err(PackageError::MissingManifest(_))
        ));
        let write = |text: &str| fs::write(dir.path().join(MANIFEST_FILE), text).unwrap();

        write("{not json");
        assert!(matches!(package_validate(dir.path()), Err(PackageError::SchemaViolation(_))));

        let mut m = Manifest::new("m", ModelFormat::Native, vec![]);
        m.schema_version = 2;
        write(&m.to_json());
        assert!(matches!(package_validate(dir.path()), Err(PackageError::SchemaViolation(_))));

        let m = Manifest::new("m", ModelFormat::Native, vec!["a".into()]);
        write(&m.to_json());
        assert!(matches!(package_validate(dir.path()), Err(PackageError::SchemaViolation(_))));

        write(r#"{"name":"m","schema_version":1,"model_format":"native","model_paths":[],"extra":1}"#);
        assert!(matches!(package_validate(dir.path()), Err(PackageError::SchemaViolation(_))));

        write(r#"{"name":"m","schema_version":1,"model_format":"tflite","model_paths":[]}"#);
        assert!(matches!(package_validate(dir.path()), Err(PackageError::SchemaViolation(_))));
    }

    #[test]
    fn manifest_round_trip_is_field_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("detector", ModelFormat::Onnx, vec!["model.onnx".into()]);
        m.classes = Some(vec!["person".into(), "car".into()]);
        m.optimized = true;
        m.optimizer_info.insert("method".into(), "fuse".into());
        m.inference_params.insert("threshold".into(), Scalar::Float(0.1 + 0.2));
        m.inference_params.insert("iters".into(), Scalar::Int(3));
        m.inference_params.insert("device".into(), Scalar::from("cpu"));
        m.inference_params.insert("nms".into(), Scalar::Bool(false));
        m.metadata.insert("has_data".into(), "false".into());
        let pkg = package_write(&m, &payloads(&[("model.onnx", b"\x08\x07onnx")]), dir.path().join("p"))
            .unwrap();
        let mut expected = m.clone();
        expected.checksums = pkg.manifest().checksums.clone();
        assert_eq!(package_validate(pkg.root()).unwrap(), expected);
    }
}
