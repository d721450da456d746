//! Fetching packages from `file://` and `http(s)://` URIs into a local cache.
//!
//! Cache layout:
//!
//! ```text
//! <cache>/<digest[..2]>/<digest>/   materialized package (content-addressed)
//! <cache>/<digest[..2]>/<digest>.lock
//! <cache>/index/<sha256(uri)>       digest last fetched for that URI
//! <cache>/index/<sha256(uri)>.lock
//! ```
//!
//! For zip archives the digest is the SHA-256 of the archive bytes. For plain
//! directories (`file://` only) it is the SHA-256 over every regular file in
//! byte-wise sorted relative-path order, each contributing
//! `path || 0x00 || len as u64 LE || contents`.

use std::fs::{self, File};
use std::io::{self, Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use url::Url;

use super::{package_validate, sha256_hex, PackageError, MANIFEST_FILE};

const INDEX_DIR: &str = "index";
const MAX_DOWNLOAD: u64 = 4 << 30;

enum Source {
    Directory(PathBuf),
    Archive(Vec<u8>),
}

/// Materializes the package at `uri` under `cache_dir` and returns its root.
///
/// A URI that was fetched before is served from the cache without touching
/// the source. When `expected_sha256` is given and differs from the digest,
/// the cache entry is removed and [`PackageError::DigestMismatch`] returned.
/// Concurrent calls (threads or processes) for the same URI are serialized by
/// file locks; the losers reuse the winner's entry.
pub fn package_fetch(
    uri: &str,
    cache_dir: impl AsRef<Path>,
    expected_sha256: Option<&str>,
) -> Result<PathBuf, PackageError> {
    let cache_dir = cache_dir.as_ref();
    let url = Url::parse(uri).map_err(|e| PackageError::UnsupportedScheme(format!("{uri}: {e}")))?;
    if !matches!(url.scheme(), "file" | "http" | "https") {
        return Err(PackageError::UnsupportedScheme(url.scheme().to_string()));
    }
    let expected = expected_sha256.map(str::to_ascii_lowercase);

    let index_dir = cache_dir.join(INDEX_DIR);
    fs::create_dir_all(&index_dir)?;
    let index_file = index_dir.join(sha256_hex(uri.as_bytes()));
    let _uri_lock = lock(&index_file.with_extension("lock"))?;

    if let Some(digest) = read_index(&index_file) {
        let entry = entry_dir(cache_dir, &digest);
        if let Some(exp) = &expected {
            if *exp != digest {
                remove_entry(cache_dir, &digest, &index_file)?;
                return Err(PackageError::DigestMismatch {
                    expected: exp.clone(),
                    actual: digest,
                });
            }
        }
        if package_validate(&entry).is_ok() {
            log::debug!("cache hit for {uri}: {}", entry.display());
            return Ok(entry);
        }
        log::warn!("stale cache entry for {uri}; fetching again");
    }

    let source = open_source(&url)?;
    let digest = match &source {
        Source::Directory(dir) => directory_digest(dir)?,
        Source::Archive(bytes) => sha256_hex(bytes),
    };
    if let Some(exp) = expected {
        if exp != digest {
            remove_entry(cache_dir, &digest, &index_file)?;
            return Err(PackageError::DigestMismatch {
                expected: exp,
                actual: digest,
            });
        }
    }

    let entry = entry_dir(cache_dir, &digest);
    {
        let shard = entry.parent().expect("entry has a parent");
        fs::create_dir_all(shard)?;
        let _entry_lock = lock(&shard.join(format!("{digest}.lock")))?;
        if package_validate(&entry).is_err() {
            if entry.exists() {
                fs::remove_dir_all(&entry)?;
            }
            let staging = shard.join(format!(".staging-{digest}-{}", unique_suffix()));
            let result = materialize(&source, &staging, &entry);
            if staging.exists() {
                let _ = fs::remove_dir_all(&staging);
            }
            result?;
            if let Err(e) = package_validate(&entry) {
                let _ = fs::remove_dir_all(&entry);
                return Err(e);
            }
        }
    }
    write_atomic(&index_file, digest.as_bytes())?;
    Ok(entry)
}

/// Packs a package directory into a deterministic zip archive.
pub fn archive_package(root: impl AsRef<Path>) -> Result<Vec<u8>, PackageError> {
    use zip::write::SimpleFileOptions;

    let root = root.as_ref();
    let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for (rel, path) in list_files(root)? {
        writer
            .start_file(rel, options)
            .map_err(|e| PackageError::InvalidArchive(e.to_string()))?;
        writer.write_all(&fs::read(path)?)?;
    }
    let cursor = writer
        .finish()
        .map_err(|e| PackageError::InvalidArchive(e.to_string()))?;
    Ok(cursor.into_inner())
}

fn entry_dir(cache_dir: &Path, digest: &str) -> PathBuf {
    cache_dir.join(&digest[..2]).join(digest)
}

fn read_index(index_file: &Path) -> Option<String> {
    let digest = fs::read_to_string(index_file).ok()?;
    let digest = digest.trim();
    (digest.len() == 64 && digest.bytes().all(|b| b.is_ascii_hexdigit())).then(|| digest.to_string())
}

fn remove_entry(cache_dir: &Path, digest: &str, index_file: &Path) -> Result<(), PackageError> {
    let entry = entry_dir(cache_dir, digest);
    if entry.exists() {
        fs::remove_dir_all(entry)?;
    }
    match fs::remove_file(index_file) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

fn lock(path: &Path) -> Result<File, PackageError> {
    let file = File::options()
        .create(true)
        .truncate(false)
        .write(true)
        .open(path)?;
    file.lock()?;
    Ok(file)
}

fn unique_suffix() -> String {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or_default();
    format!("{}-{nanos}", std::process::id())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PackageError> {
    let tmp = path.with_extension(format!("tmp-{}", unique_suffix()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn open_source(url: &Url) -> Result<Source, PackageError> {
    match url.scheme() {
        "file" => {
            let path = url
                .to_file_path()
                .map_err(|_| PackageError::TransferFailed(format!("bad file URI {url}")))?;
            if path.is_dir() {
                Ok(Source::Directory(path))
            } else {
                fs::read(&path)
                    .map(Source::Archive)
                    .map_err(|e| PackageError::TransferFailed(format!("{}: {e}", path.display())))
            }
        }
        _ => {
            let response = ureq::get(url.as_str())
                .call()
                .map_err(|e| PackageError::TransferFailed(e.to_string()))?;
            let mut body = Vec::new();
            response
                .into_reader()
                .take(MAX_DOWNLOAD)
                .read_to_end(&mut body)
                .map_err(|e| PackageError::TransferFailed(e.to_string()))?;
            Ok(Source::Archive(body))
        }
    }
}

fn list_files(root: &Path) -> Result<Vec<(String, PathBuf)>, PackageError> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<(String, PathBuf)>) -> io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel = if prefix.is_empty() {
                name
            } else {
                format!("{prefix}/{name}")
            };
            let path = entry.path();
            let meta = fs::metadata(&path)?;
            if meta.is_dir() {
                walk(&path, &rel, out)?;
            } else if meta.is_file() {
                out.push((rel, path));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, "", &mut out)?;
    out.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    Ok(out)
}

fn directory_digest(root: &Path) -> Result<String, PackageError> {
    let mut hasher = Sha256::new();
    for (rel, path) in list_files(root)? {
        let bytes = fs::read(path)?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn materialize(source: &Source, staging: &Path, entry: &Path) -> Result<(), PackageError> {
    fs::create_dir_all(staging)?;
    match source {
        Source::Directory(dir) => {
            for (rel, path) in list_files(dir)? {
                let dst = staging.join(&rel);
                if let Some(parent) = dst.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::copy(path, dst)?;
            }
        }
        Source::Archive(bytes) => extract_zip(bytes, staging)?,
    }
    let root = package_root(staging)?;
    fs::rename(root, entry)?;
    Ok(())
}

fn extract_zip(bytes: &[u8], dest: &Path) -> Result<(), PackageError> {
    let invalid = |e: zip::result::ZipError| PackageError::InvalidArchive(e.to_string());
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(invalid)?;
    for i in 0..archive.len() {
        let mut file = archive.by_index(i).map_err(invalid)?;
        let rel = file
            .enclosed_name()
            .ok_or_else(|| PackageError::InvalidArchive(format!("unsafe entry name {}", file.name())))?;
        let out = dest.join(rel);
        if file.is_dir() {
            fs::create_dir_all(&out)?;
            continue;
        }
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut contents = Vec::new();
        file.read_to_end(&mut contents)
            .map_err(|e| PackageError::InvalidArchive(e.to_string()))?;
        fs::write(out, contents)?;
    }
    Ok(())
}

// The archive may hold the package at its root or inside a single top-level directory.
fn package_root(staging: &Path) -> Result<PathBuf, PackageError> {
    if staging.join(MANIFEST_FILE).is_file() {
        return Ok(staging.to_path_buf());
    }
    let dirs: Vec<PathBuf> = fs::read_dir(staging)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    match dirs.as_slice() {
        [only] if only.join(MANIFEST_FILE).is_file() => Ok(only.clone()),
        _ => Err(PackageError::InvalidArchive(format!(
            "no {MANIFEST_FILE} at the archive root"
        ))),
    }
}
