#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &to);
        } else {
            fs::copy(entry.path(), to).unwrap();
        }
    }
}

pub struct StepResult {
    pub name: &'static str,
    pub code: i32,
    pub expected_code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// The end-to-end pipeline: name, arguments, expected exit code.
pub const PIPELINE: &[(&str, &[&str], i32)] = &[
    (
        "package",
        &[
            "package",
            "--manifest",
            "fixtures/centroid_src/manifest.json",
            "--payload-dir",
            "fixtures/centroid_src/payload",
            "--out",
            "model",
        ],
        0,
    ),
    ("validate", &["validate", "model"], 0),
    (
        "infer",
        &["infer", "--model", "model", "--learner", "centroid", "--input", "fixtures/probe.pgm"],
        0,
    ),
    (
        "infer_bright",
        &["infer", "--model", "model", "--learner", "centroid", "--input", "fixtures/probe_bright.pgm"],
        0,
    ),
    (
        "bench",
        &[
            "bench", "--model", "model", "--learner", "centroid", "--input", "fixtures/probe.pgm", "--json",
            "bench.json",
        ],
        0,
    ),
    (
        "bench_unattainable",
        &[
            "bench", "--model", "model", "--learner", "centroid", "--input", "fixtures/probe.pgm", "--min-fps",
            "1e9", "--json", "bench_fail.json",
        ],
        3,
    ),
    (
        "sim",
        &["sim", "--seed", "7", "--steps", "200", "--noise", "0", "--trace", "trace.jsonl"],
        0,
    ),
    (
        "dataset_pets",
        &["dataset", "inspect", "--path", "fixtures/pets", "--type", "image_folder"],
        0,
    ),
    (
        "dataset_coco",
        &["dataset", "inspect", "--path", "fixtures/coco/annotations.json", "--type", "coco_subset"],
        0,
    ),
    (
        "fit",
        &[
            "fit", "--learner", "centroid", "--dataset", "fixtures/pets", "--type", "image_folder", "--out",
            "fitted",
        ],
        0,
    ),
];

/// Runs the `odr` binary for every pipeline step inside `workdir`, which gets
/// a copy of the fixtures.
pub fn run_pipeline(workdir: &Path) -> Vec<StepResult> {
    copy_dir(&fixtures(), &workdir.join("fixtures"));
    PIPELINE
        .iter()
        .map(|(name, args, expected_code)| {
            let out = Command::new(env!("CARGO_BIN_EXE_odr"))
                .args(*args)
                .current_dir(workdir)
                .output()
                .unwrap();
            StepResult {
                name,
                code: out.status.code().unwrap_or(-1),
                expected_code: *expected_code,
                stdout: String::from_utf8(out.stdout).unwrap(),
                stderr: String::from_utf8(out.stderr).unwrap(),
            }
        })
        .collect()
}

/// Compares each step's exit code and stdout against its golden file.
/// Set `ODR_UPDATE_GOLDEN=1` to rewrite the golden files instead.
pub fn check_goldens(results: &[StepResult]) -> Result<(), String> {
    let update = std::env::var_os("ODR_UPDATE_GOLDEN").is_some();
    let mut problems = Vec::new();
    for r in results {
        if r.code != r.expected_code {
            problems.push(format!(
                "{}: exit {} (expected {}); stderr: {}",
                r.name, r.code, r.expected_code, r.stderr
            ));
        }
        let path = golden_dir().join(format!("{}.stdout", r.name));
        if update {
            fs::write(&path, &r.stdout).unwrap();
            continue;
        }
        match fs::read_to_string(&path) {
            Ok(want) if want == r.stdout => {}
            Ok(want) => problems.push(format!("{}: stdout differs\n--- golden\n{want}--- actual\n{}", r.name, r.stdout)),
            Err(e) => problems.push(format!("{}: {}: {e}", r.name, path.display())),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("\n"))
    }
}
