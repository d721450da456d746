//! A reusable lifecycle check that any [`Learner`] implementation can run.
//!
//! The suite verifies, in order:
//! - a fresh trainable learner refuses `infer`, `eval` and `save`;
//! - `fit` and `eval` return statistics that pass [`stats_validate`];
//! - `save` then `load` into a fresh instance reproduces byte-identical
//!   wire-format outputs on every probe;
//! - `optimize` stays within the learner's declared tolerance, is
//!   idempotent and survives another save/load;
//! - after `reset`, a probe sequence yields exactly what a freshly loaded
//!   learner yields.
//!
//! Every probe pass starts with `reset()`, so stateful learners see the same
//! history on both sides of each comparison.

use std::path::Path;
use std::sync::Arc;

use serde_json::Value;

use super::{stats_validate, Learner, LearnerError, LearnerState};
use crate::datasets::DatasetIterator;
use crate::engine::{target_to_wire, Data};

pub struct ConformanceFixture {
    /// Training data; `None` for learners that are usable on construction.
    pub train: Option<Arc<dyn DatasetIterator>>,
    pub probes: Vec<Data>,
}

/// Counts of what was compared, for reporting.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ConformanceReport {
    pub probes: usize,
    pub save_load_checked: usize,
    pub optimize_checked: usize,
    pub reset_checked: usize,
}

fn fail(step: &str, detail: impl std::fmt::Display) -> String {
    format!("{step}: {detail}")
}

fn probe_pass(learner: &mut dyn Learner, probes: &[Data]) -> Result<Vec<String>, String> {
    learner.reset();
    probes
        .iter()
        .map(|p| {
            let targets = learner.infer(p).map_err(|e| fail("infer", e))?;
            let wire: Vec<String> = targets.iter().map(target_to_wire).collect();
            Ok(format!("[{}]", wire.join(",")))
        })
        .collect()
}

fn numbers_close(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            x == y || (x - y).abs() <= tol * x.abs().max(y.abs())
        }
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| numbers_close(p, q, tol))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| numbers_close(v, w, tol)))
        }
        _ => a == b,
    }
}

fn compare(step: &str, a: &[String], b: &[String], tol: f64) -> Result<(), String> {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let same = if tol == 0.0 {
            x == y
        } else {
            let vx: Value = serde_json::from_str(x).map_err(|e| fail(step, e))?;
            let vy: Value = serde_json::from_str(y).map_err(|e| fail(step, e))?;
            numbers_close(&vx, &vy, tol)
        };
        if !same {
            return Err(fail(step, format!("probe {i} differs: {x} vs {y}")));
        }
    }
    if a.len() != b.len() {
        return Err(fail(step, "probe counts differ"));
    }
    Ok(())
}

/// Runs the full lifecycle suite; `work_dir` must be an empty, writable directory.
pub fn check_lifecycle(
    make: &dyn Fn() -> Box<dyn Learner>,
    fixture: &ConformanceFixture,
    work_dir: &Path,
) -> Result<ConformanceReport, String> {
    let probes = &fixture.probes;
    if probes.is_empty() {
        return Err("fixture has no probes".into());
    }
    let mut report = ConformanceReport {
        probes: probes.len(),
        ..Default::default()
    };

    let mut fresh = make();
    fresh.reset();
    let mut primary = make();
    match &fixture.train {
        Some(train) => {
            if fresh.state() != LearnerState::Untrained {
                return Err(fail("construct", "trainable learner is not Untrained"));
            }
            if !matches!(fresh.infer(&probes[0]), Err(LearnerError::NotTrained(_))) {
                return Err(fail("untrained", "infer did not fail with NotTrained"));
            }
            if !matches!(fresh.eval(train.as_ref()), Err(LearnerError::NotTrained(_))) {
                return Err(fail("untrained", "eval did not fail with NotTrained"));
            }
            if !matches!(
                fresh.save(&work_dir.join("untrained")),
                Err(LearnerError::NotTrained(_))
            ) {
                return Err(fail("untrained", "save did not fail with NotTrained"));
            }
            let stats = primary.fit(train.as_ref()).map_err(|e| fail("fit", e))?;
            stats_validate(&stats).map_err(|e| fail("fit stats", e))?;
            if primary.state() != LearnerState::Trained {
                return Err(fail("fit", "state is not Trained"));
            }
            let stats = primary.eval(train.as_ref()).map_err(|e| fail("eval", e))?;
            stats_validate(&stats).map_err(|e| fail("eval stats", e))?;
        }
        None => {
            if primary.state() == LearnerState::Untrained {
                return Err(fail("construct", "learner without training data is Untrained"));
            }
        }
    }

    let before_save = probe_pass(primary.as_mut(), probes)?;
    let saved = work_dir.join("saved");
    primary.save(&saved).map_err(|e| fail("save", e))?;
    let mut loaded = make();
    loaded.load(&saved).map_err(|e| fail("load", e))?;
    let after_load = probe_pass(loaded.as_mut(), probes)?;
    compare("save/load", &before_save, &after_load, 0.0)?;
    report.save_load_checked = probes.len();

    let mut optimized = make();
    optimized.load(&saved).map_err(|e| fail("load", e))?;
    optimized.optimize().map_err(|e| fail("optimize", e))?;
    if optimized.state() != LearnerState::Optimized {
        return Err(fail("optimize", "state is not Optimized"));
    }
    let tol = optimized.optimize_tolerance();
    let opt_out = probe_pass(optimized.as_mut(), probes)?;
    compare("optimize", &after_load, &opt_out, tol)?;
    optimized.optimize().map_err(|e| fail("optimize twice", e))?;
    let opt_again = probe_pass(optimized.as_mut(), probes)?;
    compare("optimize idempotence", &opt_out, &opt_again, 0.0)?;
    let saved_opt = work_dir.join("saved_optimized");
    optimized.save(&saved_opt).map_err(|e| fail("save optimized", e))?;
    let mut reloaded = make();
    reloaded.load(&saved_opt).map_err(|e| fail("load optimized", e))?;
    if reloaded.state() != LearnerState::Optimized {
        return Err(fail("load optimized", "state is not Optimized"));
    }
    compare(
        "optimized save/load",
        &opt_out,
        &probe_pass(reloaded.as_mut(), probes)?,
        0.0,
    )?;
    report.optimize_checked = probes.len();

    // Drive the primary learner through history without resetting, then
    // reset and compare against a freshly loaded instance.
    for p in probes.iter().rev() {
        primary.infer(p).map_err(|e| fail("infer", e))?;
    }
    primary.reset();
    let mut outputs = Vec::with_capacity(probes.len());
    for p in probes {
        let targets = primary.infer(p).map_err(|e| fail("infer after reset", e))?;
        let wire: Vec<String> = targets.iter().map(target_to_wire).collect();
        outputs.push(format!("[{}]", wire.join(",")));
    }
    let mut fresh_loaded = make();
    fresh_loaded.load(&saved).map_err(|e| fail("load", e))?;
    compare("reset", &outputs, &probe_pass(fresh_loaded.as_mut(), probes)?, 0.0)?;
    report.reset_checked = probes.len();

    Ok(report)
}

/// Seeded fixtures for the built-in learners.
pub mod fixtures {
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::ConformanceFixture;
    use crate::datasets::InMemoryDataset;
    use crate::engine::{Category, Data, Target, Vector};

    fn vector(v: Vec<f64>) -> Data {
        Data::Vector(Vector::new(v).expect("finite"))
    }

    /// Three well-separated classes in four dimensions, plus `n_probes` probes.
    pub fn centroid(seed: u64, n_probes: usize) -> ConformanceFixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = InMemoryDataset::default();
        for class in 0..3u32 {
            for _ in 0..10 {
                let x = (0..4)
                    .map(|d| f64::from(class) * 2.0 + if d == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.5..0.5))
                    .collect();
                train.push(vector(x), Target::from(Category::new(class).with_description(format!("c{class}"))));
            }
        }
        let probes = (0..n_probes)
            .map(|_| vector((0..4).map(|_| rng.gen_range(-1.0..6.0)).collect()))
            .collect();
        ConformanceFixture {
            train: Some(Arc::new(train)),
            probes,
        }
    }

    /// A two-channel random walk with occasional spikes.
    pub fn ewma(seed: u64, n_probes: usize) -> ConformanceFixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut walk = |n: usize| -> Vec<(Vec<f64>, bool)> {
            let mut pos = [0.0f64; 2];
            (0..n)
                .map(|_| {
                    for p in &mut pos {
                        *p += rng.gen_range(-0.3..0.3);
                    }
                    let spike = rng.gen_bool(0.1);
                    let bump = if spike { 5.0 } else { 0.0 };
                    (vec![pos[0] + bump, pos[1]], spike)
                })
                .collect()
        };
        let mut train = InMemoryDataset::default();
        for (x, spike) in walk(60) {
            train.push(vector(x), Target::from(Category::new(u32::from(spike))));
        }
        let probes = walk(n_probes).into_iter().map(|(x, _)| vector(x)).collect();
        ConformanceFixture {
            train: Some(Arc::new(train)),
            probes,
        }
    }

    /// Observation vectors `[theta, phi, intensity]` for the bearing learner.
    pub fn active_bearing(seed: u64, n_probes: usize) -> ConformanceFixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probes = (0..n_probes)
            .map(|_| {
                vector(vec![
                    rng.gen_range(-PI..PI),
                    rng.gen_range(-FRAC_PI_2..=FRAC_PI_2),
                    rng.gen_range(0.0..1.0),
                ])
            })
            .collect();
        ConformanceFixture { train: None, probes }
    }
}
