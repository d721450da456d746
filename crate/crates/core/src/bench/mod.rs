//! Latency, throughput and memory measurement against real-time budgets.

mod alloc;
mod rss;

pub use alloc::CountingAlloc;
pub use rss::{RssSampler, RSS_PERIOD};

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// `iteration` counts from 0 and includes warmup iterations.
    #[error("InferFailed: iteration {iteration}: {reason}")]
    InferFailed { iteration: usize, reason: String },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

/// Whether a memory budget violation should fail the run or only warn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    Strict,
    Warn,
}

impl std::str::FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(Severity::Strict),
            "warn" => Ok(Severity::Warn),
            other => Err(format!("unknown severity {other:?}; expected strict or warn")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub warmup_iters: usize,
    pub measure_iters: usize,
    pub min_fps: f64,
    pub max_mem_bytes: u64,
    pub mem_severity: Severity,
}

/// 25 frames per second and 1 GiB of memory.
impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup_iters: 10,
            measure_iters: 100,
            min_fps: 25.0,
            max_mem_bytes: 1 << 30,
            mem_severity: Severity::Strict,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.measure_iters == 0 {
            return Err(BenchError::InvalidConfig("measure_iters must be at least 1".into()));
        }
        if !(self.min_fps.is_finite() && self.min_fps > 0.0) {
            return Err(BenchError::InvalidConfig(format!(
                "min_fps must be positive, got {}",
                self.min_fps
            )));
        }
        if self.max_mem_bytes == 0 {
            return Err(BenchError::InvalidConfig("max_mem_bytes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemMethod {
    AllocatorInstrumented,
    RssSampled,
    Unavailable,
}

impl MemMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MemMethod::AllocatorInstrumented => "allocator_instrumented",
            MemMethod::RssSampled => "rss_sampled",
            MemMethod::Unavailable => "unavailable",
        }
    }
}

/// Summary statistics over a latency list, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub min: u64,
    pub mean: u64,
    pub median: u64,
    pub p95: u64,
}

/// Recomputes the summary from raw latencies; the input order does not matter.
///
/// The median of an even-length list is the mean of the two middle values,
/// rounded down. p95 is the nearest-rank value: the `ceil(0.95 n)`-th smallest.
pub fn latency_stats(latencies: &[u64]) -> Option<LatencyStats> {
    if latencies.is_empty() {
        return None;
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let total: u128 = sorted.iter().map(|&x| u128::from(x)).sum();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        ((u128::from(sorted[n / 2 - 1]) + u128::from(sorted[n / 2])) / 2) as u64
    };
    let rank = (95 * n).div_ceil(100);
    Some(LatencyStats {
        min: sorted[0],
        mean: (total / n as u128) as u64,
        median,
        p95: sorted[rank.max(1) - 1],
    })
}

/// Results of one benchmark run. Durations are nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub latencies: Vec<u64>,
    pub mean_latency: u64,
    pub median_latency: u64,
    pub p95_latency: u64,
    /// Measured iterations divided by the measured wall time.
    pub fps: f64,
    /// `None` when no memory measurement was possible.
    pub peak_mem_bytes: Option<u64>,
    pub mem_method: MemMethod,
    pub pass_fps: bool,
    pub pass_mem: bool,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn duration_ns(d: Duration) -> u64 {
    u64::try_from(d.as_nanos()).unwrap_or(u64::MAX)
}

enum MemProbe {
    Alloc,
    Rss(RssSampler),
    None,
}

impl MemProbe {
    fn start() -> MemProbe {
        if CountingAlloc::is_installed() {
            CountingAlloc::reset_peak();
            MemProbe::Alloc
        } else {
            RssSampler::start().map_or(MemProbe::None, MemProbe::Rss)
        }
    }

    fn finish(self) -> (Option<u64>, MemMethod) {
        match self {
            MemProbe::Alloc => (Some(CountingAlloc::peak() as u64), MemMethod::AllocatorInstrumented),
            MemProbe::Rss(s) => (Some(s.finish()), MemMethod::RssSampled),
            MemProbe::None => (None, MemMethod::Unavailable),
        }
    }
}

/// Pins the calling thread to the CPU it is running on, restoring the
/// previous affinity on drop. Best effort: failures leave scheduling alone.
struct PinGuard {
    #[cfg(target_os = "linux")]
    saved: Option<libc::cpu_set_t>,
}

impl PinGuard {
    #[cfg(target_os = "linux")]
    fn pin() -> PinGuard {
        // SAFETY: cpu_set_t is plain data; the calls only read/write the sets
        // passed by pointer with their correct size, for the calling thread (pid 0).
        unsafe {
            let size = std::mem::size_of::<libc::cpu_set_t>();
            let mut saved: libc::cpu_set_t = std::mem::zeroed();
            if libc::sched_getaffinity(0, size, &mut saved) != 0 {
                return PinGuard { saved: None };
            }
            let cpu = libc::sched_getcpu();
            if cpu < 0 {
                return PinGuard { saved: None };
            }
            let mut one: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(cpu as usize, &mut one);
            if libc::sched_setaffinity(0, size, &one) != 0 {
                return PinGuard { saved: None };
            }
            PinGuard { saved: Some(saved) }
        }
    }

    #[cfg(not(target_os = "linux"))]
    fn pin() -> PinGuard {
        PinGuard {}
    }
}

impl Drop for PinGuard {
    fn drop(&mut self) {
        #[cfg(target_os = "linux")]
        if let Some(saved) = &self.saved {
            // SAFETY: restores a mask previously returned by sched_getaffinity.
            unsafe {
                libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), saved);
            }
        }
    }
}

/// Times `infer_fn` for `cfg.warmup_iters` unrecorded and then
/// `cfg.measure_iters` recorded iterations on the calling thread.
///
/// The first error aborts the run with its 0-based iteration index, counting
/// warmup iterations.
pub fn bench_run<T, E, F>(mut infer_fn: F, cfg: &BenchConfig) -> Result<BenchReport, BenchError>
where
    F: FnMut() -> Result<T, E>,
    E: fmt::Display,
{
    cfg.validate()?;
    let _pin = PinGuard::pin();
    let fail = |iteration: usize, e: E| BenchError::InferFailed {
        iteration,
        reason: e.to_string(),
    };
    for i in 0..cfg.warmup_iters {
        std::hint::black_box(infer_fn().map_err(|e| fail(i, e))?);
    }

    let mut latencies = Vec::with_capacity(cfg.measure_iters);
    let probe = MemProbe::start();
    let start = Instant::now();
    let mut last = start;
    for i in 0..cfg.measure_iters {
        let out = infer_fn();
        let now = Instant::now();
        let out = out.map_err(|e| fail(cfg.warmup_iters + i, e))?;
        std::hint::black_box(out);
        latencies.push(duration_ns(now - last));
        last = now;
    }
    let total = last - start;
    let (peak_mem_bytes, mem_method) = probe.finish();

    let stats = latency_stats(&latencies).expect("measure_iters >= 1");
    let fps = cfg.measure_iters as f64 / total.as_secs_f64().max(1e-9);
    Ok(BenchReport {
        mean_latency: stats.mean,
        median_latency: stats.median,
        p95_latency: stats.p95,
        latencies,
        fps,
        peak_mem_bytes,
        mem_method,
        pass_fps: fps >= cfg.min_fps,
        pass_mem: peak_mem_bytes.is_none_or(|m| m <= cfg.max_mem_bytes),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// `"fps"` or `"mem"`.
    pub metric: &'static str,
    pub measured: f64,
    pub budget: f64,
    pub severity: Severity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.metric {
            "fps" => write!(f, "fps: measured {:.3}, budget at least {:.3}", self.measured, self.budget),
            _ => write!(
                f,
                "mem: measured {} bytes, budget at most {} bytes",
                self.measured, self.budget
            ),
        }
    }
}

/// Lists the budgets `report` misses; empty means the run passed.
///
/// An unmeasured memory peak is not a violation; `mem_method` records it.
pub fn budget_check(report: &BenchReport, cfg: &BenchConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if report.fps < cfg.min_fps {
        out.push(Violation {
            metric: "fps",
            measured: report.fps,
            budget: cfg.min_fps,
            severity: Severity::Strict,
        });
    }
    if let Some(mem) = report.peak_mem_bytes {
        if mem > cfg.max_mem_bytes {
            out.push(Violation {
                metric: "mem",
                measured: mem as f64,
                budget: cfg.max_mem_bytes as f64,
                severity: cfg.mem_severity,
            });
        }
    }
    out
}

/// True when any violation is strict.
pub fn has_blocking(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Strict)
}
