use std::fs::File;
use std::os::unix::fs::FileExt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

/// Sampling period of the resident-set poller (200 Hz).
pub const RSS_PERIOD: Duration = Duration::from_millis(5);

/// Reads the resident set size from an open `/proc/self/statm`.
///
/// Uses a stack buffer so the polling loop never allocates.
fn read_rss(statm: &File, page: u64) -> Option<u64> {
    let mut buf = [0u8; 128];
    let n = statm.read_at(&mut buf, 0).ok()?;
    let mut fields = buf[..n].split(|b| *b == b' ');
    fields.next()?;
    let resident = fields.next()?;
    let mut pages = 0u64;
    for &d in resident {
        if !d.is_ascii_digit() {
            return None;
        }
        pages = pages.checked_mul(10)?.checked_add(u64::from(d - b'0'))?;
    }
    Some(pages * page)
}

fn page_size() -> u64 {
    // SAFETY: sysconf has no preconditions.
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as u64
    } else {
        4096
    }
}

/// Background poller recording the maximum resident set size.
pub struct RssSampler {
    stop: Arc<AtomicBool>,
    peak: Arc<AtomicU64>,
    handle: Option<JoinHandle<()>>,
}

impl RssSampler {
    /// Starts polling; `None` when the resident set size cannot be read.
    pub fn start() -> Option<RssSampler> {
        let statm = File::open("/proc/self/statm").ok()?;
        let page = page_size();
        let first = read_rss(&statm, page)?;
        let stop = Arc::new(AtomicBool::new(false));
        let peak = Arc::new(AtomicU64::new(first));
        let handle = {
            let (stop, peak) = (stop.clone(), peak.clone());
            std::thread::Builder::new()
                .name("rss-sampler".into())
                .spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        if let Some(rss) = read_rss(&statm, page) {
                            peak.fetch_max(rss, Ordering::Relaxed);
                        }
                        std::thread::sleep(RSS_PERIOD);
                    }
                    if let Some(rss) = read_rss(&statm, page) {
                        peak.fetch_max(rss, Ordering::Relaxed);
                    }
                })
                .ok()?
        };
        Some(RssSampler {
            stop,
            peak,
            handle: Some(handle),
        })
    }

    /// Stops the poller and returns the peak it saw.
    pub fn finish(mut self) -> u64 {
        self.halt();
        self.peak.load(Ordering::Relaxed)
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RssSampler {
    fn drop(&mut self) {
        self.halt();
    }
}
