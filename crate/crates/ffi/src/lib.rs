//! C-compatible load/infer surface for the centroid classifier.
//!
//! Every exported function returns an `OdrStatus` code and never unwinds
//! across the boundary. The caller owns all buffers; the library owns only
//! the state behind a handle.
//!
//! | status | code |
//! |---|---|
//! | `OK` | 0 |
//! | `NOT_FOUND` | 1 |
//! | `BAD_PACKAGE` | 2 |
//! | `BAD_INPUT` | 3 |
//! | `BAD_HANDLE` | 4 |
//! | `CAPACITY` | 5 |
//! | `INTERNAL` | 6 |
//!
//! Image descriptor codes: layout `0` = CHW, `1` = HWC; channel order
//! `0` = RGB, `1` = BGR; dtype `0` = u8, `1` = f32 (native endian, `[0, 1]`).

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use odr_core::engine::{ChannelOrder, DType, Data, Image, ImageFormat, Layout, PixelBuffer, Target};
use odr_core::learner::{Hyperparams, Learner};
use odr_core::learners::CentroidLearner;

pub type OdrStatus = i32;
pub type OdrHandle = u64;

pub const ODR_OK: OdrStatus = 0;
pub const ODR_NOT_FOUND: OdrStatus = 1;
pub const ODR_BAD_PACKAGE: OdrStatus = 2;
pub const ODR_BAD_INPUT: OdrStatus = 3;
pub const ODR_BAD_HANDLE: OdrStatus = 4;
pub const ODR_CAPACITY: OdrStatus = 5;
pub const ODR_INTERNAL: OdrStatus = 6;

pub const ODR_LAYOUT_CHW: u32 = 0;
pub const ODR_LAYOUT_HWC: u32 = 1;
pub const ODR_ORDER_RGB: u32 = 0;
pub const ODR_ORDER_BGR: u32 = 1;
pub const ODR_DTYPE_U8: u32 = 0;
pub const ODR_DTYPE_F32: u32 = 1;

/// Maximum number of simultaneously loaded models.
pub const ODR_MAX_HANDLES: usize = 1024;
pub const ODR_DESCRIPTION_LEN: usize = 64;

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OdrImageDesc {
    pub data: *const u8,
    /// Buffer length in bytes.
    pub len: u64,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub layout: u32,
    pub channel_order: u32,
    pub dtype: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OdrCategoryOut {
    pub index: u32,
    pub confidence: f64,
    /// Class name, truncated and always NUL-terminated.
    pub description: [c_char; ODR_DESCRIPTION_LEN],
}

impl Default for OdrCategoryOut {
    fn default() -> Self {
        Self {
            index: 0,
            confidence: 0.0,
            description: [0; ODR_DESCRIPTION_LEN],
        }
    }
}

type Slot = Arc<Mutex<CentroidLearner>>;

fn table() -> &'static RwLock<HashMap<OdrHandle, Slot>> {
    static TABLE: OnceLock<RwLock<HashMap<OdrHandle, Slot>>> = OnceLock::new();
    TABLE.get_or_init(Default::default)
}

// Handles are never reused: the counter only moves forward.
static NEXT_HANDLE: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(OdrStatus, String);

fn record(status: OdrStatus, message: String) -> OdrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
    status
}

/// Runs `body`, converting errors and panics into status codes.
fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> OdrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ODR_OK,
        Ok(Err(Failure(status, message))) => record(status, message),
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            record(ODR_INTERNAL, format!("internal error: {what}"))
        }
    }
}

fn bad_input(msg: impl Into<String>) -> Failure {
    Failure(ODR_BAD_INPUT, msg.into())
}

/// Loads a centroid model package from the UTF-8 path `path`.
///
/// On success writes a nonzero handle to `out_handle`; on failure leaves it
/// untouched.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_handle` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn odr_load_centroid(path: *const c_char, out_handle: *mut OdrHandle) -> OdrStatus {
    guarded(|| {
        if path.is_null() || out_handle.is_null() {
            return Err(bad_input("null argument to odr_load_centroid"));
        }
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| bad_input("path is not UTF-8"))?;
        let path = Path::new(path);
        if !path.exists() {
            return Err(Failure(ODR_NOT_FOUND, format!("NotFound: {}", path.display())));
        }
        let mut learner = CentroidLearner::new(&Hyperparams::new())
            .map_err(|e| Failure(ODR_INTERNAL, e.to_string()))?;
        learner
            .load(path)
            .map_err(|e| Failure(ODR_BAD_PACKAGE, format!("{}: {e}", path.display())))?;

        let mut map = table().write().unwrap_or_else(|e| e.into_inner());
        if map.len() >= ODR_MAX_HANDLES {
            return Err(Failure(
                ODR_CAPACITY,
                format!("Capacity: {ODR_MAX_HANDLES} models already loaded"),
            ));
        }
        let handle = NEXT_HANDLE.fetch_add(1, Ordering::Relaxed);
        map.insert(handle, Arc::new(Mutex::new(learner)));
        // SAFETY: checked non-null; the caller guarantees it is writable.
        unsafe { out_handle.write(handle) };
        Ok(())
    })
}

fn code<T: Copy>(value: u32, options: &[(u32, T)], what: &str) -> Result<T, Failure> {
    options
        .iter()
        .find(|(c, _)| *c == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| bad_input(format!("unknown {what} code {value}")))
}

/// Copies the described buffer into a canonical [`Image`].
///
/// # Safety
/// `desc.data` must be valid for `desc.len` bytes.
unsafe fn read_image(desc: &OdrImageDesc) -> Result<Image, Failure> {
    let layout = code(
        desc.layout,
        &[(ODR_LAYOUT_CHW, Layout::Chw), (ODR_LAYOUT_HWC, Layout::Hwc)],
        "layout",
    )?;
    let order = code(
        desc.channel_order,
        &[(ODR_ORDER_RGB, ChannelOrder::Rgb), (ODR_ORDER_BGR, ChannelOrder::Bgr)],
        "channel order",
    )?;
    let dtype = code(
        desc.dtype,
        &[(ODR_DTYPE_U8, DType::U8), (ODR_DTYPE_F32, DType::F32)],
        "dtype",
    )?;
    let (w, h, c) = (desc.width as usize, desc.height as usize, desc.channels as usize);
    let sample = match dtype {
        DType::U8 => 1,
        DType::F32 => 4,
    };
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(sample))
        .ok_or_else(|| bad_input("image dimensions overflow"))?;
    if desc.len != expected as u64 {
        return Err(bad_input(format!(
            "LengthMismatch: {w}x{h}x{c} {dtype:?} needs {expected} bytes, got {}",
            desc.len
        )));
    }
    if desc.data.is_null() {
        return Err(bad_input("null image data"));
    }
    // SAFETY: non-null and, per the contract, valid for `len` bytes.
    let bytes = unsafe { std::slice::from_raw_parts(desc.data, expected) };
    let buffer = match dtype {
        DType::U8 => PixelBuffer::U8(bytes.to_vec()),
        DType::F32 => PixelBuffer::F32(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_ne_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
    };
    Image::from_buffer(&buffer, ImageFormat::new(layout, order, dtype), w, h, c).map_err(|e| bad_input(e.to_string()))
}

fn slot(handle: OdrHandle) -> Result<Slot, Failure> {
    let map = table().read().unwrap_or_else(|e| e.into_inner());
    map.get(&handle)
        .cloned()
        .ok_or_else(|| Failure(ODR_BAD_HANDLE, format!("BadHandle: {handle}")))
}

/// Classifies one image with the model behind `handle`.
///
/// # Safety
/// `desc` must point to a valid descriptor whose buffer holds `len` bytes;
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn odr_infer_centroid(
    handle: OdrHandle,
    desc: *const OdrImageDesc,
    out: *mut OdrCategoryOut,
) -> OdrStatus {
    guarded(|| {
        let slot = slot(handle)?;
        if desc.is_null() || out.is_null() {
            return Err(bad_input("null argument to odr_infer_centroid"));
        }
        // SAFETY: checked non-null; validity is the caller's contract.
        let image = unsafe { read_image(&*desc)? };
        let targets = {
            let mut learner = slot.lock().unwrap_or_else(|e| e.into_inner());
            learner
                .infer(&Data::Image(image))
                .map_err(|e| bad_input(e.to_string()))?
        };
        let Some(Target::Category(cat)) = targets.into_iter().next() else {
            return Err(Failure(ODR_INTERNAL, "centroid produced no category".into()));
        };
        let mut result = OdrCategoryOut {
            index: cat.index,
            confidence: cat.confidence.unwrap_or(1.0),
            ..Default::default()
        };
        copy_c_string(cat.description.as_deref().unwrap_or(""), &mut result.description);
        // SAFETY: checked non-null; the caller guarantees it is writable.
        unsafe { out.write(result) };
        Ok(())
    })
}

/// Releases a model. A second free of the same handle returns `BAD_HANDLE`.
#[no_mangle]
pub extern "C" fn odr_free(handle: OdrHandle) -> OdrStatus {
    guarded(|| {
        let removed = table()
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&handle);
        match removed {
            Some(_) => Ok(()),
            None => Err(Failure(ODR_BAD_HANDLE, format!("BadHandle: {handle}"))),
        }
    })
}

/// Copies this thread's most recent error message into `buffer`, truncated
/// to `cap - 1` bytes and NUL-terminated. Empty when no error occurred yet.
///
/// # Safety
/// `buffer` must be valid for `cap` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn odr_last_error(buffer: *mut c_char, cap: usize) -> OdrStatus {
    if buffer.is_null() || cap == 0 {
        return ODR_BAD_INPUT;
    }
    let message = LAST_ERROR.with(|e| e.borrow().clone());
    // SAFETY: the caller guarantees `cap` writable bytes.
    let dst = unsafe { std::slice::from_raw_parts_mut(buffer, cap) };
    copy_c_string(&message, dst);
    ODR_OK
}

/// Writes `s` NUL-terminated into `dst`, cutting at a character boundary.
fn copy_c_string(s: &str, dst: &mut [c_char]) {
    let Some(room) = dst.len().checked_sub(1) else {
        return;
    };
    let mut end = s.len().min(room);
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    for (d, b) in dst.iter_mut().zip(&s.as_bytes()[..end]) {
        *d = *b as c_char;
    }
    dst[end] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(buf: &[c_char]) -> String {
        // SAFETY: copy_c_string always NUL-terminates.
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
    }

    #[test]
    fn c_string_truncation() {
        let mut buf = [1 as c_char; 4];
        copy_c_string("abcdef", &mut buf);
        assert_eq!(read(&buf), "abc");
        copy_c_string("é€", &mut buf);
        assert_eq!(read(&buf), "é");
        let mut one = [1 as c_char; 1];
        copy_c_string("abc", &mut one);
        assert_eq!(one[0], 0);
    }

    #[test]
    fn panics_become_internal() {
        assert_eq!(guarded(|| panic!("boom")), ODR_INTERNAL);
        let mut buf = [0 as c_char; 64];
        // SAFETY: buf has 64 bytes.
        unsafe { odr_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(read(&buf).contains("boom"));
    }
}
