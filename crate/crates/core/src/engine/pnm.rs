//! Binary PPM (P6) / PGM (P5) reading and writing, maxval 255 only.

use std::fs;
use std::io;
use std::path::Path;

use super::{ChannelOrder, DType, EngineError, Image, ImageFormat, Layout, PixelBuffer};

/// Loads a P6 (RGB) or P5 (grayscale) file into a canonical image.
pub fn image_open(path: impl AsRef<Path>) -> Result<Image, EngineError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => EngineError::FileNotFound(path.to_path_buf()),
        _ => EngineError::Io(e),
    })?;
    decode(&bytes)
}

/// Writes P6 for three-channel images and P5 for grayscale.
pub fn image_save(img: &Image, path: impl AsRef<Path>) -> Result<(), EngineError> {
    fs::write(path, encode(img))?;
    Ok(())
}

pub(crate) fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    match img.convert(ImageFormat::new(Layout::Hwc, ChannelOrder::Rgb, DType::U8)) {
        PixelBuffer::U8(raster) => out.extend_from_slice(&raster),
        PixelBuffer::F32(_) => unreachable!("requested u8"),
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Image, EngineError> {
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => {
            return Err(EngineError::UnsupportedFormat(
                "only binary PPM (P6) and PGM (P5) are supported".into(),
            ))
        }
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = read_header_int(bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(EngineError::UnsupportedFormat(format!(
            "maxval {maxval} (only 255 is supported)"
        )));
    }
    if width == 0 || height == 0 {
        return Err(EngineError::CorruptHeader("zero image dimension".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(EngineError::CorruptHeader("missing raster separator".into())),
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| EngineError::CorruptHeader("dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| EngineError::CorruptHeader(format!("raster truncated: need {n} bytes")))?;

    let fmt = ImageFormat::new(Layout::Hwc, ChannelOrder::Rgb, DType::U8);
    Image::from_buffer(&PixelBuffer::U8(raster.to_vec()), fmt, width, height, channels)
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize, EngineError> {
    // skip whitespace and comments
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(EngineError::CorruptHeader("header truncated".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(EngineError::CorruptHeader(format!(
            "expected a number at byte {start}"
        )));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| EngineError::CorruptHeader("number too large".into()))
}
