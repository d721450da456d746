//! Canonical image representation and the eight external pixel formats.
//!
//! Every [`Image`] is stored channels-first, RGB ordered, 8 bits per sample.
//! External buffers in any combination of layout, channel order and sample
//! type are converted into that form on construction and back out through
//! [`Image::convert`].

use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Planar: all samples of channel 0, then channel 1, ...
    Chw,
    /// Interleaved: the channels of one pixel are adjacent.
    Hwc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    Rgb,
    Bgr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    /// Samples in `[0, 1]`.
    F32,
}

/// One of the 2 x 2 x 2 ways an external buffer may encode an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageFormat {
    pub layout: Layout,
    pub channel_order: ChannelOrder,
    pub dtype: DType,
}

impl ImageFormat {
    /// The in-memory form of [`Image`].
    pub const CANONICAL: ImageFormat = ImageFormat {
        layout: Layout::Chw,
        channel_order: ChannelOrder::Rgb,
        dtype: DType::U8,
    };

    pub const fn new(layout: Layout, channel_order: ChannelOrder, dtype: DType) -> Self {
        Self {
            layout,
            channel_order,
            dtype,
        }
    }

    /// All eight formats, in a fixed order.
    pub fn all() -> [ImageFormat; 8] {
        let mut out = [Self::CANONICAL; 8];
        let mut i = 0;
        for layout in [Layout::Chw, Layout::Hwc] {
            for order in [ChannelOrder::Rgb, ChannelOrder::Bgr] {
                for dtype in [DType::U8, DType::F32] {
                    out[i] = Self::new(layout, order, dtype);
                    i += 1;
                }
            }
        }
        out
    }
}

/// An external pixel buffer. The variant must agree with the format's dtype.
#[derive(Debug, Clone, PartialEq)]
pub enum PixelBuffer {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl PixelBuffer {
    pub fn len(&self) -> usize {
        match self {
            PixelBuffer::U8(v) => v.len(),
            PixelBuffer::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            PixelBuffer::U8(_) => DType::U8,
            PixelBuffer::F32(_) => DType::F32,
        }
    }
}

/// Quantizes a `[0, 1]` sample to 8 bits, rounding half away from zero.
pub fn f32_to_u8(v: f32) -> Result<u8, EngineError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(EngineError::ValueOutOfRange(v as f64));
    }
    Ok((v as f64 * 255.0).round() as u8)
}

pub fn u8_to_f32(v: u8) -> f32 {
    v as f32 / 255.0
}

/// A multi-channel image in canonical CHW / RGB / U8 form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    /// Wraps a buffer that is already in canonical form.
    pub fn from_canonical(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, EngineError> {
        check_channels(channels)?;
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(EngineError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A black image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self, EngineError> {
        Self::from_canonical(width, height, channels, vec![0; channels * height * width])
    }

    /// Builds a canonical image from a buffer encoded in `fmt`.
    ///
    /// Float samples must lie in `[0, 1]`; they are never clamped. For
    /// single-channel images the channel order is irrelevant and ignored.
    pub fn from_buffer(
        buffer: &PixelBuffer,
        fmt: ImageFormat,
        width: usize,
        height: usize,
        channels: usize,
    ) -> Result<Self, EngineError> {
        check_channels(channels)?;
        if buffer.dtype() != fmt.dtype {
            return Err(EngineError::DTypeMismatch);
        }
        let expected = channels * height * width;
        if buffer.len() != expected {
            return Err(EngineError::LengthMismatch {
                expected,
                actual: buffer.len(),
            });
        }
        let samples: Vec<u8> = match buffer {
            PixelBuffer::U8(v) => v.clone(),
            PixelBuffer::F32(v) => v
                .iter()
                .map(|&s| f32_to_u8(s))
                .collect::<Result<_, _>>()?,
        };

        let plane = width * height;
        let mut data = vec![0u8; expected];
        for c in 0..channels {
            let src_c = source_channel(c, channels, fmt.channel_order);
            for p in 0..plane {
                let src = match fmt.layout {
                    Layout::Chw => src_c * plane + p,
                    Layout::Hwc => p * channels + src_c,
                };
                data[c * plane + p] = samples[src];
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Encodes the image into `fmt`. Inverse of [`Image::from_buffer`].
    pub fn convert(&self, fmt: ImageFormat) -> PixelBuffer {
        let plane = self.width * self.height;
        let channels = self.channels;
        let mut out = vec![0u8; self.data.len()];
        for c in 0..channels {
            let dst_c = source_channel(c, channels, fmt.channel_order);
            for p in 0..plane {
                let dst = match fmt.layout {
                    Layout::Chw => dst_c * plane + p,
                    Layout::Hwc => p * channels + dst_c,
                };
                out[dst] = self.data[c * plane + p];
            }
        }
        match fmt.dtype {
            DType::U8 => PixelBuffer::U8(out),
            DType::F32 => PixelBuffer::F32(out.into_iter().map(u8_to_f32).collect()),
        }
    }

    /// HWC / BGR / U8, the layout OpenCV works with.
    pub fn opencv(&self) -> Vec<u8> {
        match self.convert(ImageFormat::new(Layout::Hwc, ChannelOrder::Bgr, DType::U8)) {
            PixelBuffer::U8(v) => v,
            PixelBuffer::F32(_) => unreachable!("requested u8"),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Canonical CHW buffer.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[c * self.width * self.height + y * self.width + x]
    }

    pub(crate) fn set_sample(&mut self, x: usize, y: usize, c: usize, v: u8) {
        let plane = self.width * self.height;
        self.data[c * plane + y * self.width + x] = v;
    }

    /// Samples scaled to `[0, 1]`, in canonical order.
    pub fn to_unit_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64 / 255.0).collect()
    }
}

fn check_channels(channels: usize) -> Result<(), EngineError> {
    if channels == 1 || channels == 3 {
        Ok(())
    } else {
        Err(EngineError::BadChannels(channels))
    }
}

// Index of canonical channel `c` inside a buffer with the given order.
fn source_channel(c: usize, channels: usize, order: ChannelOrder) -> usize {
    match (channels, order) {
        (3, ChannelOrder::Bgr) => 2 - c,
        _ => c,
    }
}
