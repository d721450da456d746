//! Box overlays for quick visual inspection of detector output.

use super::{BoundingBox, EngineError, Image};

/// Per-class border colors, indexed by `category.index % 8`.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 0, 0],
    [0, 255, 0],
    [0, 0, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
    [255, 128, 0],
    [255, 255, 255],
];

/// Returns a copy of `img` with a 1-pixel border painted around each box.
///
/// A box covers the pixel corners `(x, y)` through `(x + w, y + h)` inclusive,
/// rounded to the nearest pixel; edges falling outside the image are skipped.
/// Grayscale images receive the palette color's integer luma.
pub fn draw_bounding_boxes(
    img: &Image,
    boxes: &[BoundingBox],
    class_names: &[String],
) -> Result<Image, EngineError> {
    if let Some(b) = boxes
        .iter()
        .find(|b| b.category.index as usize >= class_names.len())
    {
        return Err(EngineError::IndexOutOfRange {
            index: b.category.index,
            count: class_names.len(),
        });
    }
    let mut out = img.clone();
    let (w, h) = (img.width() as i64, img.height() as i64);
    for b in boxes {
        let color = PALETTE[b.category.index as usize % PALETTE.len()];
        let x0 = b.x.round() as i64;
        let y0 = b.y.round() as i64;
        let x1 = (b.x + b.w).round() as i64;
        let y1 = (b.y + b.h).round() as i64;
        let mut paint = |x: i64, y: i64| {
            if (0..w).contains(&x) && (0..h).contains(&y) {
                put(&mut out, x as usize, y as usize, color);
            }
        };
        for x in x0..=x1 {
            paint(x, y0);
            paint(x, y1);
        }
        for y in y0..=y1 {
            paint(x0, y);
            paint(x1, y);
        }
    }
    Ok(out)
}

fn put(img: &mut Image, x: usize, y: usize, color: [u8; 3]) {
    if img.channels() == 3 {
        for (c, v) in color.into_iter().enumerate() {
            img.set_sample(x, y, c, v);
        }
    } else {
        let [r, g, b] = color.map(u32::from);
        img.set_sample(x, y, 0, ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8);
    }
}
