use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use super::GrayscaleImage;
use crate::error::{Error, Result};
use crate::scalar::Real;

// ITU-R BT.601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Reads a PNG or binary PGM file. Colour inputs are converted by luminance;
/// non-square inputs are centre-cropped to the largest square.
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<GrayscaleImage<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image<T: Real>(bytes: &[u8]) -> Result<GrayscaleImage<T>> {
    let dynamic = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    from_dynamic(&dynamic)
}

fn from_dynamic<T: Real>(img: &DynamicImage) -> Result<GrayscaleImage<T>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&b| b as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .pixels()
            .map(|p| luma(p.0.map(|c| c as f64 / 65535.0)))
            .collect(),
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0.map(|c| c as f64 / 255.0)))
            .collect(),
    };
    let side = w.min(h);
    if w != h {
        log::warn!("image is {w}x{h}; centre-cropping to {side}x{side}");
    }
    let (top, left) = ((h - side) / 2, (w - side) / 2);
    let mut pixels = Vec::with_capacity(side * side);
    for i in 0..side {
        let start = (top + i) * w + left;
        pixels.extend(values[start..start + side].iter().map(|&v| T::of(v.clamp(0.0, 1.0))));
    }
    GrayscaleImage::new(side, pixels)
}

fn luma(rgb: [f64; 3]) -> f64 {
    LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]
}

fn to_gray8<T: Real>(img: &GrayscaleImage<T>) -> GrayImage {
    let n = img.n() as u32;
    let raw = img
        .pixels()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::from_raw(n, n, raw).expect("buffer matches dimensions")
}

/// Encodes as 8-bit grayscale PNG with `byte = round(255 · value)`.
pub fn encode_png<T: Real>(img: &GrayscaleImage<T>) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_gray8(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn save_png<T: Real>(img: &GrayscaleImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
