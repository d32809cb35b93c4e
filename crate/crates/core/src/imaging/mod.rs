//! Density images: storage, file I/O, synthetic tilings and controlled
//! degradations.

mod io;
mod multigrid;
mod raster;
mod tiling;

pub use io::{decode_image, encode_png, load_image, save_png};
pub use multigrid::{pentagrid_vertices, MultigridVertex};
pub use tiling::{generate_tiling, TilingFamily, TilingSpec};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest accepted side length.
pub const MIN_SIDE: usize = 16;

/// Square grid of density values in `[0, 1]`, stored row-major.
///
/// Index `(i, j)` is (row from top, column from left).
#[derive(Clone, Debug, PartialEq)]
pub struct GrayscaleImage<T> {
    n: usize,
    pixels: Vec<T>,
}

impl<T: Real> GrayscaleImage<T> {
    pub fn new(n: usize, pixels: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyImage);
        }
        if n < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "side {n} is below the minimum of {MIN_SIDE}"
            )));
        }
        if pixels.len() != n * n {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {n}x{n} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels
            .iter()
            .position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {p} = {} outside [0, 1]",
                pixels[p]
            )));
        }
        Ok(Self { n, pixels })
    }

    pub fn filled(n: usize, value: T) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut pixels = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pixels.push(f(i, j));
            }
        }
        Self::new(n, pixels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.pixels[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.pixels[i * self.n + j]
    }

    pub fn mean(&self) -> T {
        let s = self.pixels.iter().fold(T::zero(), |a, &v| a + v);
        s / T::of_usize(self.pixels.len())
    }

    pub fn cast<U: Real>(&self) -> GrayscaleImage<U> {
        GrayscaleImage {
            n: self.n,
            pixels: self.pixels.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Pixelwise `wa·a + wb·b`. The result must stay inside `[0, 1]`.
    pub fn blend(&self, wa: T, other: &Self, wb: T) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::InvalidArgument("blend of different sizes".into()));
        }
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| wa * a + wb * b)
            .collect();
        Self::new(self.n, pixels)
    }

    /// Maximum absolute pixel difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Cyclic shift: output pixel `(i, j)` is input pixel
/// `((i − t_y) mod n, (j − t_x) mod n)`.
pub fn cyclic_shift<T: Real>(img: &GrayscaleImage<T>, t: [i64; 2]) -> GrayscaleImage<T> {
    let n = img.n as i64;
    let (tx, ty) = (t[0].rem_euclid(n), t[1].rem_euclid(n));
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for i in 0..n {
        let si = (i - ty).rem_euclid(n) as usize;
        for j in 0..n {
            let sj = (j - tx).rem_euclid(n) as usize;
            pixels.push(img.get(si, sj));
        }
    }
    GrayscaleImage { n: img.n, pixels }
}

/// Square sub-window of side `size` whose top-left pixel is `(top, left)`.
pub fn crop<T: Real>(
    img: &GrayscaleImage<T>,
    top: usize,
    left: usize,
    size: usize,
) -> Result<GrayscaleImage<T>> {
    if top + size > img.n || left + size > img.n {
        return Err(Error::InvalidArgument(format!(
            "crop {size} at ({top}, {left}) exceeds the {0}x{0} image",
            img.n
        )));
    }
    GrayscaleImage::from_fn(size, |i, j| img.get(top + i, left + j))
}

/// Replaces exactly `round(flip_fraction · n²)` distinct pixels by `1 − value`.
/// The choice of pixels depends only on `seed`.
pub fn degrade<T: Real>(
    img: &GrayscaleImage<T>,
    flip_fraction: f64,
    seed: u64,
) -> Result<GrayscaleImage<T>> {
    if !(0.0..=1.0).contains(&flip_fraction) {
        return Err(Error::InvalidArgument(format!(
            "flip fraction {flip_fraction} outside [0, 1]"
        )));
    }
    let total = img.pixels.len();
    let count = (flip_fraction * total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for idx in sample(&mut rng, total, count.min(total)).into_iter() {
        out.pixels[idx] = T::one() - out.pixels[idx];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> GrayscaleImage<f64> {
        GrayscaleImage::from_fn(n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0).unwrap()
    }

    #[test]
    fn rejects_small_and_out_of_range() {
        assert!(matches!(
            GrayscaleImage::<f64>::filled(0, 0.0),
            Err(Error::EmptyImage)
        ));
        assert!(GrayscaleImage::<f64>::filled(8, 0.0).is_err());
        assert!(GrayscaleImage::<f64>::filled(16, 1.5).is_err());
        assert!(GrayscaleImage::<f64>::filled(16, f64::NAN).is_err());
    }

    #[test]
    fn shift_by_zero_and_full_period_is_identity() {
        let img = ramp(20);
        assert_eq!(cyclic_shift(&img, [0, 0]), img);
        assert_eq!(cyclic_shift(&img, [20, 20]), img);
        assert_eq!(cyclic_shift(&img, [-20, 40]), img);
    }

    #[test]
    fn shift_moves_pixels() {
        let img = ramp(20);
        let s = cyclic_shift(&img, [3, 5]);
        assert_eq!(s.get(5, 3), img.get(0, 0));
        assert_eq!(s.get(0, 0), img.get(15, 17));
    }

    #[test]
    fn degrade_counts_and_restores() {
        let img = GrayscaleImage::from_fn(32, |i, j| ((i / 4 + j / 4) % 2) as f64).unwrap();
        assert_eq!(degrade(&img, 0.0, 9).unwrap(), img);
        let d = degrade(&img, 0.1, 9).unwrap();
        let changed = img
            .pixels()
            .iter()
            .zip(d.pixels())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, (0.1f64 * 1024.0).round() as usize);
        assert_eq!(degrade(&d, 0.1, 9).unwrap(), img);
        let all = degrade(&img, 1.0, 1).unwrap();
        assert!(all
            .pixels()
            .iter()
            .zip(img.pixels())
            .all(|(a, b)| *a == 1.0 - *b));
    }

    #[test]
    fn crop_bounds() {
        let img = ramp(20);
        let c = crop(&img, 2, 3, 16).unwrap();
        assert_eq!(c.get(0, 0), img.get(2, 3));
        assert!(crop(&img, 5, 5, 16).is_err());
    }
}
