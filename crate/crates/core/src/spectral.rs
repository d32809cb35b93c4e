//! Fourier coefficients at arbitrary real frequencies, the FFT grid, peak
//! detection and continuous peak refinement.
//!
//! All coefficients follow
//! `ρ̂(k) = n⁻² Σ_{i,j=1..n} ρ_ij exp(−2πi (k_x j + k_y i) / n)`
//! with `i` the 1-based row and `j` the 1-based column.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Frequency;
use crate::imaging::GrayscaleImage;
use crate::scalar::{frac, Real};

/// A frequency with its Fourier coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample<T> {
    pub k: Frequency<T>,
    pub value: Complex<T>,
    pub amplitude: T,
    /// `arg(value) / 2π` in `[0, 1)`.
    pub phase: T,
}

impl<T: Real> SpectralSample<T> {
    pub fn new(k: Frequency<T>, value: Complex<T>) -> Self {
        let phase = frac(value.im.atan2(value.re) / T::two_pi());
        Self {
            k,
            value,
            amplitude: value.norm(),
            phase,
        }
    }
}

/// A local maximum of the diffraction diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak<T> {
    pub k: Frequency<T>,
    pub amplitude: T,
    pub refined: bool,
    /// The zero frequency; reported, but never a fundamental.
    #[serde(default)]
    pub is_dc: bool,
}

/// `exp(−2πi f · (m+1) / n)` for `m = 0..n`, with the argument reduced
/// before the trigonometric call.
fn twiddles<T: Real>(f: T, n: usize) -> (Vec<T>, Vec<T>) {
    let nf = T::of_usize(n);
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for m in 1..=n {
        let turns = frac(f * T::of_usize(m) / nf);
        let (s, c) = (-(T::two_pi() * turns)).sin_cos();
        re.push(c);
        im.push(s);
    }
    (re, im)
}

/// Four-lane dot product; the split accumulators let the compiler vectorize.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dft_pixels<T: Real>(pixels: &[T], n: usize, k: Frequency<T>) -> Complex<T> {
    let (xr, xi) = twiddles(k.x, n);
    let (yr, yi) = twiddles(k.y, n);
    let mut sum = Complex::new(T::zero(), T::zero());
    for (i, row) in pixels.chunks_exact(n).enumerate() {
        let r = Complex::new(dot(row, &xr), dot(row, &xi));
        sum = sum + r * Complex::new(yr[i], yi[i]);
    }
    sum / T::of_usize(n * n)
}

/// Fourier coefficient at an arbitrary real frequency.
pub fn dft_at<T: Real>(img: &GrayscaleImage<T>, k: Frequency<T>) -> SpectralSample<T> {
    SpectralSample::new(k, dft_pixels(img.pixels(), img.n(), k))
}

/// Power `p` of the `sin^(2p)` refinement taper.
pub const TAPER_POWER: i32 = 3;

/// Taper applied to the image before coefficients are estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    /// [`Taper::None`] when every fundamental is an integer frequency,
    /// [`Taper::Sine`] otherwise.
    #[default]
    Auto,
    /// The plain pixel sum of [`dft_at`].
    None,
    /// Separable `sin` window in rows and columns.
    Sine,
    /// Separable `sin^(2p)` with `p = TAPER_POWER`; low leakage at the
    /// cost of a smaller effective area.
    Hann,
}

impl Taper {
    /// The concrete taper for an analysis. A periodic image whose lattice
    /// frequencies are all integers has unit-cell-average coefficients that
    /// the plain sum reproduces exactly; anything else (quasiperiodic
    /// modules, non-integer periods) is better approximated under a taper.
    pub fn resolve(self, commensurate: bool) -> Taper {
        match self {
            Taper::Auto if commensurate => Taper::None,
            Taper::Auto => Taper::Sine,
            t => t,
        }
    }
}

/// An image prepared for coefficient estimation. Tapered variants are
/// mean-free and divided by the taper's coherent gain, so that values
/// estimate `ρ̂` away from the zero frequency with little leakage between
/// neighbouring peaks.
#[derive(Clone, Debug)]
pub struct TaperedImage<T> {
    n: usize,
    taper: Taper,
    pixels: Vec<T>,
}

impl<T: Real> TaperedImage<T> {
    /// [`Taper::Auto`] is taken as [`Taper::Sine`]; see [`Taper::resolve`].
    pub fn new(img: &GrayscaleImage<T>, taper: Taper) -> Self {
        let n = img.n();
        let weights = taper_weights::<T>(n, taper);
        let pixels = match &weights {
            None => img.pixels().to_vec(),
            Some(w) => {
                let gain = w.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(n * n);
                let mean = img.mean();
                img.pixels()
                    .iter()
                    .zip(w)
                    .map(|(&v, &w)| (v - mean) * w / gain)
                    .collect()
            }
        };
        Self { n, taper, pixels }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }

    pub fn sample(&self, k: Frequency<T>) -> SpectralSample<T> {
        SpectralSample::new(k, dft_pixels(&self.pixels, self.n, k))
    }

    pub fn amplitude(&self, k: Frequency<T>) -> T {
        dft_pixels(&self.pixels, self.n, k).norm()
    }

    /// Samples at many frequencies, in parallel, in input order.
    pub fn samples(&self, ks: &[Frequency<T>]) -> Vec<SpectralSample<T>> {
        ks.par_iter().map(|&k| self.sample(k)).collect()
    }
}

fn taper_weights<T: Real>(n: usize, taper: Taper) -> Option<Vec<T>> {
    let nf = T::of_usize(n);
    let pi = T::of(std::f64::consts::PI);
    let half = T::of(0.5);
    let profile = |f: &dyn Fn(T) -> T| {
        let w1: Vec<T> = (0..n).map(|t| f((pi * (T::of_usize(t) + half) / nf).sin())).collect();
        Some((0..n * n).map(|p| w1[p / n] * w1[p % n]).collect())
    };
    match taper {
        Taper::None => None,
        Taper::Auto | Taper::Sine => profile(&|s| s),
        Taper::Hann => profile(&|s| (s * s).powi(TAPER_POWER)),
    }
}

/// Coefficients at many frequencies, evaluated in parallel, in input order.
pub fn dft_many<T: Real>(img: &GrayscaleImage<T>, ks: &[Frequency<T>]) -> Vec<SpectralSample<T>> {
    ks.par_iter().map(|&k| dft_at(img, k)).collect()
}

/// Coefficients at all integer frequencies in `(−n/2, n/2]²`.
#[derive(Clone, Debug)]
pub struct FftGrid<T> {
    n: usize,
    // Row-major by (ky mod n, kx mod n), already normalized and phase
    // corrected to the 1-based convention.
    values: Vec<Complex<T>>,
}

impl<T: Real> FftGrid<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest and largest frequency along an axis.
    pub fn range(&self) -> (i64, i64) {
        let h = (self.n / 2) as i64;
        (h + 1 - self.n as i64, h)
    }

    fn slot(&self, kx: i64, ky: i64) -> usize {
        let n = self.n as i64;
        (ky.rem_euclid(n) * n + kx.rem_euclid(n)) as usize
    }

    /// Coefficient at the integer frequency `(kx, ky)`, taken cyclically.
    pub fn value(&self, kx: i64, ky: i64) -> Complex<T> {
        self.values[self.slot(kx, ky)]
    }

    pub fn amplitude(&self, kx: i64, ky: i64) -> T {
        self.value(kx, ky).norm()
    }

    pub fn sample(&self, kx: i64, ky: i64) -> SpectralSample<T> {
        SpectralSample::new(
            Frequency::new(T::of(kx as f64), T::of(ky as f64)),
            self.value(kx, ky),
        )
    }

    /// All samples, rows of increasing `ky`, each row of increasing `kx`.
    pub fn samples(&self) -> Vec<SpectralSample<T>> {
        let (lo, hi) = self.range();
        (lo..=hi)
            .flat_map(|ky| (lo..=hi).map(move |kx| (kx, ky)))
            .map(|(kx, ky)| self.sample(kx, ky))
            .collect()
    }
}

/// Integer-frequency grid by 2D FFT.
pub fn fft_grid<T: Real>(img: &GrayscaleImage<T>) -> FftGrid<T> {
    let n = img.n();
    let mut planner = FftPlanner::<T>::new();
    let fft: Arc<dyn rustfft::Fft<T>> = planner.plan_fft_forward(n);
    let mut data: Vec<Complex<T>> = img
        .pixels()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    let mut cols = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for j in 0..n {
            cols[j * n + i] = data[i * n + j];
        }
    }
    cols.par_chunks_mut(n).for_each(|col| fft.process(col));
    let norm = T::of_usize(n * n);
    let nf = T::of_usize(n);
    let mut values = vec![Complex::new(T::zero(), T::zero()); n * n];
    for ly in 0..n {
        for lx in 0..n {
            // The FFT indexes pixels from 0; the convention above from 1.
            let turns = frac(T::of_usize(lx + ly) / nf);
            let shift = Complex::from_polar(T::one(), -(T::two_pi() * turns));
            values[ly * n + lx] = cols[lx * n + ly] * shift / norm;
        }
    }
    FftGrid { n, values }
}

/// Strict 8-neighbour maxima with amplitude at least `thd`, by descending
/// amplitude. The zero frequency is included and flagged.
pub fn detect_peaks<T: Real>(grid: &FftGrid<T>, thd: T) -> Result<Vec<Peak<T>>> {
    if !(thd > T::zero()) {
        return Err(Error::InvalidArgument(format!("threshold {thd} must be positive")));
    }
    let (lo, hi) = grid.range();
    let mut peaks = Vec::new();
    for ky in lo..=hi {
        for kx in lo..=hi {
            let a = grid.amplitude(kx, ky);
            if a < thd {
                continue;
            }
            let strict = (-1..=1).all(|dy| {
                (-1..=1).all(|dx| (dx == 0 && dy == 0) || grid.amplitude(kx + dx, ky + dy) < a)
            });
            if strict {
                peaks.push(Peak {
                    k: Frequency::new(T::of(kx as f64), T::of(ky as f64)),
                    amplitude: a,
                    refined: false,
                    is_dc: kx == 0 && ky == 0,
                });
            }
        }
    }
    peaks.sort_by(|p, q| {
        q.amplitude
            .partial_cmp(&p.amplitude)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p.k.y.partial_cmp(&q.k.y).unwrap_or(std::cmp::Ordering::Equal))
            .then(p.k.x.partial_cmp(&q.k.x).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(peaks)
}

/// Default refinement radius in cycles.
pub const DEFAULT_RADIUS: f64 = 2.0;
/// Default refinement tolerance in cycles.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Local amplitude maximum near `guess` by nested 3×3 pattern search on the
/// spectrum under [`Taper::Hann`]; the reported amplitude is the tapered
/// estimate.
///
/// The step starts at `radius / 2`; the centre moves to a strictly better
/// neighbour while one exists and the step halves once none does. Candidates
/// outside the ball of `radius` around the guess are ignored.
pub fn refine_peak<T: Real>(
    img: &GrayscaleImage<T>,
    guess: Frequency<T>,
    radius: T,
    tol: T,
) -> Result<Peak<T>> {
    refine_peak_in(&TaperedImage::new(img, Taper::Hann), guess, radius, tol)
}

/// [`refine_peak`] on a prepared image.
pub fn refine_peak_in<T: Real>(
    tapered: &TaperedImage<T>,
    guess: Frequency<T>,
    radius: T,
    tol: T,
) -> Result<Peak<T>> {
    if !guess.is_finite() || !radius.is_finite() || !tol.is_finite() {
        return Err(Error::NonFinite);
    }
    if !(radius > T::zero() && tol > T::zero()) {
        return Err(Error::InvalidArgument("radius and tol must be positive".into()));
    }
    let nyquist = T::of_usize(tapered.n()) / T::of(2.0);
    if guess.max_abs() + radius >= nyquist {
        return Err(Error::BeyondNyquist {
            kx: guess.x.as_f64(),
            ky: guess.y.as_f64(),
            radius: radius.as_f64(),
            nyquist: nyquist.as_f64(),
        });
    }
    let mut centre = guess;
    let mut best = tapered.amplitude(guess);
    let mut step = radius / T::of(2.0);
    let mut budget = 20_000usize;
    while step >= tol && budget > 0 {
        let mut moved = None;
        for dy in [-1.0, 0.0, 1.0] {
            for dx in [-1.0, 0.0, 1.0] {
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                let k = centre + Frequency::new(T::of(dx), T::of(dy)).scale(step);
                if k.distance(guess) > radius {
                    continue;
                }
                budget = budget.saturating_sub(1);
                let a = tapered.amplitude(k);
                if a > best {
                    best = a;
                    moved = Some(k);
                }
            }
        }
        match moved {
            Some(k) => centre = k,
            None => step = step / T::of(2.0),
        }
    }
    Ok(Peak {
        k: centre,
        amplitude: best,
        refined: true,
        is_dc: false,
    })
}

/// Diffraction diagram as an image with the zero frequency at pixel
/// `(n/2 − 1, n/2 − 1)` and `ky` growing downwards. With `log` the scale is
/// `log(1 + |ρ̂|/thd)`, normalized by its maximum.
pub fn render_heatmap<T: Real>(grid: &FftGrid<T>, thd: T, log: bool) -> Result<GrayscaleImage<T>> {
    if !(thd > T::zero()) {
        return Err(Error::InvalidArgument(format!("threshold {thd} must be positive")));
    }
    let n = grid.n();
    let (lo, _) = grid.range();
    let scale = |a: T| if log { (a / thd).ln_1p() } else { a };
    let raw: Vec<T> = (0..n * n)
        .map(|p| {
            let (r, c) = ((p / n) as i64, (p % n) as i64);
            scale(grid.amplitude(c + lo, r + lo))
        })
        .collect();
    let max = raw.iter().cloned().fold(T::zero(), T::max);
    let pixels = if max > T::zero() {
        raw.into_iter().map(|v| (v / max).min(T::one())).collect()
    } else {
        raw
    };
    GrayscaleImage::new(n, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(n: usize) -> GrayscaleImage<f64> {
        GrayscaleImage::from_fn(n, |i, j| ((i * 3 + j * 5) % 7) as f64 / 6.0).unwrap()
    }

    #[test]
    fn constant_image() {
        let img = GrayscaleImage::filled(32, 0.7f64).unwrap();
        let dc = dft_at(&img, Frequency::zero());
        assert!((dc.value.re - 0.7).abs() < 1e-14 && dc.value.im.abs() < 1e-14);
        for (kx, ky) in [(1.0, 0.0), (3.0, -5.0), (16.0, 16.0)] {
            assert!(dft_at(&img, Frequency::new(kx, ky)).amplitude < 1e-12);
        }
        let grid = fft_grid(&img);
        let peaks = detect_peaks(&grid, 0.01).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!(peaks[0].is_dc);
    }

    #[test]
    fn delta_spectrum_is_flat() {
        let img: GrayscaleImage<f64> =
            GrayscaleImage::from_fn(20, |i, j| if (i, j) == (3, 11) { 1.0 } else { 0.0 }).unwrap();
        let grid = fft_grid(&img);
        for s in grid.samples() {
            assert!((s.amplitude - 1.0 / 400.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_matches_direct_sum() {
        let img = checker(24);
        let grid = fft_grid(&img);
        let (lo, hi) = grid.range();
        assert_eq!((lo, hi), (-11, 12));
        for ky in lo..=hi {
            for kx in lo..=hi {
                let d = dft_at(&img, Frequency::new(kx as f64, ky as f64)).value;
                assert!((d - grid.value(kx, ky)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn one_based_convention() {
        // A single pixel at 0-based (0, 0) sits at 1-based (1, 1).
        let img = GrayscaleImage::from_fn(16, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }).unwrap();
        let s = dft_at(&img, Frequency::new(1.0, 0.0));
        let expected = Complex::from_polar(1.0 / 256.0, -std::f64::consts::TAU / 16.0);
        assert!((s.value - expected).norm() < 1e-15);
    }

    #[test]
    fn sample_phase_in_unit_interval() {
        let s = SpectralSample::new(Frequency::zero(), Complex::new(-1.0f64, -1e-300));
        assert!(s.phase >= 0.0 && s.phase < 1.0);
        let s = SpectralSample::new(Frequency::zero(), Complex::new(0.0f64, 2.0));
        assert!((s.phase - 0.25).abs() < 1e-15 && (s.amplitude - 2.0).abs() < 1e-15);
    }

    #[test]
    fn peaks_sorted_and_thresholded() {
        let n = 64;
        let img = GrayscaleImage::from_fn(n, |i, j| {
            0.5 + 0.3 * (std::f64::consts::TAU * 4.0 * j as f64 / n as f64).cos()
                + 0.1 * (std::f64::consts::TAU * 7.0 * i as f64 / n as f64).cos()
        })
        .unwrap();
        let peaks = detect_peaks(&fft_grid(&img), 0.01).unwrap();
        assert_eq!(peaks.len(), 5);
        assert!(peaks[0].is_dc);
        assert!(peaks.windows(2).all(|w| w[0].amplitude >= w[1].amplitude));
        assert!((peaks[1].amplitude - 0.15).abs() < 1e-12);
        assert!(detect_peaks(&fft_grid(&img), 0.0).is_err());
    }

    #[test]
    fn refine_finds_off_grid_frequency() {
        let n = 64;
        let f = 5.3;
        let img = GrayscaleImage::from_fn(n, |_, j| {
            0.5 + 0.4 * (std::f64::consts::TAU * f * (j + 1) as f64 / n as f64).cos()
        })
        .unwrap();
        let p = refine_peak(&img, Frequency::new(5.0, 0.0), 2.0, 1e-5).unwrap();
        assert!(p.refined);
        assert!(p.amplitude >= dft_at(&img, Frequency::new(5.0, 0.0)).amplitude);
        assert!((p.k.x - f).abs() < 1e-3, "{}", p.k);
        assert!(p.k.y.abs() < 1e-3);
    }

    #[test]
    fn refine_rejects_bad_input() {
        let img = checker(32);
        assert!(matches!(
            refine_peak(&img, Frequency::new(f64::NAN, 0.0), 2.0, 1e-4),
            Err(Error::NonFinite)
        ));
        assert!(matches!(
            refine_peak(&img, Frequency::new(15.0, 0.0), 2.0, 1e-4),
            Err(Error::BeyondNyquist { .. })
        ));
    }

    #[test]
    fn heatmap_puts_dc_at_centre() {
        let img = checker(32);
        let h = render_heatmap(&fft_grid(&img), 0.01, true).unwrap();
        assert_eq!(h.get(15, 15), 1.0);
    }

    #[test]
    fn single_precision_agrees() {
        let img = checker(32);
        let k = Frequency::new(3.25, -1.5);
        let a = dft_at(&img, k).value;
        let b = dft_at(&img.cast::<f32>(), k.cast::<f32>()).value;
        assert!((a.re - b.re as f64).abs() < 1e-5 && (a.im - b.im as f64).abs() < 1e-5);
    }
}

