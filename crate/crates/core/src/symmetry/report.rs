//! Per-generator deviation reports.

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::measures::{amplitude_deviation, overall_deviation};
use super::phase::{extrapolate, phase_between, PhaseFunctionSamples, PhaseSample};
use crate::error::{Error, Result};
use crate::geometry::{Frequency, Mat2};
use crate::imaging::GrayscaleImage;
use crate::scalar::{mod1_distance, Real};
use crate::spectral::{SpectralSample, Taper, TaperedImage};
use crate::zmodule::{matrix_in_basis, IntMatrix, MSelect, ModuleBasis};

/// Deviations of one module element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementDeviation<T> {
    pub alpha: Vec<i32>,
    pub k: Frequency<T>,
    pub amp_dev: T,
    pub phase_dev: T,
    pub overall: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub evaluated: usize,
    pub skipped: usize,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub threshold: f64,
    pub fraction_below: f64,
}

/// Result of testing one candidate generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport<T> {
    pub label: String,
    pub generator: Mat2,
    /// Reflection axis angle for mirrors.
    pub axis: Option<f64>,
    pub matrix: IntMatrix,
    pub matrix_residual: f64,
    /// Ordered as the analysis set.
    pub per_element: Vec<ElementDeviation<T>>,
    pub skipped: Vec<Vec<i32>>,
    pub stats: DeviationStats,
    pub phases: PhaseFunctionSamples<T>,
}

impl<T: Real> DeviationReport<T> {
    pub fn overall_values(&self) -> Vec<f64> {
        self.per_element.iter().map(|e| e.overall.as_f64()).collect()
    }

    /// Fraction of evaluated elements with overall deviation strictly below
    /// `threshold`; 0 when nothing was evaluated.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        fraction_below(&self.overall_values(), threshold)
    }

    pub fn max(&self) -> f64 {
        self.stats.max
    }
}

fn fraction_below(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}

fn stats(values: &[f64], skipped: usize, threshold: f64) -> DeviationStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = match sorted.len() {
        0 => 0.0,
        l if l % 2 == 1 => sorted[l / 2],
        l => 0.5 * (sorted[l / 2 - 1] + sorted[l / 2]),
    };
    let mean = if sorted.is_empty() {
        0.0
    } else {
        sorted.iter().sum::<f64>() / sorted.len() as f64
    };
    DeviationStats {
        evaluated: values.len(),
        skipped,
        max: sorted.last().copied().unwrap_or(0.0),
        median,
        mean,
        threshold,
        fraction_below: fraction_below(values, threshold),
    }
}

/// Largest distance from an integer, in cycles, at which fundamentals still
/// count as commensurate with the image.
pub const COMMENSURATE_TOL: f64 = 1e-6;

/// Fourier coefficients of the fundamentals and of every analysis element,
/// shared by all generators tested on one image.
#[derive(Clone, Debug)]
pub struct ElementSpectrum<T> {
    pub image: TaperedImage<T>,
    pub fundamentals: Vec<SpectralSample<T>>,
    pub elements: Vec<SpectralSample<T>>,
}

impl<T: Real> ElementSpectrum<T> {
    pub fn compute(img: &GrayscaleImage<T>, basis: &ModuleBasis<T>, mselect: &MSelect<T>, taper: Taper) -> Self {
        let image = TaperedImage::new(img, taper.resolve(basis.mu() <= 2 && basis.is_commensurate(COMMENSURATE_TOL)));
        let ks: Vec<Frequency<T>> = mselect.elements.iter().map(|e| e.k).collect();
        Self {
            fundamentals: image.samples(basis.fundamentals()),
            elements: image.samples(&ks),
            image,
        }
    }
}

/// Options for [`test_generator`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTest {
    pub noise_floor: f64,
    pub tol_int: f64,
    /// Threshold used for `fraction_below` in the stats.
    pub threshold: f64,
    #[serde(default)]
    pub taper: Taper,
}

/// Deviation report of `q` over the analysis set.
pub fn test_generator<T: Real>(
    img: &GrayscaleImage<T>,
    q: &Mat2,
    basis: &ModuleBasis<T>,
    mselect: &MSelect<T>,
    options: &GeneratorTest,
) -> Result<DeviationReport<T>> {
    let spectrum = ElementSpectrum::compute(img, basis, mselect, options.taper);
    test_generator_with(&spectrum, q, basis, mselect, options, "Q", None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn test_generator_with<T: Real>(
    spectrum: &ElementSpectrum<T>,
    q: &Mat2,
    basis: &ModuleBasis<T>,
    mselect: &MSelect<T>,
    options: &GeneratorTest,
    label: &str,
    axis: Option<f64>,
) -> Result<DeviationReport<T>> {
    let map = matrix_in_basis(q, basis, options.tol_int)?;
    let floor = T::of(options.noise_floor);
    let qf: Vec<Frequency<T>> = basis.fundamentals().iter().map(|&k| q.apply(k)).collect();
    let at_qf = spectrum.image.samples(&qf);
    let mut fundamental_phases = Vec::with_capacity(basis.mu());
    for (i, (a, b)) in spectrum.fundamentals.iter().zip(&at_qf).enumerate() {
        if a.amplitude < floor || b.amplitude < floor {
            return Err(Error::MissingPhase(format!(
                "fundamental {i} of {label}: amplitudes {} and {} below the noise floor {floor}",
                a.amplitude, b.amplitude
            )));
        }
        fundamental_phases.push(phase_between(a, b));
    }
    let qk: Vec<Frequency<T>> = mselect.elements.iter().map(|e| q.apply(e.k)).collect();
    let at_qk = spectrum.image.samples(&qk);
    let mut per_element = Vec::new();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for ((e, a), b) in mselect.elements.iter().zip(&spectrum.elements).zip(&at_qk) {
        if a.amplitude < floor || b.amplitude < floor {
            skipped.push(e.alpha.clone());
            continue;
        }
        let phase = phase_between(a, b);
        let phase_dev = mod1_distance(phase, extrapolate(&fundamental_phases, &e.alpha));
        let amp_dev = amplitude_deviation(a.amplitude, b.amplitude);
        let overall = overall_deviation(amp_dev.min(T::one()), phase_dev.min(T::of(0.5)))?;
        samples.push(PhaseSample {
            alpha: e.alpha.clone(),
            phase,
        });
        per_element.push(ElementDeviation {
            alpha: e.alpha.clone(),
            k: e.k,
            amp_dev,
            phase_dev,
            overall,
        });
    }
    let values: Vec<f64> = per_element.iter().map(|e| e.overall.as_f64()).collect();
    Ok(DeviationReport {
        label: label.to_string(),
        generator: *q,
        axis,
        matrix: map.matrix,
        matrix_residual: map.residual,
        stats: stats(&values, skipped.len(), options.threshold),
        per_element,
        skipped: skipped.clone(),
        phases: PhaseFunctionSamples {
            generator: *q,
            fundamental_phases,
            samples,
            skipped,
        },
    })
}

/// Equal-width histogram on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// One row per element: `alpha, kx, ky, amp_dev, phase_dev, overall`.
pub fn write_deviation_csv<T: Real, W: Write>(report: &DeviationReport<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generator", "alpha", "kx", "ky", "amp_dev", "phase_dev", "overall"])?;
    for e in &report.per_element {
        let alpha: Vec<String> = e.alpha.iter().map(|a| a.to_string()).collect();
        w.write_record([
            report.label.clone(),
            alpha.join(" "),
            fmt17(e.k.x.as_f64()),
            fmt17(e.k.y.as_f64()),
            fmt17(e.amp_dev.as_f64()),
            fmt17(e.phase_dev.as_f64()),
            fmt17(e.overall.as_f64()),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Histogram rows preceded by `threshold` rows carrying the reference lines.
pub fn write_histogram_csv<W: Write>(
    label: &str,
    hist: &Histogram,
    thresholds: &[(&str, f64)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "generator", "lo", "hi", "count"])?;
    for (name, value) in thresholds {
        w.write_record(["threshold", name, &fmt17(*value), &fmt17(*value), ""])?;
    }
    for (b, count) in hist.counts.iter().enumerate() {
        w.write_record([
            "bin",
            label,
            &fmt17(hist.edges[b]),
            &fmt17(hist.edges[b + 1]),
            &count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Seventeen significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Polar diagram of the measured coefficients: each element becomes a dot
/// at `(|k|, arg k)`, dark in proportion to its overall deviation.
pub fn render_polar<T: Real>(report: &DeviationReport<T>, size: usize) -> Result<GrayscaleImage<T>> {
    let size = size.max(crate::imaging::MIN_SIDE);
    let mut px = vec![T::one(); size * size];
    let rmax = report
        .per_element
        .iter()
        .map(|e| e.k.norm().as_f64())
        .fold(0.0, f64::max)
        .max(1e-12);
    let c = (size as f64 - 1.0) / 2.0;
    let scale = 0.95 * c / rmax;
    for e in &report.per_element {
        let x = c + e.k.x.as_f64() * scale;
        let y = c + e.k.y.as_f64() * scale;
        let shade = T::one() - T::of(0.25) - T::of(0.75) * e.overall.min(T::one());
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (i, j) = (y.round() as i64 + dy, x.round() as i64 + dx);
                if i >= 0 && j >= 0 && (i as usize) < size && (j as usize) < size {
                    let p = &mut px[i as usize * size + j as usize];
                    *p = p.min(shade);
                }
            }
        }
    }
    // Reference circle at the outermost radius.
    for s in 0..4 * size {
        let t = std::f64::consts::TAU * s as f64 / (4 * size) as f64;
        let (i, j) = ((c + 0.95 * c * t.sin()).round(), (c + 0.95 * c * t.cos()).round());
        px[i as usize * size + j as usize] = T::of(0.5);
    }
    GrayscaleImage::new(size, px)
}

/// Phase samples as unit phasors, for plotting.
pub fn phasors<T: Real>(samples: &PhaseFunctionSamples<T>) -> Vec<Complex<T>> {
    samples
        .samples
        .iter()
        .map(|s| Complex::from_polar(T::one(), T::two_pi() * s.phase))
        .collect()
}
