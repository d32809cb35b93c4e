//! Phase functions `Φ_Q` with `ρ̂(Qk) = exp(2πi Φ_Q(k)) ρ̂(k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frequency, Mat2};
use crate::imaging::GrayscaleImage;
use crate::scalar::{frac, mod1_distance, Cycle, Real};
use crate::spectral::{dft_at, SpectralSample};
use crate::zmodule::{matrix_in_basis, IntMatrix, ModuleBasis, TOL_INT};

/// Measured phase of one module element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample<T> {
    pub alpha: Vec<i32>,
    pub phase: T,
}

/// Values of a phase function on the analysis set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFunctionSamples<T> {
    pub generator: Mat2,
    /// `Φ_Q(k_i)` in `[0, 1)`.
    pub fundamental_phases: Vec<T>,
    pub samples: Vec<PhaseSample<T>>,
    /// Elements whose coefficients fell below the noise floor.
    pub skipped: Vec<Vec<i32>>,
}

impl<T: Real> PhaseFunctionSamples<T> {
    pub fn get(&self, alpha: &[i32]) -> Option<T> {
        self.samples.iter().find(|s| s.alpha == alpha).map(|s| s.phase)
    }

    /// Gauge-linear extension of the fundamental phases.
    pub fn extrapolate(&self, alpha: &[i32]) -> T {
        extrapolate(&self.fundamental_phases, alpha)
    }
}

/// `Σ α_i φ_i` reduced to `[0, 1)`.
pub fn extrapolate<C: Cycle>(phases: &[C], alpha: &[i32]) -> C {
    let sum = phases
        .iter()
        .zip(alpha)
        .fold(C::zero(), |acc, (&p, &a)| acc + p * C::from_int(a as i64));
    frac(sum)
}

/// `(arg b − arg a) / 2π` in `[0, 1)`.
pub(crate) fn phase_between<T: Real>(a: &SpectralSample<T>, b: &SpectralSample<T>) -> T {
    frac(b.phase - a.phase)
}

/// `Φ_Q(k)`, or `None` when either coefficient is below the floor.
pub fn phase_function<T: Real>(
    img: &GrayscaleImage<T>,
    q: &Mat2,
    k: Frequency<T>,
    noise_floor: T,
) -> Option<T> {
    let a = dft_at(img, k);
    let b = dft_at(img, q.apply(k));
    if a.amplitude < noise_floor || b.amplitude < noise_floor {
        return None;
    }
    Some(phase_between(&a, &b))
}

/// `d(Φ_Q(k), Σ α_i Φ_Q(k_i))` for an element with a measured phase.
pub fn gauge_linearity_deviation<T: Real>(phases: &PhaseFunctionSamples<T>, alpha: &[i32]) -> Option<T> {
    phases
        .get(alpha)
        .map(|measured| mod1_distance(measured, phases.extrapolate(alpha)))
}

/// Fundamental phases of `Q` measured on `img`; fails when any fundamental
/// coefficient is below the floor.
pub fn fundamental_phases<T: Real>(
    img: &GrayscaleImage<T>,
    q: &Mat2,
    basis: &ModuleBasis<T>,
    noise_floor: T,
) -> Result<Vec<T>> {
    basis
        .fundamentals()
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            phase_function(img, q, k, noise_floor).ok_or_else(|| {
                Error::MissingPhase(format!(
                    "fundamental {i} at {k} is below the noise floor {noise_floor}"
                ))
            })
        })
        .collect()
}

/// `Φ_{QQ'}(k) = Φ_Q(Q'k) + Φ_{Q'}(k)`, evaluated on the fundamentals
/// through the integer matrix of `Q'` and extended gauge-linearly to the
/// elements sampled in `phi_q`.
pub fn compose_phase_functions<T: Real>(
    phi_q: &PhaseFunctionSamples<T>,
    phi_qp: &PhaseFunctionSamples<T>,
    basis: &ModuleBasis<T>,
) -> Result<PhaseFunctionSamples<T>> {
    let m = matrix_in_basis(&phi_qp.generator, basis, TOL_INT)?.matrix;
    let fundamental_phases = compose_fundamentals(&phi_q.fundamental_phases, &phi_qp.fundamental_phases, &m);
    let samples = phi_q
        .samples
        .iter()
        .map(|s| PhaseSample {
            alpha: s.alpha.clone(),
            phase: extrapolate(&fundamental_phases, &s.alpha),
        })
        .collect();
    Ok(PhaseFunctionSamples {
        generator: phi_q.generator * phi_qp.generator,
        fundamental_phases,
        samples,
        skipped: Vec::new(),
    })
}

/// `[Φ_{QQ'}] = M_{Q'}ᵀ [Φ_Q] + [Φ_{Q'}]`.
pub fn compose_fundamentals<C: Cycle>(phi_q: &[C], phi_qp: &[C], m_qp: &IntMatrix) -> Vec<C> {
    (0..phi_q.len())
        .map(|i| {
            let column: Vec<i32> = (0..phi_q.len()).map(|j| m_qp.get(j, i) as i32).collect();
            frac(extrapolate(phi_q, &column) + phi_qp[i])
        })
        .collect()
}
