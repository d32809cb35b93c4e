//! Scalar deviation measures.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use crate::scalar::mod1_distance;

/// Relative difference `|a − b| / max(a, b)`; 0 when both vanish.
pub fn amplitude_deviation<T: Real>(a: T, b: T) -> T {
    let m = a.max(b);
    if m <= T::zero() {
        T::zero()
    } else {
        (a - b).abs() / m
    }
}

/// `1 − (1 − amp_dev)(1 − 2·phase_dev)`.
pub fn overall_deviation<T: Real>(amp_dev: T, phase_dev: T) -> Result<T> {
    let half = T::of(0.5);
    if !(amp_dev >= T::zero() && amp_dev <= T::one()) {
        return Err(Error::InvalidArgument(format!("amplitude deviation {amp_dev} outside [0, 1]")));
    }
    if !(phase_dev >= T::zero() && phase_dev <= half) {
        return Err(Error::InvalidArgument(format!("phase deviation {phase_dev} outside [0, 1/2]")));
    }
    Ok(T::one() - (T::one() - amp_dev) * (T::one() - T::of(2.0) * phase_dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert!((mod1_distance(0.3, 0.9) - 0.4f64).abs() < 1e-15);
        assert!((mod1_distance(0.1, 0.95) - 0.15f64).abs() < 1e-15);
        assert_eq!(mod1_distance(3.7f64, 3.7), 0.0);
    }

    #[test]
    fn amplitudes() {
        assert_eq!(amplitude_deviation(1.0f64, 1.0), 0.0);
        assert_eq!(amplitude_deviation(0.0f64, 2.0), 1.0);
        assert_eq!(amplitude_deviation(2.0f64, 4.0), 0.5);
        assert_eq!(amplitude_deviation(0.0f64, 0.0), 0.0);
    }

    #[test]
    fn overall_boundaries() {
        assert_eq!(overall_deviation(0.0f64, 0.0).unwrap(), 0.0);
        assert_eq!(overall_deviation(1.0f64, 0.2).unwrap(), 1.0);
        assert_eq!(overall_deviation(0.3f64, 0.5).unwrap(), 1.0);
        assert_eq!(overall_deviation(0.5f64, 0.25).unwrap(), 0.75);
        assert!(overall_deviation(1.5f64, 0.0).is_err());
        assert!(overall_deviation(0.0f64, 0.6).is_err());
        assert!(overall_deviation(f64::NAN, 0.0).is_err());
    }
}
