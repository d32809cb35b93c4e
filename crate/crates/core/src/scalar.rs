//! Scalar abstractions.
//!
//! Two roles are distinguished. [`Real`] is the floating-point type used for
//! pixels, frequencies and Fourier coefficients (`f32` or `f64`). [`Cycle`] is
//! any type on which arithmetic modulo 1 makes sense; it covers both floats and
//! exact rationals, so that the gauge algebra can be checked without rounding.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::{Float, Num, NumCast, Signed};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar for images and spectra.
pub trait Real:
    Float
    + FftNum
    + Cycle
    + Send
    + Sync
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Default
    + 'static
{
    /// Converts an `f64` constant. Never fails for the implementors below.
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 constant representable")
    }

    fn of_usize(x: usize) -> Self {
        <Self as NumCast>::from(x).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    fn two_pi() -> Self {
        Self::of(std::f64::consts::TAU)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar supporting exact reduction modulo 1.
pub trait Cycle: Num + Copy + PartialOrd + Neg<Output = Self> + Debug {
    fn floor_val(self) -> Self;
    fn from_int(v: i64) -> Self;
    fn half() -> Self;
    fn to_float(self) -> f64;

    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

macro_rules! float_cycle {
    ($t:ty) => {
        impl Cycle for $t {
            fn floor_val(self) -> Self {
                self.floor()
            }
            fn from_int(v: i64) -> Self {
                v as $t
            }
            fn half() -> Self {
                0.5
            }
            fn to_float(self) -> f64 {
                self as f64
            }
        }
    };
}

float_cycle!(f32);
float_cycle!(f64);

impl<I> Cycle for Ratio<I>
where
    I: num_integer::Integer + Signed + Copy + Debug + NumCast + Into<i128>,
    Ratio<I>: Neg<Output = Ratio<I>>,
{
    fn floor_val(self) -> Self {
        self.floor()
    }
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(<I as NumCast>::from(v).expect("integer fits"))
    }
    fn half() -> Self {
        Ratio::new(I::one(), I::one() + I::one())
    }
    fn to_float(self) -> f64 {
        let n: i128 = (*self.numer()).into();
        let d: i128 = (*self.denom()).into();
        n as f64 / d as f64
    }
}

/// Fractional part mapped to `[0, 1)`.
pub fn frac<T: Cycle>(x: T) -> T {
    let f = x - x.floor_val();
    // Floats can land on 1.0 after subtracting the floor of a tiny negative.
    if f >= T::one() {
        T::zero()
    } else {
        f
    }
}

/// Distance on the circle `R/Z`, in `[0, 1/2]`.
pub fn mod1_distance<T: Cycle>(x: T, y: T) -> T {
    let f = frac(x - y);
    let g = T::one() - f;
    if f < g {
        f
    } else {
        g
    }
}
