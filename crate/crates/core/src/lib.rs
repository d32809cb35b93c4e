//! Weak point group and symmorphism detection for two-dimensional
//! (quasi)periodic densities given as grayscale images.

pub mod config;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod pipeline;
pub mod scalar;
pub mod spectral;
pub mod symmetry;
pub mod symmorphism;
pub mod zmodule;

pub use error::{Error, Result};
pub use geometry::{Frequency, Mat2};
pub use imaging::{GrayscaleImage, TilingFamily, TilingSpec};

/// Double-precision image, the default for analysis.
pub type Image = GrayscaleImage<f64>;
/// Double-precision frequency.
pub type Freq = Frequency<f64>;
