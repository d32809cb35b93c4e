//! Synthetic tilings: three square-lattice wallpaper groups and three
//! quasiperiodic tilings.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::multigrid::Multigrid;
use super::raster::Window;
use super::GrayscaleImage;
use crate::error::{Error, Result};
use crate::geometry::Frequency;
use crate::scalar::Real;

/// Golden ratio.
pub const TAU: f64 = 1.618_033_988_749_895;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TilingFamily {
    P4,
    P4mm,
    P4g,
    Penrose,
    AmmannBeenker,
    FibonacciSquares,
}

impl TilingFamily {
    pub const ALL: [TilingFamily; 6] = [
        Self::P4,
        Self::P4mm,
        Self::P4g,
        Self::Penrose,
        Self::AmmannBeenker,
        Self::FibonacciSquares,
    ];

    pub fn is_periodic(self) -> bool {
        matches!(self, Self::P4 | Self::P4mm | Self::P4g)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P4 => "p4",
            Self::P4mm => "p4mm",
            Self::P4g => "p4g",
            Self::Penrose => "penrose",
            Self::AmmannBeenker => "ammann_beenker",
            Self::FibonacciSquares => "fibonacci_squares",
        }
    }
}

impl fmt::Display for TilingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TilingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "p4" => Ok(Self::P4),
            "p4mm" | "p4m" => Ok(Self::P4mm),
            "p4g" | "p4gm" => Ok(Self::P4g),
            "penrose" => Ok(Self::Penrose),
            "ammann_beenker" | "ab" => Ok(Self::AmmannBeenker),
            "fibonacci_squares" | "fibonacci" => Ok(Self::FibonacciSquares),
            _ => Err(Error::UnsupportedFamily(s.to_string())),
        }
    }
}

/// Everything needed to render a tiling deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingSpec {
    pub family: TilingFamily,
    /// Side length `n` in pixels.
    pub size: usize,
    /// Sum of the pentagrid offsets, Penrose only.
    pub gamma: f64,
    /// Lattice period in pixels, periodic families only.
    pub period: f64,
    /// Tile edge length in pixels, quasiperiodic families only.
    pub edge_length: f64,
    pub line_width: f64,
    /// World position of the image centre. `None` selects the family
    /// default: the origin for periodic families, a seeded generic point
    /// otherwise.
    pub window_offset: Option<[f64; 2]>,
    pub antialias: bool,
    pub seed: u64,
}

impl Default for TilingSpec {
    fn default() -> Self {
        Self {
            family: TilingFamily::P4mm,
            size: 600,
            gamma: 0.0,
            period: 40.0,
            edge_length: 16.0,
            line_width: 2.0,
            window_offset: None,
            antialias: true,
            seed: 0,
        }
    }
}

impl TilingSpec {
    pub fn new(family: TilingFamily, size: usize) -> Self {
        Self {
            family,
            size,
            ..Self::default()
        }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }

    pub fn with_edge_length(mut self, edge: f64) -> Self {
        self.edge_length = edge;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_offset(mut self, offset: [f64; 2]) -> Self {
        self.window_offset = Some(offset);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_line_width(mut self, width: f64) -> Self {
        self.line_width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.size < super::MIN_SIDE {
            return bad(format!("size {} below {}", self.size, super::MIN_SIDE));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.line_width >= 1.0 && self.line_width.is_finite()) {
            return bad(format!("line width {} below 1", self.line_width));
        }
        if self.family.is_periodic() && !(self.period >= 4.0 && self.period.is_finite()) {
            return bad(format!("period {} too small", self.period));
        }
        if !self.family.is_periodic() && !(self.edge_length >= 2.0 && self.edge_length.is_finite())
        {
            return bad(format!("edge length {} too small", self.edge_length));
        }
        if let Some(o) = self.window_offset {
            if !(o[0].is_finite() && o[1].is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    /// Offset actually used for rendering.
    pub fn resolved_offset(&self) -> [f64; 2] {
        if let Some(o) = self.window_offset {
            return o;
        }
        if self.family.is_periodic() {
            return [0.0, 0.0];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0ff5e7);
        let span = 40.0 * self.edge_length;
        [rng.random_range(-span..span), rng.random_range(-span..span)]
    }

    /// Analytic fundamental frequencies in cycles per image width.
    ///
    /// Periodic families use two reciprocal lattice vectors (for `p4g` the
    /// pair `(1,1)`, `(2,1)` in lattice units, whose combinations avoid the
    /// glide extinctions). Quasiperiodic families use four module
    /// generators: 72° steps for Penrose, 45° steps for Ammann-Beenker and
    /// the two Fibonacci frequencies on each axis.
    pub fn reference_fundamentals(&self) -> Vec<Frequency<f64>> {
        let n = self.size as f64;
        let f = Frequency::new;
        match self.family {
            TilingFamily::P4 | TilingFamily::P4mm => {
                let q = n / self.period;
                vec![f(q, 0.0), f(0.0, q)]
            }
            TilingFamily::P4g => {
                let q = n / self.period;
                vec![f(q, q), f(2.0 * q, q)]
            }
            TilingFamily::Penrose => {
                let q = 2.0 * n / (5.0 * self.edge_length);
                ring(4, std::f64::consts::TAU / 5.0, q)
            }
            TilingFamily::AmmannBeenker => {
                let q = n / (2.0 * self.edge_length);
                ring(4, std::f64::consts::FRAC_PI_4, q)
            }
            TilingFamily::FibonacciSquares => {
                let ka = n / (self.edge_length * (1.0 + TAU.powi(-2)));
                let kb = ka / TAU;
                vec![f(ka, 0.0), f(kb, 0.0), f(0.0, ka), f(0.0, kb)]
            }
        }
    }
}

fn ring(count: usize, step: f64, radius: f64) -> Vec<Frequency<f64>> {
    (0..count)
        .map(|j| {
            let (s, c) = (step * j as f64).sin_cos();
            Frequency::new(radius * c, radius * s)
        })
        .collect()
}

/// Renders the tiling described by `spec`.
pub fn generate_tiling<T: Real>(spec: &TilingSpec) -> Result<GrayscaleImage<T>> {
    spec.validate()?;
    let window = Window::new(spec.size, spec.resolved_offset(), spec.antialias);
    let values = match spec.family {
        TilingFamily::P4mm => render_p4mm(&window, spec.period),
        TilingFamily::P4 => render_orbit(&window, spec.period, &p4_ops(), pinwheel_bar),
        TilingFamily::P4g => render_orbit(&window, spec.period, &p4g_ops(spec.period), glide_bar),
        TilingFamily::Penrose | TilingFamily::AmmannBeenker => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let grid = if spec.family == TilingFamily::Penrose {
                Multigrid::pentagrid(spec.gamma, spec.edge_length, &mut rng)
            } else {
                Multigrid::octagrid(spec.edge_length, &mut rng)
            };
            let world = padded_bounds(&window, spec.line_width);
            window.strokes(&grid.edges(world), spec.line_width)
        }
        TilingFamily::FibonacciSquares => render_fibonacci(&window, spec)?,
    };
    let pixels = values.into_iter().map(T::of).collect();
    GrayscaleImage::new(spec.size, pixels)
}

fn padded_bounds(window: &Window, width: f64) -> [f64; 4] {
    let b = window.bounds();
    let m = width + 1.0;
    [b[0] - m, b[1] + m, b[2] - m, b[3] + m]
}

fn reduce(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// White square holes of half-side `0.3 P` centred at `(P/2, P/2)`.
fn render_p4mm(window: &Window, period: f64) -> Vec<f64> {
    let half = 0.3 * period;
    let c = period / 2.0;
    window.fill(|x, y| reduce(x - c, period).abs() < half && reduce(y - c, period).abs() < half)
}

/// Affine operation `x ↦ A x + b` with orthogonal `A` in row-major form.
type Op = ([[f64; 2]; 2], [f64; 2]);

fn p4_ops() -> Vec<Op> {
    vec![
        ([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]),
        ([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0]),
        ([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]),
        ([[0.0, 1.0], [-1.0, 0.0]], [0.0, 0.0]),
    ]
}

/// The quarter turns about the origin plus four glide-type operations with
/// translation `(P/2, P/2)`.
fn p4g_ops(period: f64) -> Vec<Op> {
    let t = period / 2.0;
    let mut ops = p4_ops();
    ops.extend([
        ([[-1.0, 0.0], [0.0, 1.0]], [t, t]),
        ([[1.0, 0.0], [0.0, -1.0]], [t, t]),
        ([[0.0, 1.0], [1.0, 0.0]], [t, t]),
        ([[0.0, -1.0], [-1.0, 0.0]], [t, t]),
    ]);
    ops
}

/// Off-centre bar; its quarter-turn orbit is a pinwheel.
fn pinwheel_bar(u: f64, v: f64) -> bool {
    (0.06..0.40).contains(&u) && (0.03..0.17).contains(&v)
}

/// Bar in general position.
fn glide_bar(u: f64, v: f64) -> bool {
    (0.07..0.29).contains(&u) && (0.04..0.13).contains(&v)
}

/// Black union of the orbit of a motif (given in units of the period) on a
/// white background.
fn render_orbit(window: &Window, period: f64, ops: &[Op], motif: fn(f64, f64) -> bool) -> Vec<f64> {
    let reach = 0.5 * period;
    let inside = |x: f64, y: f64| {
        ops.iter().any(|(a, b)| {
            let qx = reduce(x - b[0], period);
            let qy = reduce(y - b[1], period);
            (-1..=1).any(|ti: i32| {
                (-1..=1).any(|tj: i32| {
                    let dx = qx - ti as f64 * period;
                    let dy = qy - tj as f64 * period;
                    if dx.abs() > reach || dy.abs() > reach {
                        return false;
                    }
                    // Orthogonal inverse is the transpose.
                    let u = a[0][0] * dx + a[1][0] * dy;
                    let v = a[0][1] * dx + a[1][1] * dy;
                    motif(u / period, v / period)
                })
            })
        })
    };
    window.fill(inside).into_iter().map(|c| 1.0 - c).collect()
}

/// Letters of the Fibonacci word (`true` for the long segment) produced by
/// the substitution a → ab, b → a, with at least `len` letters.
fn fibonacci_word(len: usize) -> Vec<bool> {
    let mut word = vec![true];
    while word.len() < len {
        word = word
            .iter()
            .flat_map(|&long| if long { vec![true, false] } else { vec![true] })
            .collect();
    }
    word
}

/// Positions of a Fibonacci line family covering `[lo, hi]`, starting at
/// letter `start` of the word, with the line of that letter at 0.
fn fibonacci_lines(edge: f64, start: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let short = edge / TAU;
    let mean = edge * (1.0 / TAU) + short / (TAU * TAU);
    let ahead = ((hi.max(0.0) / mean) as usize) + 8;
    let word = fibonacci_word(start + ahead);
    let mut pos = 0.0;
    let mut lines = vec![0.0];
    for &long in &word[start..] {
        pos += if long { edge } else { short };
        lines.push(pos);
        if pos > hi {
            break;
        }
    }
    pos = 0.0;
    for &long in word[..start].iter().rev() {
        pos -= if long { edge } else { short };
        lines.push(pos);
        if pos < lo {
            break;
        }
    }
    if pos >= lo && lo < 0.0 {
        return Err(Error::InvalidArgument(
            "window offset lies outside the generated Fibonacci chain".into(),
        ));
    }
    lines.retain(|&p| p >= lo && p <= hi);
    lines.sort_by(f64::total_cmp);
    Ok(lines)
}

fn render_fibonacci(window: &Window, spec: &TilingSpec) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut starts = [0usize; 2];
    for s in &mut starts {
        *s = rng.random_range(2000..6000);
    }
    let b = padded_bounds(window, spec.line_width);
    let xs = fibonacci_lines(spec.edge_length, starts[0], b[0], b[1])?;
    let ys = fibonacci_lines(spec.edge_length, starts[1], b[2], b[3])?;
    let mut segments = Vec::with_capacity(xs.len() + ys.len());
    segments.extend(xs.iter().map(|&x| [[x, b[2]], [x, b[3]]]));
    segments.extend(ys.iter().map(|&y| [[b[0], y], [b[1], y]]));
    Ok(window.strokes(&segments, spec.line_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::cyclic_shift;

    fn render(spec: &TilingSpec) -> GrayscaleImage<f64> {
        generate_tiling(spec).unwrap()
    }

    #[test]
    fn family_names_round_trip() {
        for f in TilingFamily::ALL {
            assert_eq!(f.name().parse::<TilingFamily>().unwrap(), f);
        }
        assert_eq!("p4m".parse::<TilingFamily>().unwrap(), TilingFamily::P4mm);
        assert!(matches!(
            "thue_morse".parse::<TilingFamily>(),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn periodic_images_repeat_with_period() {
        for family in [TilingFamily::P4, TilingFamily::P4mm, TilingFamily::P4g] {
            let img = render(&TilingSpec::new(family, 120).with_period(40.0));
            assert_eq!(cyclic_shift(&img, [40, 0]), img, "{family}");
            assert_eq!(cyclic_shift(&img, [0, 40]), img, "{family}");
            assert_ne!(cyclic_shift(&img, [20, 7]), img, "{family}");
        }
    }

    #[test]
    fn p4mm_is_mirror_symmetric_about_the_origin_pixel() {
        let n = 80;
        let img = render(&TilingSpec::new(TilingFamily::P4mm, n).with_period(40.0));
        let c = n / 2 - 1;
        for i in 0..n {
            for d in 1..30 {
                assert_eq!(img.get(i, c + d), img.get(i, c - d));
            }
        }
    }

    #[test]
    fn p4_is_chiral() {
        let n = 80;
        let img = render(&TilingSpec::new(TilingFamily::P4, n).with_period(40.0));
        let c = n / 2 - 1;
        let mut differ = 0;
        for i in 0..n {
            for d in 1..30 {
                if img.get(i, c + d) != img.get(i, c - d) {
                    differ += 1;
                }
            }
        }
        assert!(differ > 100);
    }

    #[test]
    fn rendering_is_deterministic() {
        for family in TilingFamily::ALL {
            let spec = TilingSpec::new(family, 64).with_edge_length(6.0).with_seed(11);
            assert_eq!(render(&spec), render(&spec), "{family}");
        }
        let a = render(&TilingSpec::new(TilingFamily::Penrose, 64).with_seed(1));
        let b = render(&TilingSpec::new(TilingFamily::Penrose, 64).with_seed(2));
        assert_ne!(a, b);
    }

    #[test]
    fn fibonacci_word_counts() {
        let w = fibonacci_word(20);
        let s: String = w.iter().take(13).map(|&l| if l { 'a' } else { 'b' }).collect();
        assert_eq!(s, "abaababaabaab");
    }

    #[test]
    fn validation() {
        let spec = TilingSpec::new(TilingFamily::Penrose, 64).with_gamma(1.0);
        assert!(generate_tiling::<f64>(&spec).is_err());
        let spec = TilingSpec::new(TilingFamily::P4, 64).with_line_width(0.5);
        assert!(generate_tiling::<f64>(&spec).is_err());
    }

    #[test]
    fn quasiperiodic_images_are_mostly_white() {
        for family in [
            TilingFamily::Penrose,
            TilingFamily::AmmannBeenker,
            TilingFamily::FibonacciSquares,
        ] {
            let img = render(&TilingSpec::new(family, 128).with_edge_length(10.0));
            let mean = img.mean();
            assert!(mean > 0.5 && mean < 0.95, "{family}: {mean}");
        }
    }
}
