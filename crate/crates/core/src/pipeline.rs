//! End-to-end analysis of one image and the persisted session.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frequency, Mat2};
use crate::imaging::GrayscaleImage;
use crate::scalar::Real;
use crate::spectral::{detect_peaks, fft_grid, refine_peak_in, Peak, Taper, TaperedImage, DEFAULT_RADIUS, DEFAULT_TOL};
use crate::symmetry::{
    detect_point_group, module_holohedry, GroupSearch, Holohedry, PointGroup, PointGroupVerdict, Thresholds,
};
use crate::symmorphism::{default_tolerance, test_symmorphism, SymmorphismVerdict};
use crate::zmodule::{build_mselect, fit_basis, index_peaks, matrix_in_basis, symmetrize_basis, IndexingReport, ModuleBasis, TOL_INT, TOL_POS_GRID};

/// Current session schema, `major.minor`.
pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Default peak detection threshold.
pub const DEFAULT_THD: f64 = 0.01;
pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;
/// Largest rotation order considered for the holohedry.
pub const DEFAULT_N_MAX: u32 = 12;
pub const DEFAULT_FIT_PEAKS: usize = 48;
/// Search radius, in cycles, when refining module peaks for the fit.
const FIT_RADIUS: f64 = 0.5;
/// Rounding tolerance, in cycles, when looking for the rotation the refined
/// fundamentals are averaged over.
const TOL_INT_SYMMETRIZE: f64 = 0.25;
/// Distance from an integer, in cycles, below which the fundamentals of a
/// rank-2 module are taken as lattice frequencies of a period dividing the
/// image and rounded.
pub const SNAP_TOL: f64 = 1e-3;

/// `max(1e-4, thd / 10)`.
pub fn default_noise_floor(thd: f64) -> f64 {
    (thd / 10.0).max(1e-4)
}

/// Inputs of one analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisRequest {
    /// Fundamental frequency guesses, refined before use.
    pub basis: Vec<[f64; 2]>,
    pub fl: u32,
    pub thd: f64,
    /// `None` selects [`default_noise_floor`].
    pub noise_floor: Option<f64>,
    pub refine_radius: f64,
    pub refine_tol: f64,
    pub min_coverage: f64,
    pub thresholds: Thresholds,
    /// Starts the descent here instead of at the detected holohedry.
    pub group: Option<PointGroup>,
    /// `None` selects [`default_tolerance`] for the module rank.
    pub symmorphism_tol: Option<f64>,
    pub n_max: u32,
    /// Strongest indexed peaks refined and used to fit the fundamentals by
    /// least squares; 0 keeps the individually refined fundamentals.
    pub fit_peaks: usize,
    /// Taper for every coefficient of the symmetry tests.
    pub taper: Taper,
}

impl Default for AnalysisRequest {
    fn default() -> Self {
        Self {
            basis: Vec::new(),
            fl: 6,
            thd: DEFAULT_THD,
            noise_floor: None,
            refine_radius: DEFAULT_RADIUS,
            refine_tol: DEFAULT_TOL,
            min_coverage: DEFAULT_MIN_COVERAGE,
            thresholds: Thresholds::default(),
            group: None,
            symmorphism_tol: None,
            n_max: DEFAULT_N_MAX,
            fit_peaks: DEFAULT_FIT_PEAKS,
            taper: Taper::default(),
        }
    }
}

impl AnalysisRequest {
    pub fn new(basis: Vec<[f64; 2]>, fl: u32) -> Self {
        Self {
            basis,
            fl,
            ..Self::default()
        }
    }

    pub fn noise_floor(&self) -> f64 {
        self.noise_floor.unwrap_or_else(|| default_noise_floor(self.thd))
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis.is_empty() {
            return Err(Error::InvalidArgument("at least one fundamental guess is required".into()));
        }
        if !(self.thd > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold {} must be positive", self.thd)));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(Error::InvalidArgument(format!(
                "min coverage {} outside [0, 1]",
                self.min_coverage
            )));
        }
        if self.fl == 0 {
            return Err(Error::InvalidArgument("fl must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parses `"k1x,k1y;k2x,k2y;..."`.
pub fn parse_basis(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_pair(p))
        .collect()
}

/// Parses `"x,y"`.
pub fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let bad = || Error::InvalidArgument(format!("expected `x,y`, got `{s}`"));
    let mut it = s.split(',').map(|v| v.trim().parse::<f64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => Ok([x, y]),
        _ => Err(bad()),
    }
}

/// One refined fundamental.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fundamental<T> {
    pub guess: [f64; 2],
    pub k: Frequency<T>,
    pub amplitude: T,
    pub refined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary<T> {
    pub mu: usize,
    pub fundamentals: Vec<Fundamental<T>>,
    /// Refined module peaks the fundamentals were fitted to; 0 when the
    /// individually refined fundamentals are kept.
    #[serde(default)]
    pub fit_observations: usize,
    /// Order of the rotation the fundamentals were averaged over.
    #[serde(default)]
    pub symmetrized_order: Option<u32>,
    /// Fundamentals were rounded to integer frequencies.
    #[serde(default)]
    pub snapped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSelectSummary {
    pub fl: u32,
    pub elements: usize,
    pub dropped_beyond_nyquist: usize,
    pub collisions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

/// Everything an analysis produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session<T> {
    pub schema_version: String,
    pub tool_version: String,
    pub image_path: String,
    pub n: usize,
    pub request: AnalysisRequest,
    pub thd: f64,
    pub noise_floor: f64,
    pub basis: BasisSummary<T>,
    pub fl: u32,
    pub mselect: MSelectSummary,
    pub indexing: IndexingReport<T>,
    pub holohedry: Holohedry,
    pub point_group: PointGroupVerdict<T>,
    pub symmorphism: SymmorphismVerdict<T>,
    /// Human-readable symmorphism decision.
    pub proof_trace: String,
    pub timestamps: Timestamps,
}

impl<T: Real> Session<T> {
    /// `"D4, non-symmorphic"` and the like.
    pub fn verdict(&self) -> String {
        let kind = if self.symmorphism.symmorphic {
            "symmorphic"
        } else {
            "non-symmorphic"
        };
        format!("{}, {kind}", self.point_group.group)
    }

    pub fn basis(&self) -> Result<ModuleBasis<T>> {
        ModuleBasis::new(self.basis.fundamentals.iter().map(|f| f.k).collect())
    }

    /// The session with timestamps cleared, for comparisons.
    pub fn without_timestamps(&self) -> Self {
        let epoch = DateTime::<Utc>::UNIX_EPOCH;
        Self {
            timestamps: Timestamps {
                started: epoch,
                finished: epoch,
            },
            ..self.clone()
        }
    }
}

/// Refines each guess and returns the refined basis.
pub fn refine_basis<T: Real>(
    img: &GrayscaleImage<T>,
    peaks: &[Peak<T>],
    request: &AnalysisRequest,
) -> Result<BasisSummary<T>> {
    let tapered = TaperedImage::new(img, Taper::Hann);
    let tol = T::of(request.refine_tol);
    let mut fundamentals = request
        .basis
        .iter()
        .map(|&g| {
            let guess = Frequency::new(T::of(g[0]), T::of(g[1]));
            let p = refine_peak_in(&tapered, guess, T::of(request.refine_radius), tol)?;
            Ok(Fundamental {
                guess: g,
                k: p.k,
                amplitude: p.amplitude,
                refined: p.refined,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mu = fundamentals.len();
    let mut fit_observations = 0;
    if request.fit_peaks > 0 {
        let mut basis = ModuleBasis::new(fundamentals.iter().map(|f| f.k).collect())?;
        let nyquist = T::of_usize(img.n()) / T::of(2.0);
        for _ in 0..2 {
            let mselect = build_mselect(&basis, request.fl, Some(nyquist - T::of(1.0)))?;
            let mut matched = index_peaks(peaks, &mselect, T::of(TOL_POS_GRID)).matched;
            matched.sort_by(|a, b| b.peak.amplitude.partial_cmp(&a.peak.amplitude).unwrap_or(Ordering::Equal));
            let radius = T::of(FIT_RADIUS);
            let obs: Vec<(Vec<i32>, Frequency<T>)> = matched
                .iter()
                .take(request.fit_peaks)
                .filter_map(|m| {
                    let predicted = basis.frequency_of(&m.element.alpha);
                    let p = refine_peak_in(&tapered, predicted, radius, tol).ok()?;
                    (p.k.distance(predicted) < radius).then(|| (m.element.alpha.clone(), p.k))
                })
                .collect();
            if obs.len() < 2 * mu {
                break;
            }
            match fit_basis(&obs, mu) {
                Ok(fit) => {
                    basis = fit;
                    fit_observations = obs.len();
                }
                Err(e) => {
                    log::warn!("basis fit failed: {e}");
                    break;
                }
            }
        }
        if fit_observations > 0 {
            for (f, &k) in fundamentals.iter_mut().zip(basis.fundamentals()) {
                f.k = k;
                f.amplitude = tapered.amplitude(k);
            }
        }
    }
    Ok(BasisSummary {
        mu,
        fundamentals,
        fit_observations,
        symmetrized_order: None,
        snapped: false,
    })
}

/// The basis averaged over the largest rotation of order `2..=n_max` that
/// maps it into itself up to rounding.
fn symmetrize<T: Real>(basis: &ModuleBasis<T>, n_max: u32) -> Option<(u32, ModuleBasis<T>)> {
    (2..=n_max).rev().find_map(|n| {
        let q = Mat2::rotation_of_order(n);
        let m = matrix_in_basis(&q, basis, TOL_INT_SYMMETRIZE).ok()?.matrix;
        symmetrize_basis(basis, &q, &m).ok().map(|b| (n, b))
    })
}

/// Runs refinement, indexing, holohedry and point group detection and the
/// symmorphism test. Fails with [`Error::InsufficientCoverage`] when too few
/// peaks are indexed.
pub fn analyze<T: Real>(
    img: &GrayscaleImage<T>,
    image_path: &str,
    request: &AnalysisRequest,
) -> Result<Session<T>> {
    request.validate()?;
    let started = Utc::now();
    let n = img.n();
    let grid = fft_grid(img);
    let peaks = detect_peaks(&grid, T::of(request.thd))?;

    let mut summary = refine_basis(img, &peaks, request)?;
    let mut basis = ModuleBasis::new(summary.fundamentals.iter().map(|f| f.k).collect())?;
    if let Some((order, sym)) = symmetrize(&basis, request.n_max) {
        log::info!("fundamentals averaged over the rotation of order {order}");
        for (f, &k) in summary.fundamentals.iter_mut().zip(sym.fundamentals()) {
            f.k = k;
        }
        summary.symmetrized_order = Some(order);
        basis = sym;
    }
    if basis.mu() <= 2 && basis.is_commensurate(SNAP_TOL) {
        let rounded: Vec<Frequency<T>> = basis
            .fundamentals()
            .iter()
            .map(|k| Frequency::new(k.x.round(), k.y.round()))
            .collect();
        for (f, &k) in summary.fundamentals.iter_mut().zip(&rounded) {
            f.k = k;
        }
        summary.snapped = true;
        basis = ModuleBasis::new(rounded)?;
    }
    let nyquist = T::of_usize(n) / T::of(2.0);
    let mselect = build_mselect(&basis, request.fl, Some(nyquist))?;
    let indexing = index_peaks(&peaks, &mselect, T::of(TOL_POS_GRID));
    log::info!(
        "indexed {}/{} peaks ({:.3})",
        indexing.matched.len(),
        indexing.matched.len() + indexing.unmatched_peaks.len(),
        indexing.coverage
    );
    if indexing.coverage < request.min_coverage {
        return Err(Error::InsufficientCoverage {
            coverage: indexing.coverage,
            required: request.min_coverage,
        });
    }

    let candidates: Vec<Frequency<T>> = mselect.elements.iter().map(|e| e.k).collect();
    let holohedry = module_holohedry(&basis, &candidates, request.n_max, TOL_INT);
    let start = match request.group {
        Some(g) => Holohedry {
            group: g,
            mirror_axis: holohedry.mirror_axis.or(g.is_dihedral().then_some(0.0)),
        },
        None => holohedry,
    };
    log::info!("holohedry {} (axis {:?})", holohedry.group, holohedry.mirror_axis);
    let noise_floor = request.noise_floor();
    let search = GroupSearch {
        thresholds: request.thresholds,
        noise_floor,
        tol_int: TOL_INT,
        taper: request.taper,
    };
    let point_group = detect_point_group(img, &basis, &mselect, &start, &search);
    let tol = request.symmorphism_tol.unwrap_or_else(|| default_tolerance(basis.mu()));
    let symmorphism = test_symmorphism(&point_group, &basis, tol)?;
    let proof_trace = symmorphism.proof_trace();
    Ok(Session {
        schema_version: SCHEMA_VERSION.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        image_path: image_path.to_string(),
        n,
        request: request.clone(),
        thd: request.thd,
        noise_floor,
        fl: request.fl,
        mselect: MSelectSummary {
            fl: mselect.fl,
            elements: mselect.elements.len(),
            dropped_beyond_nyquist: mselect.dropped_beyond_nyquist,
            collisions: mselect.collisions,
        },
        basis: summary,
        indexing,
        holohedry,
        point_group,
        symmorphism,
        proof_trace,
        timestamps: Timestamps {
            started,
            finished: Utc::now(),
        },
    })
}

/// Session JSON with every float written to 17 significant digits.
pub fn session_to_json<T: Real>(session: &Session<T>) -> Result<String> {
    let mut buf = Vec::new();
    write_json(session, &mut buf)?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// Serializes any value with 17-digit floats, pretty-printed.
pub fn write_json<S: Serialize, W: Write>(value: &S, out: W) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(out, Digits17::default());
    value.serialize(&mut ser)?;
    Ok(())
}

#[derive(Default)]
struct Digits17 {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value == 0.0 {
            w.write_all(b"0.0")
        } else {
            write!(w, "{value:.16e}")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

/// Parses a session, rejecting unknown schema majors.
pub fn session_from_json<T: Real>(text: &str) -> Result<Session<T>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Schema("missing".into()))?;
    let major = |v: &str| v.split('.').next().map(str::to_owned);
    if major(version) != major(SCHEMA_VERSION) {
        return Err(Error::Schema(version.to_string()));
    }
    Ok(serde_json::from_value(value)?)
}

pub fn save_session<T: Real>(session: &Session<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_json(session, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_session<T: Real>(path: &Path) -> Result<Session<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    session_from_json(&text)
}
