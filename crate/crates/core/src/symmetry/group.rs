//! Holohedry detection and point group descent.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{test_generator_with, DeviationReport, ElementSpectrum, GeneratorTest};
use crate::error::{Error, Result};
use crate::geometry::{Frequency, Mat2};
use crate::imaging::GrayscaleImage;
use crate::scalar::Real;
use crate::spectral::{Peak, Taper};
use crate::zmodule::{matrix_in_basis, MSelect, ModuleBasis, TOL_INT};

/// A finite subgroup of O(2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PointGroup {
    /// `Z_N`: rotations only.
    Cyclic(u32),
    /// `D_N`: `N` rotations and `N` mirrors.
    Dihedral(u32),
}

impl PointGroup {
    pub fn rotation_order(self) -> u32 {
        match self {
            Self::Cyclic(n) | Self::Dihedral(n) => n,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Self::Cyclic(n) => n,
            Self::Dihedral(n) => 2 * n,
        }
    }

    pub fn is_dihedral(self) -> bool {
        matches!(self, Self::Dihedral(_))
    }

    /// `self ⊆ other` up to conjugation by rotations.
    pub fn is_subgroup_of(self, other: PointGroup) -> bool {
        let divides = other.rotation_order() % self.rotation_order() == 0;
        divides && (!self.is_dihedral() || other.is_dihedral())
    }

    /// All subgroups by decreasing order, dihedral first among equals.
    pub fn descent(self) -> Vec<PointGroup> {
        let n = self.rotation_order();
        let mut out = Vec::new();
        for m in (1..=n).filter(|m| n % m == 0) {
            if self.is_dihedral() {
                out.push(Self::Dihedral(m));
            }
            out.push(Self::Cyclic(m));
        }
        out.sort_by(|a, b| {
            b.order()
                .cmp(&a.order())
                .then(b.is_dihedral().cmp(&a.is_dihedral()))
        });
        out
    }
}

impl fmt::Display for PointGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cyclic(n) => write!(f, "Z{n}"),
            Self::Dihedral(n) => write!(f, "D{n}"),
        }
    }
}

impl From<PointGroup> for String {
    fn from(g: PointGroup) -> Self {
        g.to_string()
    }
}

impl TryFrom<String> for PointGroup {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for PointGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown point group `{s}`"));
        let (kind, digits) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let n: u32 = digits.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "D" | "d" => Ok(Self::Dihedral(n)),
            "Z" | "z" | "C" | "c" => Ok(Self::Cyclic(n)),
            _ => Err(bad()),
        }
    }
}

/// Symmetry group of the peak positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holohedry {
    pub group: PointGroup,
    /// Angle of one reflection axis in `[0, π/N)`, for dihedral groups.
    pub mirror_axis: Option<f64>,
}

fn maps_into(q: &Mat2, from: &[Frequency<f64>], into: &[Frequency<f64>], tol: f64) -> bool {
    from.iter().all(|&k| {
        let qk = q.apply(k);
        into.iter().any(|&p| p.distance(qk) <= tol)
    })
}

/// Largest `N ≤ n_max` whose rotation maps the peak set into itself within
/// `tol_pos`, with a mirror check over candidate axes.
pub fn detect_holohedry<T: Real>(peaks: &[Peak<T>], n_max: u32, tol_pos: f64) -> Result<Holohedry> {
    detect_holohedry_in(peaks, peaks, n_max, tol_pos)
}

/// As [`detect_holohedry`], with images of `peaks` matched against
/// `targets`. Passing the peaks of a lower threshold as targets keeps peaks
/// just above the threshold from failing on partners just below it.
pub fn detect_holohedry_in<T: Real>(
    peaks: &[Peak<T>],
    targets: &[Peak<T>],
    n_max: u32,
    tol_pos: f64,
) -> Result<Holohedry> {
    let pts: Vec<Frequency<f64>> = peaks.iter().filter(|p| !p.is_dc).map(|p| p.k.cast()).collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPeaks {
            needed: 3,
            found: pts.len(),
        });
    }
    let mut into: Vec<Frequency<f64>> = targets.iter().filter(|p| !p.is_dc).map(|p| p.k.cast()).collect();
    into.extend(pts.iter().copied());
    let n = (1..=n_max.max(1))
        .rev()
        .find(|&n| maps_into(&Mat2::rotation_of_order(n), &pts, &into, tol_pos))
        .unwrap_or(1);
    let mut axes = vec![0.0];
    let strongest: Vec<Frequency<f64>> = pts.iter().take(12).copied().collect();
    for p in &strongest {
        axes.push(p.angle());
        for q in &strongest {
            if (q.norm() - p.norm()).abs() <= tol_pos {
                axes.push(0.5 * (p.angle() + q.angle()));
            }
        }
    }
    let mirror_axis = axes
        .into_iter()
        .find(|&a| maps_into(&Mat2::mirror(a), &pts, &into, tol_pos))
        .map(|a| normalize_axis(a, n));
    Ok(Holohedry {
        group: if mirror_axis.is_some() {
            PointGroup::Dihedral(n)
        } else {
            PointGroup::Cyclic(n)
        },
        mirror_axis,
    })
}

fn normalize_axis(a: f64, n: u32) -> f64 {
    let step = PI / n as f64;
    let r = a.rem_euclid(step);
    if step - r < 1e-9 {
        0.0
    } else {
        r
    }
}

/// Symmetry group of the module spanned by `basis`: the largest `N ≤ n_max`
/// whose rotation has an integer matrix within `tol_int`, and a reflection
/// with the same property if one exists. Reflection axes are sought among
/// the bisectors of the first fundamental and the `candidates` of equal
/// length.
pub fn module_holohedry<T: Real>(
    basis: &ModuleBasis<T>,
    candidates: &[Frequency<T>],
    n_max: u32,
    tol_int: f64,
) -> Holohedry {
    let stable = |q: &Mat2| matrix_in_basis(q, basis, tol_int).is_ok();
    let n = (1..=n_max.max(1))
        .rev()
        .find(|&n| stable(&Mat2::rotation_of_order(n)))
        .unwrap_or(1);
    let k1: Frequency<f64> = basis.fundamentals()[0].cast();
    let mut axes = vec![0.0, k1.angle()];
    for e in candidates {
        let e: Frequency<f64> = e.cast();
        if (e.norm() - k1.norm()).abs() <= tol_int {
            axes.push(0.5 * (k1.angle() + e.angle()));
        }
    }
    let mirror_axis = axes
        .into_iter()
        .find(|&a| stable(&Mat2::mirror(a)))
        .map(|a| normalize_axis(a, n));
    Holohedry {
        group: if mirror_axis.is_some() {
            PointGroup::Dihedral(n)
        } else {
            PointGroup::Cyclic(n)
        },
        mirror_axis,
    }
}

/// Acceptance thresholds on the overall deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub mirror: f64,
    pub rotation: f64,
    /// Minimum fraction of elements below the threshold.
    pub acceptance_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            mirror: 0.03,
            rotation: 0.114,
            acceptance_fraction: 0.85,
        }
    }
}

/// Outcome of one candidate group in the descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub group: PointGroup,
    pub accepted: bool,
    /// `(label, fraction_below)` per generator.
    pub generators: Vec<(String, f64)>,
    /// Generators that could not be tested, with the reason.
    pub errors: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointGroupVerdict<T> {
    pub group: PointGroup,
    pub holohedry: PointGroup,
    pub accepted_generators: Vec<String>,
    /// Reports of the generators of `group`, rotation first.
    pub reports: Vec<DeviationReport<T>>,
    /// Reports of tested generators that are not part of the verdict.
    #[serde(default = "Vec::new")]
    pub rejected: Vec<DeviationReport<T>>,
    pub thresholds: Thresholds,
    pub candidates: Vec<CandidateOutcome>,
}

impl<T: Real> PointGroupVerdict<T> {
    pub fn rotation_report(&self) -> Option<&DeviationReport<T>> {
        self.reports.iter().find(|r| r.axis.is_none())
    }

    pub fn mirror_report(&self) -> Option<&DeviationReport<T>> {
        self.reports.iter().find(|r| r.axis.is_some())
    }
}

/// Options for [`detect_point_group`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSearch {
    pub thresholds: Thresholds,
    pub noise_floor: f64,
    pub tol_int: f64,
    #[serde(default)]
    pub taper: Taper,
}

impl GroupSearch {
    pub fn new(thresholds: Thresholds, noise_floor: f64) -> Self {
        Self {
            thresholds,
            noise_floor,
            tol_int: TOL_INT,
            taper: Taper::default(),
        }
    }
}

enum Tested<T> {
    Report(Box<DeviationReport<T>>),
    Failed(String),
}

impl<T: Real> Tested<T> {
    fn fraction(&self, threshold: f64) -> f64 {
        match self {
            Tested::Report(r) => r.fraction_below(threshold),
            Tested::Failed(_) => 0.0,
        }
    }

    fn error(&self) -> Option<String> {
        match self {
            Tested::Report(_) => None,
            Tested::Failed(e) => Some(e.clone()),
        }
    }
}

struct Search<'a, T> {
    basis: &'a ModuleBasis<T>,
    mselect: &'a MSelect<T>,
    spectrum: ElementSpectrum<T>,
    options: GroupSearch,
    rotations: BTreeMap<u32, Tested<T>>,
    mirror: Option<Tested<T>>,
}

impl<T: Real> Search<'_, T> {
    fn run(&self, q: &Mat2, label: &str, axis: Option<f64>, threshold: f64) -> Tested<T> {
        let options = GeneratorTest {
            noise_floor: self.options.noise_floor,
            tol_int: self.options.tol_int,
            threshold,
            taper: self.options.taper,
        };
        match test_generator_with(&self.spectrum, q, self.basis, self.mselect, &options, label, axis) {
            Ok(r) => Tested::Report(Box::new(r)),
            Err(e) => {
                log::info!("generator {label} not testable: {e}");
                Tested::Failed(e.to_string())
            }
        }
    }

    fn rotation(&mut self, m: u32) -> &Tested<T> {
        if !self.rotations.contains_key(&m) {
            let t = self.run(
                &Mat2::rotation_of_order(m),
                &format!("r{m}"),
                None,
                self.options.thresholds.rotation,
            );
            self.rotations.insert(m, t);
        }
        &self.rotations[&m]
    }

    /// Best of the `n` reflection axes `θ0 + πm/n`.
    fn mirror(&mut self, theta0: f64, n: u32) -> &Tested<T> {
        if self.mirror.is_none() {
            let thr = self.options.thresholds.mirror;
            let mut best: Option<Tested<T>> = None;
            for m in 0..n {
                let axis = theta0 + PI * m as f64 / n as f64;
                let t = self.run(&Mat2::mirror(axis), "h", Some(axis), thr);
                let better = match (&best, &t) {
                    (None, _) => true,
                    (Some(Tested::Failed(_)), Tested::Report(_)) => true,
                    (Some(Tested::Report(b)), Tested::Report(r)) => {
                        let (fb, fr) = (b.fraction_below(thr), r.fraction_below(thr));
                        fr > fb || (fr == fb && r.max() < b.max())
                    }
                    _ => false,
                };
                if better {
                    best = Some(t);
                }
            }
            self.mirror = best;
        }
        self.mirror.as_ref().expect("at least one axis")
    }
}

/// Descends from the holohedry to the largest group whose generators all
/// satisfy the acceptance rule. `Z1` is always accepted.
pub fn detect_point_group<T: Real>(
    img: &GrayscaleImage<T>,
    basis: &ModuleBasis<T>,
    mselect: &MSelect<T>,
    holohedry: &Holohedry,
    options: &GroupSearch,
) -> PointGroupVerdict<T> {
    let mut search = Search {
        basis,
        mselect,
        spectrum: ElementSpectrum::compute(img, basis, mselect, options.taper),
        options: *options,
        rotations: BTreeMap::new(),
        mirror: None,
    };
    let th = options.thresholds;
    let n = holohedry.group.rotation_order();
    let theta0 = holohedry.mirror_axis.unwrap_or(0.0);
    let mut candidates = Vec::new();
    for group in holohedry.group.descent() {
        let m = group.rotation_order();
        let mut generators = Vec::new();
        let mut errors = Vec::new();
        let mut accepted = true;
        if m > 1 {
            let t = search.rotation(m);
            let f = t.fraction(th.rotation);
            errors.extend(t.error().map(|e| (format!("r{m}"), e)));
            generators.push((format!("r{m}"), f));
            accepted &= f >= th.acceptance_fraction;
        }
        if group.is_dihedral() {
            let t = search.mirror(theta0, n);
            let f = t.fraction(th.mirror);
            errors.extend(t.error().map(|e| ("h".to_string(), e)));
            generators.push(("h".to_string(), f));
            accepted &= f >= th.acceptance_fraction;
        }
        candidates.push(CandidateOutcome {
            group,
            accepted,
            generators: generators.clone(),
            errors,
        });
        if accepted {
            let mut reports = Vec::new();
            if m > 1 {
                if let Tested::Report(r) = search.rotation(m) {
                    reports.push((**r).clone());
                }
            }
            if group.is_dihedral() {
                if let Tested::Report(r) = search.mirror(theta0, n) {
                    reports.push((**r).clone());
                }
            }
            let mut rejected: Vec<DeviationReport<T>> = search
                .rotations
                .values()
                .chain(search.mirror.as_ref())
                .filter_map(|t| match t {
                    Tested::Report(r) => Some((**r).clone()),
                    Tested::Failed(_) => None,
                })
                .filter(|r| !reports.iter().any(|a| a.label == r.label))
                .collect();
            rejected.sort_by_key(|r| r.label != "h");
            return PointGroupVerdict {
                group,
                holohedry: holohedry.group,
                accepted_generators: generators.into_iter().map(|g| g.0).collect(),
                reports,
                rejected,
                thresholds: th,
                candidates,
            };
        }
    }
    unreachable!("Z1 closes every descent")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(x: f64, y: f64) -> Peak<f64> {
        Peak {
            k: Frequency::new(x, y),
            amplitude: 1.0,
            refined: true,
            is_dc: false,
        }
    }

    fn ring(count: usize, radius: f64, phase: f64) -> Vec<Peak<f64>> {
        (0..count)
            .map(|j| {
                let t = phase + std::f64::consts::TAU * j as f64 / count as f64;
                peak(radius * t.cos(), radius * t.sin())
            })
            .collect()
    }

    #[test]
    fn descent_order() {
        let d = PointGroup::Dihedral(10).descent();
        let names: Vec<String> = d.iter().map(|g| g.to_string()).collect();
        assert_eq!(names, ["D10", "D5", "Z10", "Z5", "D2", "D1", "Z2", "Z1"]);
        assert_eq!(PointGroup::Cyclic(4).descent(), vec![
            PointGroup::Cyclic(4),
            PointGroup::Cyclic(2),
            PointGroup::Cyclic(1)
        ]);
        assert!(PointGroup::Dihedral(5).is_subgroup_of(PointGroup::Dihedral(10)));
        assert!(!PointGroup::Dihedral(4).is_subgroup_of(PointGroup::Cyclic(8)));
    }

    #[test]
    fn names_parse() {
        assert_eq!("D10".parse::<PointGroup>().unwrap(), PointGroup::Dihedral(10));
        assert_eq!("Z4".parse::<PointGroup>().unwrap(), PointGroup::Cyclic(4));
        assert!("Q3".parse::<PointGroup>().is_err());
        assert!("D0".parse::<PointGroup>().is_err());
    }

    #[test]
    fn square_lattice_is_d4() {
        let mut peaks = Vec::new();
        for a in -3i32..=3 {
            for b in -3i32..=3 {
                if (a, b) != (0, 0) {
                    peaks.push(peak(10.0 * a as f64, 10.0 * b as f64));
                }
            }
        }
        let h = detect_holohedry(&peaks, 12, 0.1).unwrap();
        assert_eq!(h.group, PointGroup::Dihedral(4));
        assert_eq!(h.mirror_axis, Some(0.0));
    }

    #[test]
    fn decagonal_ring_is_d10() {
        let mut peaks = ring(10, 16.0, 0.0);
        peaks.extend(ring(10, 16.0 * 1.618_033_988_749_895, 0.0));
        let h = detect_holohedry(&peaks, 12, 0.05).unwrap();
        assert_eq!(h.group, PointGroup::Dihedral(10));
    }

    #[test]
    fn pair_is_d2() {
        let peaks = [peak(5.0, 2.0), peak(-5.0, -2.0), peak(0.0, 0.0)];
        assert!(matches!(
            detect_holohedry(&peaks[..2], 12, 0.1),
            Err(Error::TooFewPeaks { .. })
        ));
        let mut p = peaks.to_vec();
        p.push(peak(10.0, 4.0));
        p.push(peak(-10.0, -4.0));
        let h = detect_holohedry(&p, 12, 0.1).unwrap();
        assert_eq!(h.group, PointGroup::Dihedral(2));
    }

    #[test]
    fn module_symmetry() {
        let square = ModuleBasis::new(vec![Frequency::new(15.0, 0.0), Frequency::new(0.0, 15.0)]).unwrap();
        let h = module_holohedry(&square, &[], 12, 0.05);
        assert_eq!(h.group, PointGroup::Dihedral(4));
        let skew = ModuleBasis::new(vec![Frequency::new(10.0, 10.0), Frequency::new(20.0, 10.0)]).unwrap();
        let e = [Frequency::new(10.0, -10.0)];
        assert_eq!(module_holohedry(&skew, &e, 12, 0.05).group, PointGroup::Dihedral(4));
        let oblique = ModuleBasis::new(vec![Frequency::new(10.0, 0.0), Frequency::new(3.0, 7.3)]).unwrap();
        assert_eq!(module_holohedry(&oblique, &[], 12, 0.05).group, PointGroup::Cyclic(2));
        let penta: Vec<Frequency<f64>> = (0..4)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / 5.0;
                Frequency::new(16.0 * t.cos(), 16.0 * t.sin())
            })
            .collect();
        let h = module_holohedry(&ModuleBasis::new(penta).unwrap(), &[], 12, 0.05);
        assert_eq!(h.group, PointGroup::Dihedral(10));
    }

    #[test]
    fn chiral_set_is_cyclic() {
        let mut peaks = ring(4, 10.0, 0.0);
        peaks.extend(ring(4, 17.0, 0.3));
        let h = detect_holohedry(&peaks, 12, 0.05).unwrap();
        assert_eq!(h.group, PointGroup::Cyclic(4));
        assert_eq!(h.mirror_axis, None);
    }
}
