//! Gauge functions and the symmorphism decision.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{frac, mod1_distance, Cycle, Real};
use crate::symmetry::{extrapolate, PhaseFunctionSamples, PhaseSample, PointGroup, PointGroupVerdict};
use crate::zmodule::{matrix_in_basis, IntMatrix, ModuleBasis, TOL_INT};

/// Largest rank for which the `2^μ` candidates are enumerated.
pub const MAX_GAUGE_RANK: usize = 20;
/// Nullification tolerance for quasiperiodic inputs.
pub const TOL_QUASIPERIODIC: f64 = 0.05;
/// Nullification tolerance for periodic inputs.
pub const TOL_PERIODIC: f64 = 0.01;

/// Default tolerance for a module of rank `mu`.
pub fn default_tolerance(mu: usize) -> f64 {
    if mu <= 2 {
        TOL_PERIODIC
    } else {
        TOL_QUASIPERIODIC
    }
}

/// A gauge-linear function `χ`, stored by its values on the fundamentals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction<C> {
    pub fundamental_values: Vec<C>,
}

impl<C: Cycle> GaugeFunction<C> {
    /// Values are reduced to `[0, 1)`.
    pub fn new(values: Vec<C>) -> Self {
        Self {
            fundamental_values: values.into_iter().map(frac).collect(),
        }
    }

    pub fn zero(mu: usize) -> Self {
        Self {
            fundamental_values: vec![C::zero(); mu],
        }
    }

    pub fn mu(&self) -> usize {
        self.fundamental_values.len()
    }

    /// `χ(Σ α_i k_i) = Σ α_i χ(k_i)` mod 1.
    pub fn eval(&self, alpha: &[i32]) -> C {
        extrapolate(&self.fundamental_values, alpha)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.fundamental_values
                .iter()
                .zip(&other.fundamental_values)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        Self::new(self.fundamental_values.iter().map(|&a| -a).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.fundamental_values.iter().all(|v| *v == C::zero())
    }
}

/// `(v1, v2, ...)` with four decimals, values just below 1 shown as 0.
fn format_cycles<C: Cycle>(values: &[C]) -> String {
    let cells: Vec<String> = values
        .iter()
        .map(|v| {
            let x = v.to_float();
            format!("{:.4}", if x > 1.0 - 5e-5 { 0.0 } else { x })
        })
        .collect();
    format!("({})", cells.join(", "))
}

impl<C: Cycle> fmt::Display for GaugeFunction<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_cycles(&self.fundamental_values))
    }
}

/// `(M^m)ᵀ φ` without reduction.
fn transpose_apply<C: Cycle>(m: &IntMatrix, phi: &[C]) -> Vec<C> {
    (0..m.size())
        .map(|i| {
            (0..m.size()).fold(C::zero(), |acc, j| acc + phi[j] * C::from_int(m.get(j, i)))
        })
        .collect()
}

/// `χ_r` from the fundamental phases of a rotation of even order `n` with
/// matrix `m_r`.
pub fn chi_r_fundamentals<C: Cycle>(phi_r: &[C], m_r: &IntMatrix, n: u32) -> Result<GaugeFunction<C>> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("rotation order {n} is not even")));
    }
    if phi_r.len() != m_r.size() {
        return Err(Error::InvalidArgument(format!(
            "{} phases for a rank-{} matrix",
            phi_r.len(),
            m_r.size()
        )));
    }
    let mut sum = vec![C::zero(); phi_r.len()];
    let mut power = IntMatrix::identity(m_r.size());
    for step in 0..n {
        let term = transpose_apply(&power, phi_r);
        for (s, t) in sum.iter_mut().zip(term) {
            *s = if step < n / 2 { *s + t } else { *s - t };
        }
        power = power.mul(m_r);
    }
    let quarter = C::one() / C::from_int(4);
    Ok(GaugeFunction::new(sum.into_iter().map(|s| s * quarter).collect()))
}

/// `χ_r` for measured rotation phases.
pub fn chi_r<T: Real>(phi_r: &PhaseFunctionSamples<T>, n: u32, basis: &ModuleBasis<T>) -> Result<GaugeFunction<T>> {
    let m = matrix_in_basis(&phi_r.generator, basis, TOL_INT)?.matrix;
    chi_r_fundamentals(&phi_r.fundamental_phases, &m, n)
}

/// All gauge functions with values in `{0, ½}`, lexicographic with the
/// first fundamental most significant.
pub fn enumerate_chi_h<C: Cycle>(mu: usize) -> Result<Vec<GaugeFunction<C>>> {
    if mu > MAX_GAUGE_RANK {
        return Err(Error::InvalidArgument(format!(
            "rank {mu} exceeds the gauge enumeration cap {MAX_GAUGE_RANK}"
        )));
    }
    Ok((0..1usize << mu)
        .map(|idx| GaugeFunction {
            fundamental_values: (0..mu)
                .map(|i| {
                    if idx >> (mu - 1 - i) & 1 == 1 {
                        C::half()
                    } else {
                        C::zero()
                    }
                })
                .collect(),
        })
        .collect())
}

/// `[Φ'] = [Φ] + (M − I)ᵀ [χ]` mod 1.
pub fn apply_gauge_fundamentals<C: Cycle>(phi: &[C], chi: &GaugeFunction<C>, m: &IntMatrix) -> Vec<C> {
    let shift = transpose_apply(m, &chi.fundamental_values);
    phi.iter()
        .zip(shift)
        .zip(&chi.fundamental_values)
        .map(|((&p, s), &c)| frac(p + s - c))
        .collect()
}

/// `Φ'(k) = Φ(k) + χ(Qk − k)` on the fundamentals and on every sample.
pub fn apply_gauge<T: Real>(
    phi: &PhaseFunctionSamples<T>,
    chi: &GaugeFunction<T>,
    basis: &ModuleBasis<T>,
) -> Result<PhaseFunctionSamples<T>> {
    if chi.mu() != basis.mu() {
        return Err(Error::InvalidArgument(format!(
            "gauge of rank {} on a rank-{} module",
            chi.mu(),
            basis.mu()
        )));
    }
    let m = matrix_in_basis(&phi.generator, basis, TOL_INT)?.matrix;
    let samples = phi
        .samples
        .iter()
        .map(|s| {
            let diff: Vec<i32> = m.apply(&s.alpha).iter().zip(&s.alpha).map(|(a, b)| a - b).collect();
            PhaseSample {
                alpha: s.alpha.clone(),
                phase: frac(s.phase + chi.eval(&diff)),
            }
        })
        .collect();
    Ok(PhaseFunctionSamples {
        generator: phi.generator,
        fundamental_phases: apply_gauge_fundamentals(&phi.fundamental_phases, chi, &m),
        samples,
        skipped: phi.skipped.clone(),
    })
}

/// One row of the candidate table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeCandidate<C> {
    pub chi_h: GaugeFunction<C>,
    pub chi: GaugeFunction<C>,
    pub rotation_phases: Vec<C>,
    pub mirror_phases: Vec<C>,
    pub rotation_residual: f64,
    pub mirror_residual: f64,
    pub accepted: bool,
}

impl<C> GaugeCandidate<C> {
    fn residual(&self) -> f64 {
        self.rotation_residual.max(self.mirror_residual)
    }
}

/// Inputs and candidate table of one decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmorphismTrace<C> {
    pub rotation_order: u32,
    pub rotation_matrix: IntMatrix,
    pub mirror_matrix: IntMatrix,
    pub rotation_phases: Vec<C>,
    pub mirror_phases: Vec<C>,
    pub chi_r: GaugeFunction<C>,
    pub tol: f64,
    pub candidates: Vec<GaugeCandidate<C>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmorphismVerdict<C> {
    /// Whether the point group admits non-symmorphic space groups.
    pub applicable: bool,
    pub symmorphic: bool,
    pub witness: Option<GaugeFunction<C>>,
    /// `(generator, residual)` for the witness, or for the closest candidate
    /// when none was accepted.
    pub residuals: Vec<(String, f64)>,
    pub trace: Option<SymmorphismTrace<C>>,
}

impl<C: Cycle> SymmorphismVerdict<C> {
    fn forced() -> Self {
        Self {
            applicable: false,
            symmorphic: true,
            witness: None,
            residuals: Vec::new(),
            trace: None,
        }
    }

    /// Multi-line summary of the decision in the style of a worked example.
    pub fn proof_trace(&self) -> String {
        let mut out = String::new();
        let Some(t) = &self.trace else {
            let _ = writeln!(out, "point group admits only symmorphic space groups");
            return out;
        };
        let _ = writeln!(out, "M_r (order {}) = {}", t.rotation_order, t.rotation_matrix);
        let _ = writeln!(out, "M_h = {}", t.mirror_matrix);
        let _ = writeln!(out, "[Phi_r] = {}", format_cycles(&t.rotation_phases));
        let _ = writeln!(out, "[Phi_h] = {}", format_cycles(&t.mirror_phases));
        let _ = writeln!(out, "chi_r = {}", t.chi_r);
        let _ = writeln!(out, "tolerance = {}", t.tol);
        let _ = writeln!(out, "chi_h | [Phi_r'] | [Phi_h'] | residual | accepted");
        for c in &t.candidates {
            let _ = writeln!(
                out,
                "{} | {} | {} | {:.4} | {}",
                c.chi_h,
                format_cycles(&c.rotation_phases),
                format_cycles(&c.mirror_phases),
                c.residual(),
                if c.accepted { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            out,
            "verdict: {}",
            if self.symmorphic { "symmorphic" } else { "non-symmorphic" }
        );
        out
    }
}

fn max_residual<C: Cycle>(phases: &[C]) -> f64 {
    phases
        .iter()
        .map(|&p| mod1_distance(p, C::zero()).to_float())
        .fold(0.0, f64::max)
}

fn admits_nonsymmorphism(group: PointGroup) -> bool {
    matches!(group, PointGroup::Dihedral(n) if n % 2 == 0)
}

/// Decision from fundamental phases and integer matrices of the two
/// generators of `group`.
pub fn decide_symmorphism<C: Cycle>(
    group: PointGroup,
    phi_r: &[C],
    m_r: &IntMatrix,
    phi_h: &[C],
    m_h: &IntMatrix,
    tol: f64,
) -> Result<SymmorphismVerdict<C>> {
    if !admits_nonsymmorphism(group) {
        return Ok(SymmorphismVerdict::forced());
    }
    let n = group.rotation_order();
    let mu = m_r.size();
    if phi_r.len() != mu || phi_h.len() != mu || m_h.size() != mu {
        return Err(Error::InvalidArgument("generator data of mismatched rank".into()));
    }
    let chi_r = chi_r_fundamentals(phi_r, m_r, n)?;
    let mut candidates = Vec::with_capacity(1 << mu);
    for chi_h in enumerate_chi_h::<C>(mu)? {
        let chi = chi_r.add(&chi_h);
        let rotation_phases = apply_gauge_fundamentals(phi_r, &chi, m_r);
        let mirror_phases = apply_gauge_fundamentals(phi_h, &chi, m_h);
        let rotation_residual = max_residual(&rotation_phases);
        let mirror_residual = max_residual(&mirror_phases);
        let accepted = rotation_residual < tol && mirror_residual < tol;
        candidates.push(GaugeCandidate {
            chi_h,
            chi,
            rotation_phases,
            mirror_phases,
            rotation_residual,
            mirror_residual,
            accepted,
        });
    }
    let chosen = candidates.iter().find(|c| c.accepted).or_else(|| {
        candidates
            .iter()
            .min_by(|a, b| a.residual().total_cmp(&b.residual()))
    });
    let chosen = chosen.expect("at least one candidate");
    let symmorphic = chosen.accepted;
    let verdict = SymmorphismVerdict {
        applicable: true,
        symmorphic,
        witness: symmorphic.then(|| chosen.chi.clone()),
        residuals: vec![
            (format!("r{n}"), chosen.rotation_residual),
            ("h".to_string(), chosen.mirror_residual),
        ],
        trace: None,
    };
    Ok(SymmorphismVerdict {
        trace: Some(SymmorphismTrace {
            rotation_order: n,
            rotation_matrix: m_r.clone(),
            mirror_matrix: m_h.clone(),
            rotation_phases: phi_r.to_vec(),
            mirror_phases: phi_h.to_vec(),
            chi_r,
            tol,
            candidates,
        }),
        ..verdict
    })
}

/// Symmorphism of the space group behind a point group verdict, using the
/// phase functions stored in its generator reports.
pub fn test_symmorphism<T: Real>(
    verdict: &PointGroupVerdict<T>,
    basis: &ModuleBasis<T>,
    tol: f64,
) -> Result<SymmorphismVerdict<T>> {
    if !admits_nonsymmorphism(verdict.group) {
        return Ok(SymmorphismVerdict::forced());
    }
    let missing = |g: &str| Error::MissingPhase(format!("no phase data for generator {g} of {}", verdict.group));
    let r = verdict.rotation_report().ok_or_else(|| missing("r"))?;
    let h = verdict.mirror_report().ok_or_else(|| missing("h"))?;
    test_symmorphism_with(verdict.group, &r.phases, &h.phases, basis, tol)
}

/// As [`test_symmorphism`] with explicit phase functions.
pub fn test_symmorphism_with<T: Real>(
    group: PointGroup,
    phi_r: &PhaseFunctionSamples<T>,
    phi_h: &PhaseFunctionSamples<T>,
    basis: &ModuleBasis<T>,
    tol: f64,
) -> Result<SymmorphismVerdict<T>> {
    if !admits_nonsymmorphism(group) {
        return Ok(SymmorphismVerdict::forced());
    }
    let m_r = matrix_in_basis(&phi_r.generator, basis, TOL_INT)?.matrix;
    let m_h = matrix_in_basis(&phi_h.generator, basis, TOL_INT)?.matrix;
    decide_symmorphism(group, &phi_r.fundamental_phases, &m_r, &phi_h.fundamental_phases, &m_h, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    fn m(rows: &[[i64; 2]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn appendix() -> (IntMatrix, IntMatrix) {
        // Basis (1,1), (2,1): quarter turn and the mirror y -> -y.
        (m(&[[3, 5], [-2, -3]]), m(&[[-3, -4], [2, 3]]))
    }

    #[test]
    fn zero_rotation_phase_gives_zero_chi() {
        let (mr, _) = appendix();
        let chi = chi_r_fundamentals(&[q(0, 1), q(0, 1)], &mr, 4).unwrap();
        assert!(chi.is_zero());
        assert!(chi_r_fundamentals(&[q(0, 1), q(0, 1)], &mr, 3).is_err());
    }

    #[test]
    fn chi_h_enumeration_order() {
        let all = enumerate_chi_h::<Q>(2).unwrap();
        let vals: Vec<Vec<Q>> = all.into_iter().map(|g| g.fundamental_values).collect();
        let (z, h) = (q(0, 1), q(1, 2));
        assert_eq!(vals, vec![vec![z, z], vec![z, h], vec![h, z], vec![h, h]]);
        assert_eq!(enumerate_chi_h::<Q>(1).unwrap().len(), 2);
        assert_eq!(enumerate_chi_h::<Q>(4).unwrap().len(), 16);
        assert!(enumerate_chi_h::<f64>(21).is_err());
    }

    #[test]
    fn appendix_mirror_is_gauge_invariant() {
        let (_, mh) = appendix();
        let phi_h = [q(0, 1), q(1, 2)];
        for chi in enumerate_chi_h::<Q>(2).unwrap() {
            assert_eq!(apply_gauge_fundamentals(&phi_h, &chi, &mh), phi_h.to_vec());
        }
    }

    #[test]
    fn appendix_is_nonsymmorphic() {
        let (mr, mh) = appendix();
        let zero = [q(0, 1), q(0, 1)];
        let v = decide_symmorphism(PointGroup::Dihedral(4), &zero, &mr, &[q(0, 1), q(1, 2)], &mh, 0.01).unwrap();
        assert!(v.applicable);
        assert!(!v.symmorphic);
        assert!(v.witness.is_none());
        let trace = v.trace.as_ref().unwrap();
        assert_eq!(trace.candidates.len(), 4);
        assert!(trace.candidates.iter().all(|c| !c.accepted));
        assert!(v.proof_trace().contains("non-symmorphic"));
    }

    #[test]
    fn null_phases_are_symmorphic() {
        let (mr, mh) = appendix();
        let zero = [q(0, 1), q(0, 1)];
        let v = decide_symmorphism(PointGroup::Dihedral(4), &zero, &mr, &zero, &mh, 0.01).unwrap();
        assert!(v.symmorphic);
        assert!(v.witness.unwrap().is_zero());
    }

    #[test]
    fn cyclic_and_odd_groups_are_forced() {
        let (mr, mh) = appendix();
        let phi = [q(1, 3), q(1, 2)];
        for g in [PointGroup::Cyclic(4), PointGroup::Dihedral(5), PointGroup::Dihedral(1)] {
            let v = decide_symmorphism(g, &phi, &mr, &phi, &mh, 0.01).unwrap();
            assert!(!v.applicable && v.symmorphic && v.witness.is_none());
        }
    }

    #[test]
    fn gauge_round_trip() {
        let (mr, _) = appendix();
        let phi = [q(1, 7), q(2, 5)];
        let chi = GaugeFunction::new(vec![q(1, 3), q(5, 6)]);
        let there = apply_gauge_fundamentals(&phi, &chi, &mr);
        assert_eq!(apply_gauge_fundamentals(&there, &chi.neg(), &mr), phi.to_vec());
    }
}
