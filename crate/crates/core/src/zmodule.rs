//! The reciprocal Z-module: bases, the finite analysis set, peak indexing
//! and integer matrices of orthogonal maps.

use std::fmt;

use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frequency, Mat2};
use crate::scalar::Real;
use crate::spectral::Peak;

/// Fundamental frequencies `k_1..k_μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleBasis<T> {
    fundamentals: Vec<Frequency<T>>,
}

impl<T: Real> ModuleBasis<T> {
    pub fn new(fundamentals: Vec<Frequency<T>>) -> Result<Self> {
        if fundamentals.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "module rank {} is below 2",
                fundamentals.len()
            )));
        }
        let eps = T::of(1e-12);
        for (i, k) in fundamentals.iter().enumerate() {
            if !k.is_finite() {
                return Err(Error::NonFinite);
            }
            if k.norm() <= eps {
                return Err(Error::InvalidArgument(format!("fundamental {i} is zero")));
            }
            if fundamentals[..i].iter().any(|q| q.distance(*k) <= eps) {
                return Err(Error::InvalidArgument(format!("fundamental {i} is repeated")));
            }
        }
        Ok(Self { fundamentals })
    }

    pub fn mu(&self) -> usize {
        self.fundamentals.len()
    }

    pub fn fundamentals(&self) -> &[Frequency<T>] {
        &self.fundamentals
    }

    /// Whether every fundamental is an integer frequency within `tol` cycles,
    /// so that the module is periodic in the image.
    pub fn is_commensurate(&self, tol: f64) -> bool {
        self.fundamentals.iter().all(|k| {
            let (x, y) = (k.x.as_f64(), k.y.as_f64());
            (x - x.round()).abs() <= tol && (y - y.round()).abs() <= tol
        })
    }

    pub fn frequency_of(&self, alpha: &[i32]) -> Frequency<T> {
        alpha
            .iter()
            .zip(&self.fundamentals)
            .fold(Frequency::zero(), |acc, (&a, &k)| acc + k.scale(T::of(a as f64)))
    }

    /// Warns when μ is not a multiple of φ(order), the totient of the
    /// holohedry's rotation order. Returns whether the check passed.
    pub fn check_rank(&self, order: u32) -> bool {
        let phi = totient(order) as usize;
        let ok = phi == 0 || self.mu() % phi == 0;
        if !ok {
            log::warn!(
                "module rank {} is not a multiple of φ({order}) = {phi}",
                self.mu()
            );
        }
        ok
    }
}

pub fn totient(n: u32) -> u32 {
    (1..=n).filter(|&k| num_integer::gcd(k, n) == 1).count() as u32
}

/// An integer combination of the fundamentals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleElement<T> {
    pub alpha: Vec<i32>,
    pub k: Frequency<T>,
}

impl<T> ModuleElement<T> {
    pub fn order(&self) -> u32 {
        self.alpha.iter().map(|a| a.unsigned_abs()).sum()
    }
}

/// Default element cap for [`build_mselect`].
pub const MSELECT_CAP: usize = 100_000;

/// All combinations with `Σ|α_i| ≤ fl`, without the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSelect<T> {
    pub fl: u32,
    /// Ordered by `Σ|α_i|`, then lexicographically by `α`.
    pub elements: Vec<ModuleElement<T>>,
    pub dropped_beyond_nyquist: usize,
    /// Pairs of distinct `α` with coinciding frequencies.
    pub collisions: usize,
}

/// Number of lattice points in the closed L1 ball of radius `fl` in `Z^μ`.
pub fn l1_ball_count(mu: usize, fl: u32) -> u128 {
    (0..=mu.min(fl as usize))
        .map(|j| (1u128 << j) * binomial(mu as u128, j as u128) * binomial(fl as u128, j as u128))
        .sum()
}

/// Builds the analysis set. Elements with a component at or beyond
/// `nyquist` are dropped and counted.
pub fn build_mselect<T: Real>(
    basis: &ModuleBasis<T>,
    fl: u32,
    nyquist: Option<T>,
) -> Result<MSelect<T>> {
    build_mselect_capped(basis, fl, nyquist, MSELECT_CAP)
}

pub fn build_mselect_capped<T: Real>(
    basis: &ModuleBasis<T>,
    fl: u32,
    nyquist: Option<T>,
    cap: usize,
) -> Result<MSelect<T>> {
    if fl == 0 {
        return Err(Error::InvalidArgument("fl must be at least 1".into()));
    }
    let count = l1_ball_count(basis.mu(), fl) - 1;
    if count > cap as u128 {
        return Err(Error::TooManyElements { count, cap });
    }
    let mut alphas = Vec::with_capacity(count as usize);
    let mut current = vec![0i32; basis.mu()];
    enumerate_ball(&mut current, 0, fl as i32, &mut alphas);
    alphas.retain(|a| a.iter().any(|&v| v != 0));
    alphas.sort_by(|a, b| {
        let la: i32 = a.iter().map(|v| v.abs()).sum();
        let lb: i32 = b.iter().map(|v| v.abs()).sum();
        la.cmp(&lb).then_with(|| a.cmp(b))
    });
    let mut dropped = 0;
    let mut elements = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let k = basis.frequency_of(&alpha);
        if nyquist.is_some_and(|ny| k.max_abs() >= ny) {
            dropped += 1;
            continue;
        }
        elements.push(ModuleElement { alpha, k });
    }
    let collisions = count_collisions(&elements);
    if collisions > 0 {
        log::warn!("{collisions} coincident frequencies in M^select: the basis is rank-deficient");
    }
    Ok(MSelect {
        fl,
        elements,
        dropped_beyond_nyquist: dropped,
        collisions,
    })
}

fn enumerate_ball(current: &mut Vec<i32>, pos: usize, budget: i32, out: &mut Vec<Vec<i32>>) {
    if pos == current.len() {
        out.push(current.clone());
        return;
    }
    for v in -budget..=budget {
        current[pos] = v;
        enumerate_ball(current, pos + 1, budget - v.abs(), out);
    }
    current[pos] = 0;
}

fn count_collisions<T: Real>(elements: &[ModuleElement<T>]) -> usize {
    let eps = 1e-9;
    let mut keyed: Vec<(f64, f64)> = elements
        .iter()
        .map(|e| (e.k.x.as_f64(), e.k.y.as_f64()))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut hits = 0;
    for i in 0..keyed.len() {
        let mut j = i + 1;
        while j < keyed.len() && keyed[j].0 - keyed[i].0 <= eps {
            if (keyed[j].1 - keyed[i].1).abs() <= eps {
                hits += 1;
            }
            j += 1;
        }
    }
    hits
}

/// A peak matched to a module element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedPeak<T> {
    pub peak: Peak<T>,
    pub element: ModuleElement<T>,
    pub distance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexingReport<T> {
    pub matched: Vec<IndexedPeak<T>>,
    pub unmatched_peaks: Vec<Peak<T>>,
    /// Fraction of non-DC peaks matched; 0 when there are none.
    pub coverage: f64,
    pub tol_pos: T,
}

/// Default matching tolerance for grid peaks, in cycles.
pub const TOL_POS_GRID: f64 = 0.5;
/// Default matching tolerance for refined peaks, in cycles.
pub const TOL_POS_REFINED: f64 = 0.05;

/// Matches every non-DC peak to its nearest element of `mselect`.
pub fn index_peaks<T: Real>(peaks: &[Peak<T>], mselect: &MSelect<T>, tol_pos: T) -> IndexingReport<T> {
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    let mut total = 0usize;
    for peak in peaks.iter().filter(|p| !p.is_dc) {
        total += 1;
        // Elements are ordered by order then α, so the first minimum wins ties.
        let best = mselect
            .elements
            .iter()
            .map(|e| (e, e.k.distance(peak.k)))
            .fold(None::<(&ModuleElement<T>, T)>, |acc, (e, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((e, d)),
            });
        match best {
            Some((e, d)) if d <= tol_pos => matched.push(IndexedPeak {
                peak: *peak,
                element: e.clone(),
                distance: d,
            }),
            _ => unmatched.push(*peak),
        }
    }
    let coverage = if total == 0 {
        0.0
    } else {
        matched.len() as f64 / total as f64
    };
    IndexingReport {
        matched,
        unmatched_peaks: unmatched,
        coverage,
        tol_pos,
    }
}

/// Least-squares fundamentals from measured positions of module elements,
/// minimizing `Σ |k_obs − Σ α_i k_i|²`.
pub fn fit_basis<T: Real>(observations: &[(Vec<i32>, Frequency<T>)], mu: usize) -> Result<ModuleBasis<T>> {
    if observations.iter().any(|(a, _)| a.len() != mu) {
        return Err(Error::InvalidArgument(format!("indices must have {mu} entries")));
    }
    // Normal equations AᵀA X = Aᵀ K with one column per coordinate.
    let mut ata = vec![vec![0.0f64; mu + 2]; mu];
    for (alpha, k) in observations {
        for r in 0..mu {
            let ar = alpha[r] as f64;
            for c in 0..mu {
                ata[r][c] += ar * alpha[c] as f64;
            }
            ata[r][mu] += ar * k.x.as_f64();
            ata[r][mu + 1] += ar * k.y.as_f64();
        }
    }
    for col in 0..mu {
        let pivot = (col..mu)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .expect("non-empty range");
        if ata[pivot][col].abs() < 1e-9 {
            return Err(Error::RankDeficient(format!(
                "observed elements do not determine fundamental {col}"
            )));
        }
        ata.swap(col, pivot);
        for r in 0..mu {
            if r != col {
                let f = ata[r][col] / ata[col][col];
                for c in col..mu + 2 {
                    ata[r][c] -= f * ata[col][c];
                }
            }
        }
    }
    ModuleBasis::new(
        (0..mu)
            .map(|i| Frequency::new(T::of(ata[i][mu] / ata[i][i]), T::of(ata[i][mu + 1] / ata[i][i])))
            .collect(),
    )
}

/// Basis closest to `basis` on which the orthogonal `q` of finite order
/// acts exactly through `m`: the orbit average
/// `k_i' = (1/N) Σ_p q^{−p} Σ_j (M^p)_{ji} k_j`.
pub fn symmetrize_basis<T: Real>(basis: &ModuleBasis<T>, q: &Mat2, m: &IntMatrix) -> Result<ModuleBasis<T>> {
    let mu = basis.mu();
    if m.size() != mu {
        return Err(Error::InvalidArgument(format!("matrix of size {} for rank {mu}", m.size())));
    }
    let order = m
        .order(64)
        .ok_or_else(|| Error::InvalidArgument("matrix has no finite order up to 64".into()))?;
    let ks = basis.fundamentals();
    let mut sums = vec![Frequency::new(T::zero(), T::zero()); mu];
    let mut mp = IntMatrix::identity(mu);
    let mut qinv = Mat2::IDENTITY;
    let qt = q.transpose();
    for _ in 0..order {
        for (i, sum) in sums.iter_mut().enumerate() {
            let image = (0..mu).fold(Frequency::new(T::zero(), T::zero()), |acc, j| {
                acc + ks[j].scale(T::of(mp.get(j, i) as f64))
            });
            *sum = *sum + qinv.apply(image);
        }
        mp = m.mul(&mp);
        qinv = qinv * qt;
    }
    let inv = T::one() / T::of(order as f64);
    ModuleBasis::new(sums.into_iter().map(|k| k.scale(inv)).collect())
}

/// Square integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    size: usize,
    entries: Vec<i64>,
}

impl IntMatrix {
    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1;
        }
        Self { size, entries }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        Ok(Self {
            size,
            entries: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries[r * self.size + c]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.size).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.size;
        let mut entries = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                entries[c * n + r] = self.get(r, c);
            }
        }
        Self { size: n, entries }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.size;
        let mut entries = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = (0..n).map(|k| self.get(r, k) * other.get(k, c)).sum();
            }
        }
        Self { size: n, entries }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::identity(self.size), |acc, _| acc.mul(self))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.size)
    }

    /// Smallest `k ≤ limit` with `M^k = I`.
    pub fn order(&self, limit: u32) -> Option<u32> {
        let mut acc = self.clone();
        for k in 1..=limit {
            if acc.is_identity() {
                return Some(k);
            }
            acc = acc.mul(self);
        }
        None
    }

    /// `M α`: the coefficients of `Q k` for `k = Σ α_i k_i`.
    pub fn apply(&self, alpha: &[i32]) -> Vec<i32> {
        (0..self.size)
            .map(|r| (0..self.size).map(|c| self.get(r, c) * alpha[c] as i64).sum::<i64>() as i32)
            .collect()
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows()
            .iter()
            .map(|r| {
                let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

/// An orthogonal map expressed in the module basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleMap {
    /// Column `i` holds the coefficients of `Q k_i`.
    pub matrix: IntMatrix,
    /// Largest rounding residual over the fundamentals, in cycles.
    pub residual: f64,
}

/// Default integer-rounding tolerance in cycles.
pub const TOL_INT: f64 = 0.05;

/// Coefficient bound searched for the components that a rank-2 solve cannot
/// determine when `μ > 2`.
const SEARCH_BOUND: i64 = 6;

/// Integer matrix `M` with `Q k_i ≈ Σ_j M_ji k_j`.
pub fn matrix_in_basis<T: Real>(q: &Mat2, basis: &ModuleBasis<T>, tol_int: f64) -> Result<ModuleMap> {
    if !q.is_orthogonal(1e-9) {
        return Err(Error::InvalidArgument(format!("{q} is not orthogonal")));
    }
    let ks: Vec<[f64; 2]> = basis
        .fundamentals()
        .iter()
        .map(|k| [k.x.as_f64(), k.y.as_f64()])
        .collect();
    let mu = ks.len();
    let (p, r) = independent_pair(&ks)?;
    let mut entries = vec![0i64; mu * mu];
    let mut worst: f64 = 0.0;
    for (i, k) in ks.iter().enumerate() {
        let qk = q.apply(Frequency::new(k[0], k[1]));
        let target = [qk.x, qk.y];
        let (coeffs, residual) = expand(&ks, p, r, target, tol_int).map_err(|e| match e {
            Error::NotModuleStable { residual, .. } => Error::NotModuleStable { index: i, residual },
            other => other,
        })?;
        for (j, c) in coeffs.into_iter().enumerate() {
            entries[j * mu + i] = c;
        }
        worst = worst.max(residual);
    }
    Ok(ModuleMap {
        matrix: IntMatrix { size: mu, entries },
        residual: worst,
    })
}

fn det2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn independent_pair(ks: &[[f64; 2]]) -> Result<(usize, usize)> {
    for p in 0..ks.len() {
        for r in p + 1..ks.len() {
            let scale = ks[p][0].hypot(ks[p][1]) * ks[r][0].hypot(ks[r][1]);
            if det2(ks[p], ks[r]).abs() > 1e-6 * scale {
                return Ok((p, r));
            }
        }
    }
    Err(Error::RankDeficient("all fundamentals are collinear".into()))
}

/// Integer coefficients of `target`: the pair `(p, r)` is solved exactly
/// and rounded for every choice of the remaining coefficients in the search
/// box. Exactly one candidate may fall within `tol`.
fn expand(ks: &[[f64; 2]], p: usize, r: usize, target: [f64; 2], tol: f64) -> Result<(Vec<i64>, f64)> {
    let mu = ks.len();
    let free: Vec<usize> = (0..mu).filter(|&j| j != p && j != r).collect();
    let det = det2(ks[p], ks[r]);
    let side = (2 * SEARCH_BOUND + 1) as usize;
    let combos = side.pow(free.len() as u32);
    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut accepted: Vec<Vec<i64>> = Vec::new();
    let mut coeffs = vec![0i64; mu];
    for combo in 0..combos {
        let mut rest = target;
        let mut c = combo;
        for &j in &free {
            let v = (c % side) as i64 - SEARCH_BOUND;
            c /= side;
            coeffs[j] = v;
            rest[0] -= v as f64 * ks[j][0];
            rest[1] -= v as f64 * ks[j][1];
        }
        coeffs[p] = (det2(rest, ks[r]) / det).round() as i64;
        coeffs[r] = (det2(ks[p], rest) / det).round() as i64;
        let mut err = target;
        for (j, k) in ks.iter().enumerate() {
            err[0] -= coeffs[j] as f64 * k[0];
            err[1] -= coeffs[j] as f64 * k[1];
        }
        let residual = err[0].hypot(err[1]);
        if residual <= tol && !accepted.contains(&coeffs) {
            accepted.push(coeffs.clone());
        }
        if best.as_ref().is_none_or(|(_, b)| residual < *b) {
            best = Some((coeffs.clone(), residual));
        }
    }
    let (coeffs, residual) = best.expect("search box is non-empty");
    if residual > tol {
        return Err(Error::NotModuleStable { index: 0, residual });
    }
    if accepted.len() > 1 {
        return Err(Error::RankDeficient(format!(
            "{} integer expansions within {tol}",
            accepted.len()
        )));
    }
    Ok((coeffs, residual))
}
