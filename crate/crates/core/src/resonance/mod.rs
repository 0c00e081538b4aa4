//! Resonance analysis of a frequency vector.
//!
//! Linear combinations `k·ω` with `‖k‖ ≤ N+1` always leave a gap
//! `ε^{-α} < |k·ω| < ε^{-α-μ}` free. The combinations below the gap are
//! almost-resonant; they generate a module `ℳ ⊂ Z^n`. Shifting the
//! frequencies by the minimal-norm `ϑ` makes every member of `ℳ` an exact
//! resonance of the modified frequencies `ϖ = ω + ϑ`, while combinations
//! outside `ℳ` stay bounded away from zero.

mod lattice;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use lattice::HermiteBasis;

/// `k ∈ Z^n` with its ℓ1 norm.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    k: Vec<i64>,
    norm: u64,
}

impl MultiIndex {
    pub fn new(k: Vec<i64>) -> Self {
        let norm = k.iter().map(|x| x.unsigned_abs()).sum();
        Self { k, norm }
    }

    pub fn zero(n: usize) -> Self {
        Self { k: vec![0; n], norm: 0 }
    }

    /// The `j`-th unit vector `⟨j⟩` for `j = 1..=n`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut k = vec![0; n];
        k[j - 1] = 1;
        Self { k, norm: 1 }
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.k
    }

    pub fn norm(&self) -> u64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0
    }

    /// `k·ω` for `ω = (ω_1..ω_n)`.
    pub fn dot(&self, omega: &[f64]) -> f64 {
        self.k.iter().zip(omega).map(|(&k, w)| k as f64 * w).sum()
    }

    pub fn neg(&self) -> Self {
        Self { k: self.k.iter().map(|x| -x).collect(), norm: self.norm }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.k.iter().zip(&other.k).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.k.iter().zip(&other.k).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.k)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.k.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.k.serialize(s)
    }
}

/// All `k ∈ Z^n` with `‖k‖ ≤ r`, in lexicographic order.
pub fn enumerate_multi_indices(n: usize, r: usize) -> Vec<MultiIndex> {
    fn rec(prefix: &mut Vec<i64>, left: usize, budget: i64, out: &mut Vec<MultiIndex>) {
        if left == 0 {
            out.push(MultiIndex::new(prefix.clone()));
            return;
        }
        for v in -budget..=budget {
            prefix.push(v);
            rec(prefix, left - 1, budget - v.abs(), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), n, r as i64, &mut out);
    out
}

/// Relative threshold below which `|k·ω|` counts as an exact zero.
const EXACT_ZERO: f64 = 1e-12;

fn is_exact_zero(value: f64, k: &MultiIndex, omega: &[f64]) -> bool {
    let scale = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    value.abs() <= EXACT_ZERO * scale * k.norm().max(1) as f64
}

/// Gap `[α, α+μ]` (in base-`1/ε` logarithms) free of every `log |k·ω|`.
#[derive(Debug, Clone, Serialize)]
pub struct GapResult {
    pub alpha: f64,
    pub mu: f64,
    /// Number `M` of multi-indices with `‖k‖ ≤ N+1`.
    pub m_count: usize,
    /// `log_{1/ε} |k·ω|` for the `k` with `k·ω ≠ 0`, sorted.
    pub occupied: Vec<f64>,
    /// Largest empty band `(lower, upper)` containing `[α, α+μ]`.
    pub effective_gap: (f64, f64),
}

impl GapResult {
    /// `upper − α`: the distance from `α` to the next occupied value.
    /// This is the gap that controls the contraction of the iteration.
    pub fn effective_width(&self) -> f64 {
        self.effective_gap.1 - self.alpha
    }

    /// True if no occupied value lies in `[α, α+μ]`.
    pub fn is_empty_gap(&self) -> bool {
        !self.occupied.iter().any(|&a| a >= self.alpha && a <= self.alpha + self.mu)
    }
}

/// Cap on the upper end of the effective band when nothing lies above `α`.
const EFFECTIVE_GAP_CAP: f64 = 1.0;

pub fn find_gap(omega: &[f64], epsilon: f64, order: usize) -> Result<GapResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "need 0 < ε < 1"));
    }
    let indices = enumerate_multi_indices(omega.len(), order + 1);
    let m_count = indices.len();
    let mu = 1.0 / (4 * m_count + 4) as f64;
    let log_base = (1.0 / epsilon).ln();
    let mut occupied: Vec<f64> = indices
        .iter()
        .filter_map(|k| {
            let v = k.dot(omega);
            (!is_exact_zero(v, k, omega)).then(|| v.abs().ln() / log_base)
        })
        .collect();
    occupied.sort_by(|a, b| a.partial_cmp(b).unwrap());
    occupied.dedup();

    let slots = (1.0 / (4.0 * mu)).round() as usize - 1;
    let alpha = (0..slots)
        .map(|i| mu * (i + 1) as f64)
        .find(|&lo| !occupied.iter().any(|&a| a >= lo && a <= lo + mu))
        .ok_or_else(|| Error::Numerical("no free gap found".into()))?;
    let lower = occupied.iter().copied().filter(|&a| a < alpha).fold(f64::NEG_INFINITY, f64::max);
    let upper = occupied
        .iter()
        .copied()
        .filter(|&a| a > alpha + mu)
        .fold(f64::INFINITY, f64::min)
        .min(alpha + EFFECTIVE_GAP_CAP);
    Ok(GapResult { alpha, mu, m_count, occupied, effective_gap: (lower, upper) })
}

/// `ℛ = {k : |k·ω| ≤ ε^{-α}, ‖k‖ ≤ N+1}`.
pub fn almost_resonant_set(omega: &[f64], epsilon: f64, alpha: f64, order: usize) -> Vec<MultiIndex> {
    let threshold = epsilon.powf(-alpha);
    enumerate_multi_indices(omega.len(), order + 1)
        .into_iter()
        .filter(|k| k.dot(omega).abs() <= threshold)
        .collect()
}

/// Frequency shift `ϑ`, modified frequencies `ϖ` and the independent basis used.
#[derive(Debug, Clone)]
pub struct FrequencyModification {
    pub theta: Vec<f64>,
    pub varpi: Vec<f64>,
    pub basis: Vec<MultiIndex>,
}

/// Tolerance of the rank test on row-reduced entries.
const RANK_TOL: f64 = 1e-9;

/// Greedy maximal linearly independent subset of `ℛ∖{0}` and the
/// minimal Euclidean-norm `ϑ` with `k^i·(ω + ϑ) = 0` for every basis vector.
pub fn modify_frequencies(resonant: &[MultiIndex], omega: &[f64]) -> Result<FrequencyModification> {
    let n = omega.len();
    let mut reduced: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut basis = Vec::new();
    for k in resonant.iter().filter(|k| !k.is_zero()) {
        let mut v: Vec<f64> = k.as_slice().iter().map(|&x| x as f64).collect();
        for (pivot, row) in &reduced {
            let f = v[*pivot] / row[*pivot];
            if f != 0.0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= f * b;
                }
            }
        }
        let (pivot, max) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
        if max > RANK_TOL {
            reduced.push((pivot, v));
            basis.push(k.clone());
        }
        if basis.len() == n {
            break;
        }
    }
    if basis.is_empty() {
        return Ok(FrequencyModification { theta: vec![0.0; n], varpi: omega.to_vec(), basis });
    }
    let d = basis.len();
    let b = DMatrix::from_fn(d, n, |i, j| basis[i].as_slice()[j] as f64);
    let rhs = DVector::from_iterator(d, basis.iter().map(|k| -k.dot(omega)));
    let gram = &b * b.transpose();
    let y = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("resonance basis is numerically rank deficient".into()))?
        .solve(&rhs);
    let theta: Vec<f64> = (b.transpose() * y).iter().copied().collect();
    let varpi = omega.iter().zip(&theta).map(|(w, t)| w + t).collect();
    Ok(FrequencyModification { theta, varpi, basis })
}

/// Everything the modulated Fourier expansion needs to know about resonances.
#[derive(Debug, Clone)]
pub struct ResonanceData {
    pub epsilon: f64,
    /// Truncation order `N`.
    pub order: usize,
    pub gap: GapResult,
    /// The almost-resonant set `ℛ`.
    pub resonant: Vec<MultiIndex>,
    pub basis: Vec<MultiIndex>,
    /// `ϑ_1..ϑ_n` (`ϑ_0 = 0` is implied).
    pub theta: Vec<f64>,
    /// `ϖ_1..ϖ_n` (`ϖ_0 = 0` is implied).
    pub varpi: Vec<f64>,
    /// Hermite basis of the module `ℳ` generated by `ℛ`.
    pub module: HermiteBasis,
    /// Representatives `𝒦` of `Z^n/ℳ` with `‖k‖ ≤ N`; `0` comes first.
    pub representatives: Vec<MultiIndex>,
    /// `‖ϑ‖ ε^α`.
    pub theta_norm_scaled: f64,
    pub omega: Vec<f64>,
}

impl ResonanceData {
    pub fn analyze(omega: &[f64], epsilon: f64, order: usize) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::invalid("omega", "need at least one frequency"));
        }
        let gap = find_gap(omega, epsilon, order)?;
        let resonant = almost_resonant_set(omega, epsilon, gap.alpha, order);
        let FrequencyModification { theta, varpi, basis } = modify_frequencies(&resonant, omega)?;
        let generators: Vec<Vec<i64>> = resonant.iter().map(|k| k.as_slice().to_vec()).collect();
        let module = HermiteBasis::new(omega.len(), &generators)?;
        let theta_norm_scaled = theta.iter().map(|x| x * x).sum::<f64>().sqrt() * epsilon.powf(gap.alpha);
        let mut data = Self {
            epsilon,
            order,
            gap,
            resonant,
            basis,
            theta,
            varpi,
            module,
            representatives: Vec::new(),
            theta_norm_scaled,
            omega: omega.to_vec(),
        };
        data.representatives = representatives(&data.module, omega.len(), order)?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn alpha(&self) -> f64 {
        self.gap.alpha
    }

    pub fn mu(&self) -> f64 {
        self.gap.mu
    }

    /// `k ∈ ℳ`.
    pub fn module_membership(&self, k: &MultiIndex) -> bool {
        self.module.contains(k.as_slice()).expect("multi-index length matches the module")
    }

    /// `k·ϖ`.
    pub fn modified_dot(&self, k: &MultiIndex) -> f64 {
        k.dot(&self.varpi)
    }

    /// `max_{k ∈ ℛ} |k·ϖ|` (zero up to roundoff).
    pub fn max_resonance_residual(&self) -> f64 {
        self.resonant.iter().map(|k| self.modified_dot(k).abs()).fold(0.0, f64::max)
    }

    /// `min |k·ϖ|` over `‖k‖ ≤ N+1` with `k ∉ ℳ`, and a minimizing `k`.
    pub fn min_nonresonant(&self) -> Option<(f64, MultiIndex)> {
        enumerate_multi_indices(self.n(), self.order + 1)
            .into_iter()
            .filter(|k| !self.module_membership(k))
            .map(|k| (self.modified_dot(&k).abs(), k))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
    }

    /// `½ ε^{-α-μ}`.
    pub fn nonresonant_bound(&self) -> f64 {
        0.5 * self.epsilon.powf(-self.gap.alpha - self.gap.mu)
    }

    /// Index in [`Self::representatives`] of the representative of `[k]`, if it has one.
    pub fn representative_index(&self, k: &MultiIndex) -> Option<usize> {
        let key = self.module.reduce(k.as_slice()).ok()?;
        self.representatives
            .iter()
            .position(|r| self.module.reduce(r.as_slice()).map(|x| x == key).unwrap_or(false))
    }
}

/// Minimal-norm representatives of the classes of `{‖k‖ ≤ N}` modulo the
/// module, closed under negation. Ties are broken towards the
/// lexicographically largest member.
pub fn representatives(module: &HermiteBasis, n: usize, order: usize) -> Result<Vec<MultiIndex>> {
    let mut classes: BTreeMap<Vec<i64>, Vec<MultiIndex>> = BTreeMap::new();
    for k in enumerate_multi_indices(n, order) {
        classes.entry(module.reduce(k.as_slice())?).or_default().push(k);
    }
    let best = |members: &[MultiIndex]| -> MultiIndex {
        let min = members.iter().map(MultiIndex::norm).min().unwrap();
        members.iter().filter(|k| k.norm() == min).max().unwrap().clone()
    };
    let mut chosen: BTreeMap<Vec<i64>, MultiIndex> = BTreeMap::new();
    for (key, members) in &classes {
        if chosen.contains_key(key) {
            continue;
        }
        let mine = best(members);
        let neg_key = module.reduce(mine.neg().as_slice())?;
        if &neg_key == key {
            // only the module itself is self-conjugate among small classes
            chosen.insert(key.clone(), mine);
            continue;
        }
        let theirs = classes.get(&neg_key).map(|m| best(m)).unwrap_or_else(|| mine.neg());
        let rep = if mine >= theirs { mine } else { theirs.neg() };
        chosen.insert(neg_key, rep.neg());
        chosen.insert(key.clone(), rep);
    }
    let mut reps: Vec<MultiIndex> = chosen.into_values().collect();
    if reps.iter().any(|r| !r.is_zero() && module.contains(r.as_slice()).unwrap_or(false)) {
        return Err(Error::Numerical("nonzero representative inside the module".into()));
    }
    reps.sort_by(|a, b| a.norm().cmp(&b.norm()).then_with(|| b.cmp(a)));
    Ok(reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        let one = enumerate_multi_indices(1, 1);
        assert_eq!(one.iter().map(|k| k.as_slice()[0]).collect::<Vec<_>>(), vec![-1, 0, 1]);
        assert_eq!(enumerate_multi_indices(2, 2).len(), 13);
        assert_eq!(enumerate_multi_indices(7, 2).len(), 1 + 2 * 7 + (2 * 7 + 4 * 21));
        let e = enumerate_multi_indices(3, 2);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_frequency_gap_is_first_slot() {
        let eps = 0.005;
        let g = find_gap(&[1.0 / eps], eps, 1).unwrap();
        assert_eq!(g.m_count, 5);
        assert!((g.mu - 1.0 / 24.0).abs() < 1e-15);
        assert!((g.alpha - g.mu).abs() < 1e-15);
        assert!(g.is_empty_gap());
    }

    #[test]
    fn generic_pair_has_trivial_resonant_set() {
        let eps = 0.005;
        let omega = [1.0 / eps, std::f64::consts::PI / eps];
        let g = find_gap(&omega, eps, 1).unwrap();
        let r = almost_resonant_set(&omega, eps, g.alpha, 1);
        assert_eq!(r, vec![MultiIndex::zero(2)]);
        let m = modify_frequencies(&r, &omega).unwrap();
        assert_eq!(m.theta, vec![0.0, 0.0]);
        assert_eq!(m.varpi, omega.to_vec());
    }

    #[test]
    fn near_one_to_one_pair_is_equalized() {
        let eps = 0.01;
        let omega = [1.0 / eps, (1.0 + eps * eps) / eps];
        let r = vec![MultiIndex::zero(2), MultiIndex::new(vec![1, -1]), MultiIndex::new(vec![-1, 1])];
        let m = modify_frequencies(&r, &omega).unwrap();
        assert_eq!(m.basis.len(), 1);
        assert!((m.theta[0] - eps / 2.0).abs() < 1e-12);
        assert!((m.theta[1] + eps / 2.0).abs() < 1e-12);
        assert!((m.varpi[0] - m.varpi[1]).abs() < 1e-12);
    }

    #[test]
    fn exact_resonances_need_no_shift() {
        let eps = 0.01;
        let omega = [1.0 / eps, 2.0 / eps];
        let r = vec![MultiIndex::zero(2), MultiIndex::new(vec![2, -1]), MultiIndex::new(vec![-2, 1])];
        let m = modify_frequencies(&r, &omega).unwrap();
        assert!(m.theta.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn representatives_of_one_to_one_module() {
        let module = HermiteBasis::new(2, &[vec![1, -1]]).unwrap();
        let reps = representatives(&module, 2, 1).unwrap();
        assert_eq!(
            reps,
            vec![MultiIndex::zero(2), MultiIndex::new(vec![1, 0]), MultiIndex::new(vec![-1, 0])]
        );
    }

    #[test]
    fn trivial_module_keeps_all_small_indices() {
        let module = HermiteBasis::new(3, &[]).unwrap();
        let reps = representatives(&module, 3, 2).unwrap();
        assert_eq!(reps.len(), enumerate_multi_indices(3, 2).len());
    }
}
