//! Modulated Fourier expansions on windows of length `ε^α`.
//!
//! On a window starting at `t₀` the solution is approximated by
//! `q_j(t) ≈ Σ_{k∈𝒦} z_j^k(τ) e^{i(k·ϖ)(t-t₀)}` with `τ = ε^{-α}(t-t₀) ∈ [0, 1]`.
//! The coefficient functions are Chebyshev series in `τ`, built by the
//! iteration in [`construct`] and used in [`invariant`] to evaluate the
//! almost-invariant `ℰ` along a trajectory.

pub mod cheb;
pub mod construct;
pub mod index;
pub mod invariant;

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{State, SystemConfig};
use crate::resonance::{MultiIndex, ResonanceData};

pub use cheb::ChebGrid;
pub use construct::{ConstructOptions, DefectReport, EntryDefect, StopReason, SweepRecord};
pub use index::{EntryKind, ExpansionIndex};
pub use invariant::{remainder_norm, track_invariant, InvariantSeries, ReferenceSource, StateSource, TrackOptions};

/// Default Chebyshev degree of the coefficient functions.
pub const DEFAULT_DEGREE: usize = 48;

/// Relative size below which trailing Chebyshev coefficients are dropped.
/// Every sweep differentiates twice, so roundoff left in the top modes
/// would be amplified without bound.
pub const CHOP_TOL: f64 = 1e-13;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A function `[0, 1] → C^d` stored as one Chebyshev series per component.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffFunction {
    comps: Vec<Vec<Complex64>>,
}

impl CoeffFunction {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self { comps: vec![vec![ZERO; degree + 1]; dim] }
    }

    pub fn constant(values: &[Complex64], degree: usize) -> Self {
        let mut f = Self::zero(values.len(), degree);
        for (c, v) in f.comps.iter_mut().zip(values) {
            c[0] = *v;
        }
        f
    }

    pub fn from_coeffs(comps: Vec<Vec<Complex64>>) -> Self {
        Self { comps }
    }

    /// Fits node-major values `v[i * d + c]` on the grid and chops the
    /// roundoff tail.
    pub fn from_nodal(grid: &ChebGrid, dim: usize, values: &[Complex64]) -> Self {
        let np = grid.len();
        let mut comps: Vec<Vec<Complex64>> = (0..dim)
            .map(|c| grid.fit(&(0..np).map(|i| values[i * dim + c]).collect::<Vec<_>>()))
            .collect();
        for c in comps.iter_mut() {
            cheb::chop(c, CHOP_TOL);
        }
        Self { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn eval(&self, tau: f64) -> Vec<Complex64> {
        self.comps.iter().map(|c| cheb::eval(c, tau)).collect()
    }

    /// Node-major values on the grid.
    pub fn nodal(&self, grid: &ChebGrid) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = vec![ZERO; grid.len() * d];
        for (c, comp) in self.comps.iter().enumerate() {
            for (i, v) in grid.values(comp).into_iter().enumerate() {
                out[i * d + c] = v;
            }
        }
        out
    }

    /// Node-major values at the equispaced sample points.
    pub fn sampled(&self, grid: &ChebGrid) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = vec![ZERO; cheb::SAMPLE_POINTS * d];
        for (c, comp) in self.comps.iter().enumerate() {
            for (i, v) in grid.samples(comp).into_iter().enumerate() {
                out[i * d + c] = v;
            }
        }
        out
    }

    /// `sup_τ |f(τ)|` (Euclidean in `C^d`) over the sample points.
    pub fn sup_norm(&self, grid: &ChebGrid) -> f64 {
        let d = self.dim();
        self.sampled(grid)
            .chunks(d)
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn derivative(&self) -> Self {
        Self { comps: self.comps.iter().map(|c| cheb::derivative(c)).collect() }
    }

    /// `∫_0^τ`.
    pub fn antiderivative(&self) -> Self {
        Self { comps: self.comps.iter().map(|c| cheb::antiderivative(c)).collect() }
    }

    pub fn map_coeffs(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { comps: self.comps.iter().map(|c| c.iter().map(|&x| f(x)).collect()).collect() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        Self { comps }
    }

    pub fn conj(&self) -> Self {
        self.map_coeffs(|x| x.conj())
    }

    /// Worst tail ratio over components (see [`cheb::tail_ratio`]).
    pub fn tail_ratio(&self) -> f64 {
        self.comps.iter().map(|c| cheb::tail_ratio(c)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Shared, immutable data for constructing expansions of one system.
#[derive(Debug, Clone)]
pub struct MfeContext {
    pub sys: SystemConfig,
    pub index: Arc<ExpansionIndex>,
    pub grid: Arc<ChebGrid>,
}

impl MfeContext {
    pub fn new(sys: &SystemConfig, res: &ResonanceData, degree: usize) -> Result<Self> {
        if res.epsilon != sys.epsilon() {
            return Err(Error::invalid("epsilon", "resonance data built for a different ε"));
        }
        Ok(Self {
            sys: sys.clone(),
            index: Arc::new(ExpansionIndex::new(sys, res)?),
            grid: Arc::new(ChebGrid::new(degree)),
        })
    }

    /// Builds the resonance data for order `N` and the context in one go.
    pub fn for_system(sys: &SystemConfig, order: usize, degree: usize) -> Result<Self> {
        let res = ResonanceData::analyze(sys.omega(), sys.epsilon(), order)?;
        Self::new(sys, &res, degree)
    }

    pub fn degree(&self) -> usize {
        self.grid.degree()
    }
}

/// The coefficient functions `z_j^k` of one window, plus the data the window
/// was built from.
#[derive(Debug, Clone)]
pub struct ModulationSet {
    pub(crate) index: Arc<ExpansionIndex>,
    pub(crate) grid: Arc<ChebGrid>,
    pub(crate) funcs: Vec<CoeffFunction>,
    /// Window start `t₀`.
    pub t0: f64,
    /// `(p, q)` at `t₀`.
    pub initial: State,
}

/// Measured constants of the coefficient size bounds for one entry.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSize {
    pub j: usize,
    pub k: MultiIndex,
    pub max_abs: f64,
    /// `max|z|` divided by the bound shape: `1` for `(0,0)`, `ω_j^{-1}` for
    /// `±⟨j⟩`, `ε^{‖k‖}/|ϖ_j² - (k·ϖ)²|` otherwise.
    pub constant: f64,
}

impl ModulationSet {
    pub fn index(&self) -> &ExpansionIndex {
        &self.index
    }

    pub fn grid(&self) -> &ChebGrid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.index.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.index.alpha
    }

    pub fn mu(&self) -> f64 {
        self.index.mu
    }

    pub fn varpi(&self) -> &[f64] {
        &self.index.varpi[1..]
    }

    /// Window length `ε^α`.
    pub fn window(&self) -> f64 {
        self.index.window()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.window()
    }

    pub fn funcs(&self) -> &[CoeffFunction] {
        &self.funcs
    }

    /// `z_j^k` for the representative `k` with index `kidx`.
    pub fn get(&self, j: usize, kidx: usize) -> &CoeffFunction {
        &self.funcs[self.index.entry(j, kidx)]
    }

    /// `z_j^k` for an arbitrary multi-index, via its class representative.
    pub fn lookup(&self, j: usize, k: &MultiIndex) -> Option<&CoeffFunction> {
        let i = self.index.reps.iter().position(|r| r == k)?;
        Some(self.get(j, i))
    }

    /// `τ` for time `t`, checked against the window.
    pub fn tau(&self, t: f64) -> Result<f64> {
        let l = self.window();
        let slack = 1e-12 * l.max(self.t0.abs());
        if t < self.t0 - slack || t > self.t0 + l + slack {
            return Err(Error::OutsideWindow { t, start: self.t0, end: self.t0 + l });
        }
        Ok(((t - self.t0) / l).clamp(0.0, 1.0))
    }

    /// All entries at one `τ`.
    pub fn eval_all(&self, tau: f64) -> Vec<Vec<Complex64>> {
        self.funcs.iter().map(|f| f.eval(tau)).collect()
    }

    /// Node-major nodal values of every entry.
    pub fn nodal_all(&self) -> Vec<Vec<Complex64>> {
        self.funcs.iter().map(|f| f.nodal(&self.grid)).collect()
    }

    /// `max |z_j^{-k} - conj(z_j^k)|` over grid nodes, relative to the largest `|z|`.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let nodal = self.nodal_all();
        let scale = nodal.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for e in 0..nodal.len() {
            let c = self.index.conjugate_entry(e);
            for (a, b) in nodal[e].iter().zip(&nodal[c]) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst / scale
    }

    /// Largest tail ratio over all coefficient functions that are not
    /// negligible (max coefficient above `1e-14` of the largest one overall).
    pub fn resolution(&self) -> f64 {
        let size = |f: &CoeffFunction| f.coeffs().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let top = self.funcs.iter().map(size).fold(0.0, f64::max);
        self.funcs
            .iter()
            .filter(|f| size(f) > 1e-14 * top)
            .map(CoeffFunction::tail_ratio)
            .fold(0.0, f64::max)
    }

    /// Measured constants of the coefficient size bounds.
    pub fn coefficient_sizes(&self) -> Vec<CoefficientSize> {
        let idx = &self.index;
        let eps = idx.epsilon;
        self.funcs
            .iter()
            .enumerate()
            .map(|(e, f)| {
                let (j, i) = idx.split(e);
                let max_abs = f.sup_norm(&self.grid);
                let shape = match idx.kinds[e] {
                    EntryKind::Slow => 1.0,
                    EntryKind::Diagonal { .. } => 1.0 / idx.omega[j],
                    EntryKind::Explicit { denom } => eps.powi(idx.norms[i] as i32) / denom.abs(),
                };
                CoefficientSize { j, k: idx.reps[i].clone(), max_abs, constant: max_abs / shape }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
