//! Oscillators with high frequencies coupled to a slow system.
//!
//! Positions and momenta are split into blocks `q_0, q_1, ..., q_n` with
//! `q_j ∈ R^{d_j}`. Block 0 is the slow system (`ω_0 = 0`); blocks `1..=n`
//! are harmonic oscillators with frequencies `ω_j ≥ 1/ε`. The Hamiltonian is
//! `H = H_ω + H_slow` with
//!
//! ```text
//! H_ω    = Σ_{j≥1} ½(|p_j|² + ω_j²|q_j|²)
//! H_slow = ½|p_0|² + U(q)
//! ```

mod potential;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub use potential::{example_potential, CubicCouplingPotential, Potential, ZeroPotential};

pub(crate) fn block_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for d in dims {
        acc += d;
        offsets.push(acc);
    }
    offsets
}

/// Positions or momenta as `n + 1` real blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl BlockVector {
    pub fn zeros(dims: &[usize]) -> Self {
        let offsets = block_offsets(dims);
        Self { values: vec![0.0; *offsets.last().unwrap()], offsets }
    }

    /// Builds a vector from per-block entries.
    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::invalid("blocks", "need at least one block, each of dimension ≥ 1"));
        }
        let dims: Vec<usize> = blocks.iter().map(Vec::len).collect();
        let values: Vec<f64> = blocks.into_iter().flatten().collect();
        Self::from_flat(&dims, values)
    }

    pub fn from_flat(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let offsets = block_offsets(dims);
        if values.len() != *offsets.last().unwrap() {
            return Err(Error::mismatch(offsets.last().unwrap(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "entries must be finite"));
        }
        Ok(Self { values, offsets })
    }

    /// Number of blocks (`n + 1`).
    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dims(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.values[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_dims(&self, dims: &[usize]) -> Result<()> {
        let mine = self.dims();
        if mine != dims {
            return Err(Error::mismatch(format!("{dims:?}"), format!("{mine:?}")));
        }
        Ok(())
    }
}

/// A point `(p, q)` in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub p: BlockVector,
    pub q: BlockVector,
}

impl State {
    pub fn new(p: BlockVector, q: BlockVector) -> Result<Self> {
        if p.dims() != q.dims() {
            return Err(Error::mismatch(format!("{:?}", q.dims()), format!("{:?}", p.dims())));
        }
        Ok(Self { p, q })
    }

    pub fn is_finite(&self) -> bool {
        self.p.as_slice().iter().chain(self.q.as_slice()).all(|x| x.is_finite())
    }
}

/// Everything that defines the equations of motion.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    epsilon: f64,
    /// `(ω_0 = 0, ω_1, ..., ω_n)`.
    frequencies: Vec<f64>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    potential: Arc<dyn Potential>,
    monitor_radius: f64,
}

impl SystemConfig {
    /// `omega` holds `ω_1..ω_n`; block dimensions are taken from the potential.
    pub fn new(
        epsilon: f64,
        omega: Vec<f64>,
        potential: Arc<dyn Potential>,
        monitor_radius: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("need 0 < ε < 1, got {epsilon}")));
        }
        if !(monitor_radius > 0.0) {
            return Err(Error::invalid("monitor_radius", "must be positive"));
        }
        let dims = potential.dims().to_vec();
        if dims.len() != omega.len() + 1 {
            return Err(Error::mismatch(
                format!("{} frequencies", dims.len() - 1),
                format!("{} frequencies", omega.len()),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("dims", "block dimensions must be ≥ 1"));
        }
        let floor = 1.0 / epsilon;
        for (j, &w) in omega.iter().enumerate() {
            if !w.is_finite() || w < floor * (1.0 - 1e-12) {
                return Err(Error::invalid(
                    "omega",
                    format!("ω_{} = {w} is below 1/ε = {floor}", j + 1),
                ));
            }
        }
        let mut frequencies = Vec::with_capacity(omega.len() + 1);
        frequencies.push(0.0);
        frequencies.extend(omega);
        let offsets = block_offsets(&dims);
        Ok(Self { epsilon, frequencies, dims, offsets, potential, monitor_radius })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of fast blocks `n`.
    pub fn n(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Total number of scalar coordinates.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(0, ω_1, ..., ω_n)`.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Frequencies `ω_1..ω_n` of the fast blocks.
    pub fn omega(&self) -> &[f64] {
        &self.frequencies[1..]
    }

    /// Frequency of every scalar coordinate in the flat layout.
    pub fn component_frequencies(&self) -> Vec<f64> {
        self.dims
            .iter()
            .zip(&self.frequencies)
            .flat_map(|(&d, &w)| std::iter::repeat(w).take(d))
            .collect()
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn potential_arc(&self) -> Arc<dyn Potential> {
        Arc::clone(&self.potential)
    }

    pub fn monitor_radius(&self) -> f64 {
        self.monitor_radius
    }

    /// Same system with a different potential (block dimensions must agree).
    pub fn with_potential(&self, potential: Arc<dyn Potential>) -> Result<Self> {
        Self::new(self.epsilon, self.omega().to_vec(), potential, self.monitor_radius)
    }

    pub fn zero_vector(&self) -> BlockVector {
        BlockVector::zeros(&self.dims)
    }

    pub(crate) fn check(&self, v: &BlockVector) -> Result<()> {
        v.check_dims(&self.dims)
    }
}

/// `H`, `H_ω`, `H_slow` and the individual oscillator energies `E_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `E_j` for `j = 1..n`.
    pub per_mode: Vec<f64>,
    pub oscillatory: f64,
    pub slow: f64,
    pub total: f64,
}

/// Right-hand side of `q̈_j = -ω_j² q_j - ∇_j U(q)`.
pub fn acceleration(q: &BlockVector, config: &SystemConfig) -> Result<BlockVector> {
    config.check(q)?;
    let mut out = config.zero_vector();
    acceleration_flat(q.as_slice(), config, out.as_mut_slice());
    Ok(out)
}

pub(crate) fn acceleration_flat(q: &[f64], config: &SystemConfig, out: &mut [f64]) {
    config.potential().gradient(q, out);
    for j in 1..=config.n() {
        let w2 = config.frequencies[j] * config.frequencies[j];
        for i in config.offsets[j]..config.offsets[j + 1] {
            out[i] = -w2 * q[i] - out[i];
        }
    }
    for i in 0..config.offsets[1] {
        out[i] = -out[i];
    }
}

pub fn energies(p: &BlockVector, q: &BlockVector, config: &SystemConfig) -> Result<EnergyBreakdown> {
    config.check(p)?;
    config.check(q)?;
    Ok(energies_flat(p.as_slice(), q.as_slice(), config))
}

pub(crate) fn energies_flat(p: &[f64], q: &[f64], config: &SystemConfig) -> EnergyBreakdown {
    let per_mode: Vec<f64> = (1..=config.n())
        .map(|j| {
            let w2 = config.frequencies[j] * config.frequencies[j];
            (config.offsets[j]..config.offsets[j + 1])
                .map(|i| 0.5 * (p[i] * p[i] + w2 * q[i] * q[i]))
                .sum()
        })
        .collect();
    let oscillatory = per_mode.iter().sum();
    let kinetic: f64 = p[..config.offsets[1]].iter().map(|x| 0.5 * x * x).sum();
    let slow = kinetic + config.potential().value(q);
    EnergyBreakdown { per_mode, oscillatory, slow, total: oscillatory + slow }
}
