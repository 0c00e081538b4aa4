//! Coupling potentials with exact derivative tensors.
//!
//! The modulation potential of the expansion needs multilinear derivative
//! forms of `U` at slow-only points `(q_0, 0, ..., 0)`, contracted with complex
//! coefficient vectors. Potentials therefore expose those forms directly
//! instead of going through automatic differentiation.

use std::fmt::Debug;

use num_complex::Complex64;

use super::block_offsets;

/// Smooth coupling potential `U(q)` on the block space `R^{d_0} x ... x R^{d_n}`.
///
/// Positions are passed as flat slices laid out block after block.
pub trait Potential: Send + Sync + Debug {
    /// Block dimensions `(d_0, ..., d_n)` of the configuration space.
    fn dims(&self) -> &[usize];

    fn value(&self, q: &[f64]) -> f64;

    /// Full gradient of `U`, written into `out` (same layout as `q`).
    fn gradient(&self, q: &[f64], out: &mut [f64]);

    /// Highest derivative order for which [`Potential::derivative_form`] is exact.
    fn max_derivative_order(&self) -> usize;

    /// The m-linear form `∂_{j_1}...∂_{j_m} U(q_0, 0, ..., 0)` applied to
    /// `args`, where `blocks[l] = j_l` and `args[l]` lives in `C^{d_{j_l}}`.
    /// With `m = 0` this is `U(q_0, 0, ..., 0)`.
    fn derivative_form(&self, slow: &[f64], blocks: &[usize], args: &[&[Complex64]]) -> Complex64;

    /// Same form with one extra slot on block `free` left open; the result
    /// is the vector in `C^{d_free}` obtained by contracting all other slots.
    fn derivative_partial(
        &self,
        slow: &[f64],
        free: usize,
        blocks: &[usize],
        args: &[&[Complex64]],
        out: &mut [Complex64],
    ) {
        let dim = self.dims()[free];
        let mut all_blocks = Vec::with_capacity(blocks.len() + 1);
        all_blocks.push(free);
        all_blocks.extend_from_slice(blocks);
        let mut unit = vec![Complex64::new(0.0, 0.0); dim];
        for (i, slot) in out.iter_mut().enumerate().take(dim) {
            unit[i] = Complex64::new(1.0, 0.0);
            let mut all_args: Vec<&[Complex64]> = Vec::with_capacity(args.len() + 1);
            all_args.push(&unit);
            all_args.extend_from_slice(args);
            *slot = self.derivative_form(slow, &all_blocks, &all_args);
            unit[i] = Complex64::new(0.0, 0.0);
        }
    }

    /// Gradient with respect to block `j` only.
    fn block_gradient(&self, q: &[f64], j: usize) -> Vec<f64> {
        let offsets = block_offsets(self.dims());
        let mut full = vec![0.0; q.len()];
        self.gradient(q, &mut full);
        full[offsets[j]..offsets[j + 1]].to_vec()
    }
}

/// `U ≡ 0`: the decoupled harmonic case.
#[derive(Debug, Clone)]
pub struct ZeroPotential {
    dims: Vec<usize>,
}

impl ZeroPotential {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims }
    }
}

impl Potential for ZeroPotential {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, _q: &[f64]) -> f64 {
        0.0
    }

    fn gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    fn derivative_form(&self, _slow: &[f64], _blocks: &[usize], _args: &[&[Complex64]]) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn derivative_partial(
        &self,
        _slow: &[f64],
        _free: usize,
        _blocks: &[usize],
        _args: &[&[Complex64]],
        out: &mut [Complex64],
    ) {
        out.fill(Complex64::new(0.0, 0.0));
    }
}

/// `U(q) = ½ κ |q_0|² + (c·q)³` with a coefficient vector `c` spanning all blocks.
///
/// The test problem of the numerical experiments is the instance with
/// `d_j = 1`, `κ = 1` and `c = (a, 1, 1, 2, 3, 1, 1, 3)`.
#[derive(Debug, Clone)]
pub struct CubicCouplingPotential {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    coeffs: Vec<f64>,
    slow_stiffness: f64,
}

impl CubicCouplingPotential {
    /// `coeffs` is flat, in block layout.
    pub fn new(dims: Vec<usize>, coeffs: Vec<f64>, slow_stiffness: f64) -> Self {
        let offsets = block_offsets(&dims);
        assert_eq!(
            coeffs.len(),
            *offsets.last().unwrap(),
            "coefficient vector does not match block dimensions"
        );
        Self { dims, offsets, coeffs, slow_stiffness }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn block_coeffs(&self, j: usize) -> &[f64] {
        &self.coeffs[self.offsets[j]..self.offsets[j + 1]]
    }

    fn coupling_sum(&self, q: &[f64]) -> f64 {
        self.coeffs.iter().zip(q).map(|(c, x)| c * x).sum()
    }

    /// m-th derivative of `s ↦ s³` at `s`.
    fn cubic_derivative(s: f64, m: usize) -> f64 {
        match m {
            0 => s * s * s,
            1 => 3.0 * s * s,
            2 => 6.0 * s,
            3 => 6.0,
            _ => 0.0,
        }
    }

    fn slow_sum(&self, slow: &[f64]) -> f64 {
        self.block_coeffs(0).iter().zip(slow).map(|(c, x)| c * x).sum()
    }

    fn contract(&self, j: usize, x: &[Complex64]) -> Complex64 {
        self.block_coeffs(j).iter().zip(x).map(|(c, v)| v * *c).sum()
    }
}

/// The potential of the seven-frequency test problem, with coupling parameter `a`.
pub fn example_potential(a: f64) -> CubicCouplingPotential {
    CubicCouplingPotential::new(vec![1; 8], vec![a, 1.0, 1.0, 2.0, 3.0, 1.0, 1.0, 3.0], 1.0)
}

impl Potential for CubicCouplingPotential {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, q: &[f64]) -> f64 {
        let s = self.coupling_sum(q);
        let q0 = &q[..self.dims[0]];
        0.5 * self.slow_stiffness * q0.iter().map(|x| x * x).sum::<f64>() + s * s * s
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let s = self.coupling_sum(q);
        let f = 3.0 * s * s;
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            *o = f * c;
        }
        let d0 = self.dims[0];
        for (o, x) in out[..d0].iter_mut().zip(&q[..d0]) {
            *o += self.slow_stiffness * x;
        }
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    fn derivative_form(&self, slow: &[f64], blocks: &[usize], args: &[&[Complex64]]) -> Complex64 {
        let m = blocks.len();
        let s0 = self.slow_sum(slow);
        let mut product = Complex64::new(Self::cubic_derivative(s0, m), 0.0);
        if product.re != 0.0 {
            for (&j, x) in blocks.iter().zip(args) {
                product *= self.contract(j, x);
            }
        }
        let quadratic = match (m, blocks) {
            (0, _) => 0.5 * self.slow_stiffness * slow.iter().map(|x| x * x).sum::<f64>() * Complex64::new(1.0, 0.0),
            (1, [0]) => slow.iter().zip(args[0]).map(|(a, x)| x * *a).sum::<Complex64>() * self.slow_stiffness,
            (2, [0, 0]) => args[0].iter().zip(args[1]).map(|(x, y)| x * y).sum::<Complex64>() * self.slow_stiffness,
            _ => Complex64::new(0.0, 0.0),
        };
        product + quadratic
    }

    fn derivative_partial(
        &self,
        slow: &[f64],
        free: usize,
        blocks: &[usize],
        args: &[&[Complex64]],
        out: &mut [Complex64],
    ) {
        let m = blocks.len() + 1;
        let s0 = self.slow_sum(slow);
        let mut product = Complex64::new(Self::cubic_derivative(s0, m), 0.0);
        if product.re != 0.0 {
            for (&j, x) in blocks.iter().zip(args) {
                product *= self.contract(j, x);
            }
        }
        for (o, c) in out.iter_mut().zip(self.block_coeffs(free)) {
            *o = product * *c;
        }
        if free == 0 {
            match blocks {
                [] => {
                    for (o, a) in out.iter_mut().zip(slow) {
                        *o += self.slow_stiffness * a;
                    }
                }
                [0] => {
                    for (o, x) in out.iter_mut().zip(args[0]) {
                        *o += self.slow_stiffness * x;
                    }
                }
                _ => {}
            }
        }
    }
}
