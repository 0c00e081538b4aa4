//! Chebyshev series on `τ ∈ [0, 1]` with complex vector values.

use std::f64::consts::PI;

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gauss–Lobatto nodes of degree `D` on `[0, 1]` and the matrices mapping
/// nodal values to Chebyshev coefficients and back.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    degree: usize,
    /// Ascending, `nodes[0] = 0`, `nodes[D] = 1`.
    nodes: Vec<f64>,
    to_coeffs: Vec<f64>,
    to_values: Vec<f64>,
    /// Values at [`SAMPLE_POINTS`] equispaced points, for sup norms that do
    /// not depend on the degree.
    to_samples: Vec<f64>,
}

pub const SAMPLE_POINTS: usize = 257;

impl ChebGrid {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 2, "Chebyshev degree must be at least 2");
        let d = degree;
        let np = d + 1;
        // node i sits at x = cos((D - i)π/D)
        let theta = |i: usize| (d - i) as f64 * PI / d as f64;
        let nodes = (0..np).map(|i| 0.5 * (1.0 + theta(i).cos())).collect();
        let mut to_values = vec![0.0; np * np];
        for i in 0..np {
            for k in 0..np {
                to_values[i * np + k] = (k as f64 * theta(i)).cos();
            }
        }
        let mut to_coeffs = vec![0.0; np * np];
        for k in 0..np {
            let ck = if k == 0 || k == d { 1.0 / d as f64 } else { 2.0 / d as f64 };
            for i in 0..np {
                let wi = if i == 0 || i == d { 0.5 } else { 1.0 };
                to_coeffs[k * np + i] = ck * wi * (k as f64 * theta(i)).cos();
            }
        }
        let mut to_samples = vec![0.0; SAMPLE_POINTS * np];
        for s in 0..SAMPLE_POINTS {
            let x = 2.0 * s as f64 / (SAMPLE_POINTS - 1) as f64 - 1.0;
            let (mut t0, mut t1) = (1.0, x);
            for k in 0..np {
                to_samples[s * np + k] = t0;
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
        }
        Self { degree, nodes, to_coeffs, to_values, to_samples }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn fit(&self, values: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.to_coeffs, values)
    }

    pub fn values(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.to_values, coeffs)
    }

    /// Values at `SAMPLE_POINTS` equispaced `τ` including both ends.
    pub fn samples(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.to_samples, coeffs)
    }
}

fn mat_vec(m: &[f64], v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    m.chunks(n).map(|row| row.iter().zip(v).map(|(a, x)| x * *a).sum()).collect()
}

/// Clenshaw evaluation of `Σ c_k T_k(2τ - 1)`.
pub fn eval(coeffs: &[Complex64], tau: f64) -> Complex64 {
    let x = 2.0 * tau - 1.0;
    let (mut b1, mut b2) = (ZERO, ZERO);
    for c in coeffs.iter().skip(1).rev() {
        let b0 = c + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + b1 * x - b2
}

/// Coefficients of `d/dτ` (same length; the top coefficient becomes zero).
pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut out = vec![ZERO; n];
    if n < 2 {
        return out;
    }
    // d/dx recurrence, then the factor 2 from x = 2τ - 1
    let (mut next, mut next2) = (ZERO, ZERO);
    for k in (1..n).rev() {
        let cur = next2 + coeffs[k] * (2.0 * k as f64);
        out[k - 1] = cur;
        next2 = next;
        next = cur;
    }
    out[0] *= 0.5;
    for c in out.iter_mut() {
        *c *= 2.0;
    }
    out
}

/// Coefficients of `∫_0^τ f`, truncated to the input length.
pub fn antiderivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let c = |k: usize| if k < n { coeffs[k] } else { ZERO };
    let mut out = vec![ZERO; n];
    if n > 1 {
        out[1] = c(0) - c(2) * 0.5;
    }
    for k in 2..n {
        out[k] = (c(k - 1) - c(k + 1)) / (2.0 * k as f64);
    }
    // value at x = -1 must vanish
    let at_left: Complex64 = out.iter().enumerate().skip(1).map(|(k, v)| if k % 2 == 0 { *v } else { -v }).sum();
    out[0] = -at_left;
    for v in out.iter_mut() {
        *v *= 0.5;
    }
    out
}

/// Zeroes the tail beyond the last coefficient of size at least `tol · max |c_k|`.
pub fn chop(coeffs: &mut [Complex64], tol: f64) {
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let keep = coeffs.iter().rposition(|c| c.norm() >= tol * max).map_or(0, |i| i + 1);
    for c in &mut coeffs[keep..] {
        *c = ZERO;
    }
}

/// `max |c_k|` over the last 10% of coefficients relative to `max |c_k|` overall.
pub fn tail_ratio(coeffs: &[Complex64]) -> f64 {
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let start = coeffs.len() - (coeffs.len() / 10).max(1);
    coeffs[start..].iter().map(|c| c.norm()).fold(0.0, f64::max) / max
}
