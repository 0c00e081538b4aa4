//! Integer lattices in `Z^n` given by generators, in Hermite normal form.

use serde::Serialize;

use crate::error::{Error, Result};

/// Column Hermite normal form of a generator matrix.
///
/// Columns are in echelon form: column `i` is zero above row `pivot_rows[i]`,
/// has a positive pivot there, and pivot rows strictly increase. Entries to
/// the left of a pivot are reduced into `[0, pivot)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HermiteBasis {
    dim: usize,
    columns: Vec<Vec<i64>>,
    pivot_rows: Vec<usize>,
}

fn overflow() -> Error {
    Error::Numerical("integer overflow in lattice arithmetic".into())
}

/// `col_a ← col_a - factor * col_b`, with overflow checks.
fn axpy(a: &mut [i64], b: &[i64], factor: i64) -> Result<()> {
    if factor == 0 {
        return Ok(());
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x = y.checked_mul(factor).and_then(|v| x.checked_sub(v)).ok_or_else(overflow)?;
    }
    Ok(())
}

impl HermiteBasis {
    /// Builds the basis of the lattice generated by `generators` (each of length `dim`).
    pub fn new(dim: usize, generators: &[Vec<i64>]) -> Result<Self> {
        let mut pool: Vec<Vec<i64>> = generators
            .iter()
            .filter(|g| g.iter().any(|&x| x != 0))
            .cloned()
            .collect();
        if pool.iter().any(|g| g.len() != dim) {
            return Err(Error::mismatch(dim, "generator of different length"));
        }
        let mut columns: Vec<Vec<i64>> = Vec::new();
        let mut pivot_rows = Vec::new();
        for row in 0..dim {
            // Euclid on the row entries of the remaining generators.
            loop {
                pool.retain(|g| g.iter().any(|&x| x != 0));
                let nonzero: Vec<usize> = (0..pool.len()).filter(|&i| pool[i][row] != 0).collect();
                if nonzero.len() <= 1 {
                    break;
                }
                let best = *nonzero.iter().min_by_key(|&&i| pool[i][row].unsigned_abs()).unwrap();
                let pivot = pool[best].clone();
                for &i in &nonzero {
                    if i != best {
                        let f = pool[i][row].div_euclid(pivot[row]);
                        axpy(&mut pool[i], &pivot, f)?;
                    }
                }
            }
            if let Some(i) = pool.iter().position(|g| g[row] != 0) {
                let mut col = pool.swap_remove(i);
                if col[row] < 0 {
                    for x in col.iter_mut() {
                        *x = x.checked_neg().ok_or_else(overflow)?;
                    }
                }
                columns.push(col);
                pivot_rows.push(row);
            }
        }
        // reduce earlier columns modulo each later pivot
        for i in 0..columns.len() {
            let (r, p) = (pivot_rows[i], columns[i][pivot_rows[i]]);
            let pivot = columns[i].clone();
            for col in columns.iter_mut().take(i) {
                let f = col[r].div_euclid(p);
                axpy(col, &pivot, f)?;
            }
        }
        Ok(Self { dim, columns, pivot_rows })
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<i64>] {
        &self.columns
    }

    /// Canonical representative of `k + L`: every pivot entry reduced into `[0, pivot)`.
    /// Two vectors lie in the same coset iff their reductions agree.
    pub fn reduce(&self, k: &[i64]) -> Result<Vec<i64>> {
        if k.len() != self.dim {
            return Err(Error::mismatch(self.dim, k.len()));
        }
        let mut out = k.to_vec();
        for (col, &r) in self.columns.iter().zip(&self.pivot_rows) {
            let f = out[r].div_euclid(col[r]);
            axpy(&mut out, col, f)?;
        }
        Ok(out)
    }

    pub fn contains(&self, k: &[i64]) -> Result<bool> {
        Ok(self.reduce(k)?.iter().all(|&x| x == 0))
    }

    /// Integer coefficients `x` with `k = Σ x_i columns[i]`, if `k` is in the lattice.
    pub fn solve(&self, k: &[i64]) -> Result<Option<Vec<i64>>> {
        let mut rest = k.to_vec();
        let mut coeffs = Vec::with_capacity(self.rank());
        for (col, &r) in self.columns.iter().zip(&self.pivot_rows) {
            if rest[r] % col[r] != 0 {
                return Ok(None);
            }
            let f = rest[r] / col[r];
            axpy(&mut rest, col, f)?;
            coeffs.push(f);
        }
        Ok(rest.iter().all(|&x| x == 0).then_some(coeffs))
    }
}
