//! Bookkeeping of the expansion: which `(j, k)` pairs exist, how each one is
//! updated, and which products of coefficient functions enter each gradient
//! of the modulation potential.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::resonance::{MultiIndex, ResonanceData};

/// How an entry `(j, k)` is updated in one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryKind {
    /// `(0, 0)`: second-order equation.
    Slow,
    /// `k` represents `±⟨j⟩`: first-order equation. `sign` is `±1`.
    Diagonal { sign: f64 },
    /// Everything else: explicit update with denominator `ϖ_j² - (k·ϖ)²`.
    Explicit { denom: f64 },
}

/// One product in `∇_j^{-k} 𝒰`: `coeff · ∂_j ∂_{j_1} .. ∂_{j_r} U(z_0^0)(z_{e_1}, .., z_{e_r})`.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: f64,
    pub entries: Vec<usize>,
    pub blocks: Vec<usize>,
}

/// Entries are numbered `j * |𝒦| + i` where `i` indexes [`ExpansionIndex::reps`].
#[derive(Debug, Clone)]
pub struct ExpansionIndex {
    pub epsilon: f64,
    pub alpha: f64,
    pub mu: f64,
    /// Distance from `α` to the next occupied logarithm.
    pub mu_eff: f64,
    pub order: usize,
    pub dims: Vec<usize>,
    /// `(0, ω_1, .., ω_n)`.
    pub omega: Vec<f64>,
    /// `(0, ϖ_1, .., ϖ_n)`.
    pub varpi: Vec<f64>,
    /// `2ϖ_jϑ_j - ϑ_j²`, zero for `j = 0`.
    pub beta: Vec<f64>,
    /// The representatives `𝒦`; `reps[0] = 0`.
    pub reps: Vec<MultiIndex>,
    /// `k·ϖ` per representative.
    pub kdot: Vec<f64>,
    /// Index of the representative of `-k`.
    pub neg: Vec<usize>,
    /// Per fast block `j ≥ 1`: indices of the representatives of `⟨j⟩` and `-⟨j⟩`.
    pub diagonal: Vec<(usize, usize)>,
    pub kinds: Vec<EntryKind>,
    pub terms: Vec<Vec<Term>>,
    /// Representative norm `‖k‖` used in size bounds.
    pub norms: Vec<u64>,
}

fn factorial(r: usize) -> f64 {
    (1..=r).map(|x| x as f64).product()
}

impl ExpansionIndex {
    pub fn new(sys: &SystemConfig, res: &ResonanceData) -> Result<Self> {
        let n = sys.n();
        if res.n() != n {
            return Err(Error::mismatch(format!("{n} frequencies"), format!("{} in resonance data", res.n())));
        }
        let order = res.order;
        let needed = order + 1;
        let available = sys.potential().max_derivative_order();
        if available < needed {
            return Err(Error::DerivativeOrder { order: needed, available });
        }
        let reps = res.representatives.clone();
        if reps.first().map(|k| !k.is_zero()).unwrap_or(true) {
            return Err(Error::Numerical("representative list must start with 0".into()));
        }
        let nk = reps.len();
        let find = |k: &MultiIndex| -> Result<usize> {
            res.representative_index(k)
                .ok_or_else(|| Error::Numerical(format!("no representative for class of {k}")))
        };
        let neg = reps.iter().map(|k| find(&k.neg())).collect::<Result<Vec<_>>>()?;
        let diagonal = (1..=n)
            .map(|j| {
                let e = MultiIndex::unit(n, j);
                Ok((find(&e)?, find(&e.neg())?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut varpi = vec![0.0];
        varpi.extend_from_slice(&res.varpi);
        let mut beta = vec![0.0];
        beta.extend(res.varpi.iter().zip(&res.theta).map(|(w, t)| 2.0 * w * t - t * t));
        let kdot: Vec<f64> = reps.iter().map(|k| res.modified_dot(k)).collect();
        let dims = sys.dims().to_vec();

        let mut kinds = Vec::with_capacity((n + 1) * nk);
        for j in 0..=n {
            for (i, kd) in kdot.iter().enumerate() {
                let kind = if j == 0 && i == 0 {
                    EntryKind::Slow
                } else if j > 0 && diagonal[j - 1].0 == i {
                    EntryKind::Diagonal { sign: 1.0 }
                } else if j > 0 && diagonal[j - 1].1 == i {
                    EntryKind::Diagonal { sign: -1.0 }
                } else {
                    let denom = varpi[j] * varpi[j] - kd * kd;
                    if denom.abs() < 1e-300 {
                        return Err(Error::Numerical(format!(
                            "vanishing denominator for j = {j}, k = {}",
                            reps[i]
                        )));
                    }
                    EntryKind::Explicit { denom }
                };
                kinds.push(kind);
            }
        }

        let mut index = Self {
            epsilon: res.epsilon,
            alpha: res.alpha(),
            mu: res.mu(),
            mu_eff: res.gap.effective_width(),
            order,
            dims,
            omega: sys.frequencies().to_vec(),
            varpi,
            beta,
            norms: reps.iter().map(MultiIndex::norm).collect(),
            reps,
            kdot,
            neg,
            diagonal,
            kinds,
            terms: Vec::new(),
        };
        index.terms = index.build_terms(res)?;
        Ok(index)
    }

    pub fn num_reps(&self) -> usize {
        self.reps.len()
    }

    pub fn num_entries(&self) -> usize {
        self.dims.len() * self.reps.len()
    }

    pub fn entry(&self, j: usize, kidx: usize) -> usize {
        j * self.reps.len() + kidx
    }

    /// `(j, kidx)` of an entry.
    pub fn split(&self, e: usize) -> (usize, usize) {
        (e / self.reps.len(), e % self.reps.len())
    }

    pub fn dim(&self, e: usize) -> usize {
        self.dims[e / self.reps.len()]
    }

    /// Entry holding `z_j^{-k}` for entry `e = (j, k)`.
    pub fn conjugate_entry(&self, e: usize) -> usize {
        let (j, i) = self.split(e);
        self.entry(j, self.neg[i])
    }

    /// `ε^α`, the window length in `t`.
    pub fn window(&self) -> f64 {
        self.epsilon.powf(self.alpha)
    }

    fn build_terms(&self, res: &ResonanceData) -> Result<Vec<Vec<Term>>> {
        let ne = self.num_entries();
        let nk = self.num_reps();
        let mut all = Vec::with_capacity(ne);
        for target in 0..ne {
            let ki = target % nk;
            let max_r = if target == 0 { self.order } else { self.order - 1 };
            let mut terms = Vec::new();
            let mut stack = Vec::new();
            let start = self.reps[ki].neg();
            self.collect_tuples(res, max_r, &start, &mut stack, &mut terms)?;
            all.push(terms);
        }
        Ok(all)
    }

    /// Depth-first enumeration of ordered tuples `(e_1, .., e_r)`, `r ≤ max_r`,
    /// with `Σ k^l - k ∈ ℳ`. `partial` carries `Σ k^l - k`.
    fn collect_tuples(
        &self,
        res: &ResonanceData,
        max_r: usize,
        partial: &MultiIndex,
        stack: &mut Vec<usize>,
        out: &mut Vec<Term>,
    ) -> Result<()> {
        let nk = self.num_reps();
        if res.module.contains(partial.as_slice())? {
            out.push(Term {
                coeff: 1.0 / factorial(stack.len()),
                entries: stack.clone(),
                blocks: stack.iter().map(|&e| e / nk).collect(),
            });
        }
        if stack.len() == max_r {
            return Ok(());
        }
        for e in 1..self.num_entries() {
            let next = partial.add(&self.reps[e % nk]);
            stack.push(e);
            self.collect_tuples(res, max_r, &next, stack, out)?;
            stack.pop();
        }
        Ok(())
    }
}

/// Evaluates `∇_j^{-k} 𝒰` for entry `target` from per-entry values at one point.
/// `values[e]` lives in `C^{d_j}`; the base point is `Re z_0^0`.
pub fn gradient_at(
    index: &ExpansionIndex,
    sys: &SystemConfig,
    values: &[&[Complex64]],
    target: usize,
    out: &mut [Complex64],
) {
    let (j, _) = index.split(target);
    let slow: Vec<f64> = values[0].iter().map(|z| z.re).collect();
    let u = sys.potential();
    out.fill(Complex64::new(0.0, 0.0));
    let mut tmp = vec![Complex64::new(0.0, 0.0); out.len()];
    let mut args: Vec<&[Complex64]> = Vec::new();
    for term in &index.terms[target] {
        args.clear();
        args.extend(term.entries.iter().map(|&e| values[e]));
        u.derivative_partial(&slow, j, &term.blocks, &args, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t * term.coeff;
        }
    }
}

/// `𝒰(z)` at one point, summed directly over ordered tuples with
/// `Σ k^l ∈ ℳ`. Independent of the precomputed gradient lists.
pub fn potential_value_at(
    index: &ExpansionIndex,
    res: &ResonanceData,
    sys: &SystemConfig,
    values: &[&[Complex64]],
) -> Result<Complex64> {
    let slow: Vec<f64> = values[0].iter().map(|z| z.re).collect();
    let u = sys.potential();
    let nk = index.num_reps();
    let ne = index.num_entries();
    let mut total = u.derivative_form(&slow, &[], &[]);
    for m in 1..=index.order {
        let mut tuple = vec![1usize; m];
        loop {
            let mut sum = MultiIndex::zero(index.dims.len() - 1);
            for &e in &tuple {
                sum = sum.add(&index.reps[e % nk]);
            }
            if res.module.contains(sum.as_slice())? {
                let blocks: Vec<usize> = tuple.iter().map(|&e| e / nk).collect();
                let args: Vec<&[Complex64]> = tuple.iter().map(|&e| values[e]).collect();
                total += u.derivative_form(&slow, &blocks, &args) / factorial(m);
            }
            // odometer over entries 1..ne
            let mut pos = 0;
            loop {
                if pos == m {
                    break;
                }
                tuple[pos] += 1;
                if tuple[pos] < ne {
                    break;
                }
                tuple[pos] = 1;
                pos += 1;
            }
            if pos == m {
                break;
            }
        }
    }
    Ok(total)
}
