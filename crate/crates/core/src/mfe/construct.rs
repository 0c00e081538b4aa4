//! The iteration for the coefficient functions and its defects.

use num_complex::Complex64;
use serde::Serialize;

use super::index::{gradient_at, EntryKind};
use super::{CoeffFunction, MfeContext, ModulationSet, ZERO};
use crate::error::{Error, Result};
use crate::model::State;
use crate::resonance::MultiIndex;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Sup defect reached the target.
    Converged,
    /// Defect ratio above 0.99 for five consecutive sweeps.
    Stagnated,
    MaxSweeps,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryDefect {
    pub j: usize,
    pub k: MultiIndex,
    pub sup: f64,
}

/// One sweep of the construction: defect of the iterate going in.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub sup_defect: f64,
    /// `‖Λ(z^{m+1} - z^m)‖_{C²}`.
    pub lambda_c2: f64,
    /// `‖Λ(z^{m+1} - z^m)‖_{C⁴}`.
    pub lambda_c4: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub per_entry: Vec<EntryDefect>,
    pub sup: f64,
    pub lambda_c2: f64,
    /// Index `m` of the iterate the defects belong to.
    pub iteration: usize,
    pub stop_reason: StopReason,
    pub history: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ConstructOptions {
    /// Defaults to `min(⌈(N+1)/μ_eff⌉, 2000)`.
    pub max_sweeps: Option<usize>,
    /// Defaults to `ε^{N+1}`.
    pub target_defect: Option<f64>,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self { max_sweeps: None, target_defect: None }
    }
}

impl MfeContext {
    pub fn default_max_sweeps(&self) -> usize {
        let n1 = (self.index.order + 1) as f64;
        ((n1 / self.index.mu_eff).ceil() as usize).clamp(1, 2000)
    }

    pub fn default_target(&self) -> f64 {
        self.index.epsilon.powi(self.index.order as i32 + 1)
    }

    fn check_state(&self, state: &State) -> Result<()> {
        if state.q.dims() != self.sys.dims() || state.p.dims() != self.sys.dims() {
            return Err(crate::Error::mismatch(format!("{:?}", self.sys.dims()), format!("{:?}", state.q.dims())));
        }
        if !state.is_finite() {
            return Err(Error::invalid("state", "non-finite initial data"));
        }
        Ok(())
    }

    /// `∇_0 U(y, 0, .., 0)`.
    fn slow_force(&self, y: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.sys.len()];
        q[..y.len()].copy_from_slice(y);
        let mut g = vec![0.0; q.len()];
        self.sys.potential().gradient(&q, &mut g);
        g.truncate(y.len());
        g
    }

    /// Slow subsystem `ÿ = -∇_0 U(y, 0, .., 0)` sampled at `t = ε^α τ_i`.
    fn slow_solution(&self, q0: &[f64], p0: &[f64]) -> Result<Vec<f64>> {
        let d = q0.len();
        let l = self.index.window();
        let h_max = l / 4000.0;
        let (mut y, mut v) = (q0.to_vec(), p0.to_vec());
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.grid.len() * d);
        for &tau in self.grid.nodes() {
            let target = l * tau;
            let span = target - t;
            if span > 0.0 {
                let steps = (span / h_max).ceil() as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    let a1 = self.slow_force(&y);
                    let y2: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * v[i]).collect();
                    let v2: Vec<f64> = (0..d).map(|i| v[i] - 0.5 * h * a1[i]).collect();
                    let a2 = self.slow_force(&y2);
                    let y3: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * v2[i]).collect();
                    let v3: Vec<f64> = (0..d).map(|i| v[i] - 0.5 * h * a2[i]).collect();
                    let a3 = self.slow_force(&y3);
                    let y4: Vec<f64> = (0..d).map(|i| y[i] + h * v3[i]).collect();
                    let v4: Vec<f64> = (0..d).map(|i| v[i] - h * a3[i]).collect();
                    let a4 = self.slow_force(&y4);
                    for i in 0..d {
                        y[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
                        v[i] -= h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
                    }
                }
            }
            t = target;
            out.extend_from_slice(&y);
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("slow subsystem solve produced non-finite values".into()));
        }
        Ok(out)
    }

    /// Starting iterate: the slow solution for `z_0^0`, zero off the diagonal,
    /// and diagonal constants that reproduce `(q(t₀), q̇(t₀))`.
    pub fn starting_iterate(&self, state0: &State, t0: f64) -> Result<ModulationSet> {
        self.check_state(state0)?;
        let idx = &self.index;
        let deg = self.grid.degree();
        let mut funcs: Vec<CoeffFunction> =
            (0..idx.num_entries()).map(|e| CoeffFunction::zero(idx.dim(e), deg)).collect();
        let slow = self.slow_solution(state0.q.block(0), state0.p.block(0))?;
        let slow: Vec<Complex64> = slow.into_iter().map(re).collect();
        let fit = CoeffFunction::from_nodal(&self.grid, idx.dims[0], &slow);
        // fix value and slope at τ = 0 exactly: add (Δq) + (Δq')τ
        let (v0, dv0) = (fit.eval(0.0), fit.derivative().eval(0.0));
        let ea = idx.window();
        let mut comps = fit.coeffs().to_vec();
        for (c, comp) in comps.iter_mut().enumerate() {
            let dq = re(state0.q.block(0)[c]) - v0[c];
            let dv = re(ea * state0.p.block(0)[c]) - dv0[c];
            comp[0] += dq + dv * 0.5;
            comp[1] += dv * 0.5;
        }
        funcs[0] = CoeffFunction::from_coeffs(comps);
        for j in 1..idx.dims.len() {
            let w = idx.varpi[j];
            let (ip, im) = idx.diagonal[j - 1];
            let q = state0.q.block(j);
            let p = state0.p.block(j);
            let a: Vec<Complex64> = q.iter().zip(p).map(|(&q, &p)| (re(q) + re(p) / (I * w)) * 0.5).collect();
            let b: Vec<Complex64> = q.iter().zip(p).map(|(&q, &p)| (re(q) - re(p) / (I * w)) * 0.5).collect();
            funcs[idx.entry(j, ip)] = CoeffFunction::constant(&a, deg);
            funcs[idx.entry(j, im)] = CoeffFunction::constant(&b, deg);
        }
        Ok(ModulationSet {
            index: self.index.clone(),
            grid: self.grid.clone(),
            funcs,
            t0,
            initial: state0.clone(),
        })
    }

    /// Nodal values of `∇_j^{-k} 𝒰(z)` for every entry, node-major.
    pub fn gradient_nodal(&self, z: &ModulationSet) -> Vec<Vec<Complex64>> {
        let idx = &self.index;
        let nodal = z.nodal_all();
        let ne = idx.num_entries();
        let mut out: Vec<Vec<Complex64>> = (0..ne).map(|e| vec![ZERO; self.grid.len() * idx.dim(e)]).collect();
        let mut vals: Vec<&[Complex64]> = Vec::with_capacity(ne);
        for i in 0..self.grid.len() {
            vals.clear();
            vals.extend((0..ne).map(|e| {
                let d = idx.dim(e);
                &nodal[e][i * d..(i + 1) * d]
            }));
            for (e, o) in out.iter_mut().enumerate() {
                let d = idx.dim(e);
                gradient_at(idx, &self.sys, &vals, e, &mut o[i * d..(i + 1) * d]);
            }
        }
        out
    }

    /// `∇_j^{-k} 𝒰(z)` at one `τ`.
    pub fn modulation_potential_gradient(&self, z: &ModulationSet, j: usize, k: &MultiIndex, tau: f64) -> Result<Vec<Complex64>> {
        let kidx = self
            .index
            .reps
            .iter()
            .position(|r| r == k)
            .ok_or_else(|| Error::invalid("k", format!("{k} is not a representative")))?;
        if j >= self.index.dims.len() {
            return Err(Error::invalid("j", format!("block {j} does not exist")));
        }
        let values = z.eval_all(tau);
        let refs: Vec<&[Complex64]> = values.iter().map(|v| v.as_slice()).collect();
        let e = self.index.entry(j, kidx);
        let mut out = vec![ZERO; self.index.dim(e)];
        gradient_at(&self.index, &self.sys, &refs, e, &mut out);
        Ok(out)
    }

    /// One sweep `z^m → z^{m+1}`.
    pub fn iterate(&self, z: &ModulationSet) -> Result<ModulationSet> {
        let idx = &self.index;
        let grid = &self.grid;
        let ea = idx.window();
        let inv_ea = 1.0 / ea;
        let grads: Vec<CoeffFunction> = self
            .gradient_nodal(z)
            .iter()
            .enumerate()
            .map(|(e, g)| CoeffFunction::from_nodal(grid, idx.dim(e), g))
            .collect();
        let ne = idx.num_entries();
        let mut new: Vec<Option<CoeffFunction>> = vec![None; ne];

        // explicit entries depend on z^m only
        for e in 0..ne {
            if let EntryKind::Explicit { denom } = idx.kinds[e] {
                let (j, i) = idx.split(e);
                let zm = &z.funcs[e];
                let d1 = zm.derivative();
                let d2 = d1.derivative();
                let kd = idx.kdot[i];
                let rhs = zm
                    .combine(re(idx.beta[j]), &grads[e], re(-1.0))
                    .combine(re(1.0), &d1, -2.0 * I * kd * inv_ea)
                    .combine(re(1.0), &d2, re(-inv_ea * inv_ea));
                new[e] = Some(rhs.map_coeffs(|c| c / denom));
            }
        }

        let nk = idx.num_reps();
        for j in 0..idx.dims.len() {
            let d = idx.dims[j];
            let mut rest_q = vec![ZERO; d];
            let mut rest_v = vec![ZERO; d];
            for i in 0..nk {
                let e = idx.entry(j, i);
                if let Some(f) = &new[e] {
                    let v0 = f.eval(0.0);
                    let dv0 = f.derivative().eval(0.0);
                    for c in 0..d {
                        rest_q[c] += v0[c];
                        rest_v[c] += dv0[c] * inv_ea + I * idx.kdot[i] * v0[c];
                    }
                }
            }
            let q0 = z.initial.q.block(j);
            let p0 = z.initial.p.block(j);
            let big_q: Vec<Complex64> = (0..d).map(|c| re(q0[c]) - rest_q[c]).collect();
            let big_v: Vec<Complex64> = (0..d).map(|c| re(p0[c]) - rest_v[c]).collect();
            if j == 0 {
                // z(τ) = Q + ε^α V τ − ε^{2α} ∫∫ G
                let g2 = grads[0].antiderivative().antiderivative();
                let mut f = g2.map_coeffs(|c| c * (-ea * ea));
                let mut comps = f.coeffs().to_vec();
                for c in 0..d {
                    comps[c][0] += big_q[c] + big_v[c] * (0.5 * ea);
                    comps[c][1] += big_v[c] * (0.5 * ea);
                }
                f = CoeffFunction::from_coeffs(comps);
                new[0] = Some(f);
                continue;
            }
            let (ip, im) = idx.diagonal[j - 1];
            let (ep, em) = (idx.entry(j, ip), idx.entry(j, im));
            let w = idx.varpi[j];
            let beta = idx.beta[j];
            let forcing = |e: usize| -> CoeffFunction {
                let d2 = z.funcs[e].derivative().derivative();
                grads[e].combine(re(1.0), &d2, re(inv_ea * inv_ea))
            };
            let (fp, fm) = (forcing(ep), forcing(em));
            let (fp0, fm0) = (fp.eval(0.0), fm.eval(0.0));
            let c_coef = I * (w - beta / (2.0 * w));
            let mut a = vec![ZERO; d];
            let mut b = vec![ZERO; d];
            for c in 0..d {
                let wv = big_v[c] + (fp0[c] - fm0[c]) / (2.0 * I * w);
                a[c] = (big_q[c] + wv / c_coef) * 0.5;
                b[c] = (big_q[c] - wv / c_coef) * 0.5;
            }
            new[ep] = Some(self.first_order_solve(&fp, &a, 1.0, w, beta));
            new[em] = Some(self.first_order_solve(&fm, &b, -1.0, w, beta));
        }
        let funcs: Vec<CoeffFunction> = new
            .into_iter()
            .enumerate()
            .map(|(e, f)| f.ok_or_else(|| Error::Numerical(format!("entry {e} not updated"))))
            .collect::<Result<_>>()?;
        if funcs.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numerical("iteration produced non-finite coefficients".into()));
        }
        Ok(ModulationSet { funcs, ..z.clone_meta() })
    }

    /// Solves `s·2iϖ ε^{-α} z' = β z − F`, `z(0) = z0`, by variation of constants.
    fn first_order_solve(&self, forcing: &CoeffFunction, z0: &[Complex64], sign: f64, w: f64, beta: f64) -> CoeffFunction {
        let grid = &self.grid;
        let ea = self.index.window();
        let denom = 2.0 * I * sign * w;
        let lambda = ea * beta / denom;
        let d = z0.len();
        let f_nodal = forcing.nodal(grid);
        let np = grid.len();
        let mut g = vec![ZERO; np * d];
        for (i, &tau) in grid.nodes().iter().enumerate() {
            let damp = (-lambda * tau).exp();
            for c in 0..d {
                g[i * d + c] = -f_nodal[i * d + c] * ea / denom * damp;
            }
        }
        let integral = CoeffFunction::from_nodal(grid, d, &g).antiderivative().nodal(grid);
        let mut vals = vec![ZERO; np * d];
        for (i, &tau) in grid.nodes().iter().enumerate() {
            let grow = (lambda * tau).exp();
            for c in 0..d {
                vals[i * d + c] = grow * (z0[c] + integral[i * d + c]);
            }
        }
        CoeffFunction::from_nodal(grid, d, &vals)
    }

    /// Closed-form defects of `z^m` from the difference `z^{m+1} − z^m`.
    pub fn defect_functions(&self, zm: &ModulationSet, zm1: &ModulationSet) -> Vec<CoeffFunction> {
        let idx = &self.index;
        let inv_ea = 1.0 / idx.window();
        (0..idx.num_entries())
            .map(|e| {
                let diff = zm1.funcs[e].combine(re(1.0), &zm.funcs[e], re(-1.0));
                let j = idx.split(e).0;
                let delta = match idx.kinds[e] {
                    EntryKind::Slow => diff.derivative().derivative().map_coeffs(|c| c * (-inv_ea * inv_ea)),
                    EntryKind::Diagonal { sign } => diff
                        .derivative()
                        .combine(-2.0 * I * sign * idx.varpi[j] * inv_ea, &diff, re(idx.beta[j])),
                    EntryKind::Explicit { denom } => diff.map_coeffs(|c| c * (-denom)),
                };
                delta
            })
            .collect()
    }

    /// Closed-form defects at the grid nodes.
    pub fn defect_nodal(&self, zm: &ModulationSet, zm1: &ModulationSet) -> Vec<Vec<Complex64>> {
        self.defect_functions(zm, zm1).iter().map(|f| f.nodal(&self.grid)).collect()
    }

    /// Residual of `z` in the modulation equations, evaluated directly.
    pub fn residual_nodal(&self, z: &ModulationSet) -> Vec<Vec<Complex64>> {
        let idx = &self.index;
        let inv_ea = 1.0 / idx.window();
        let grads = self.gradient_nodal(z);
        (0..idx.num_entries())
            .map(|e| {
                let (j, i) = idx.split(e);
                let (lin, kd) = match idx.kinds[e] {
                    EntryKind::Slow => (0.0, 0.0),
                    EntryKind::Diagonal { sign } => (0.0, sign * idx.varpi[j]),
                    EntryKind::Explicit { denom } => (denom, idx.kdot[i]),
                };
                let f = &z.funcs[e];
                let v0 = f.nodal(&self.grid);
                let v1 = f.derivative().nodal(&self.grid);
                let v2 = f.derivative().derivative().nodal(&self.grid);
                (0..v0.len())
                    .map(|x| {
                        v0[x] * (lin - idx.beta[j])
                            + 2.0 * I * kd * inv_ea * v1[x]
                            + v2[x] * (inv_ea * inv_ea)
                            + grads[e][x]
                    })
                    .collect()
            })
            .collect()
    }

    /// `‖Λ(z1 − z0)‖_{C^r}`.
    pub fn lambda_norm(&self, z0: &ModulationSet, z1: &ModulationSet, r: usize) -> f64 {
        let idx = &self.index;
        let inv_ea = 1.0 / idx.window();
        let np = super::cheb::SAMPLE_POINTS;
        let mut best: f64 = 0.0;
        let mut sums = vec![vec![0.0; np]; r + 1];
        for e in 0..idx.num_entries() {
            let j = idx.split(e).0;
            let scale = match idx.kinds[e] {
                EntryKind::Slow => inv_ea * inv_ea,
                EntryKind::Diagonal { .. } => 2.0 * idx.varpi[j] * inv_ea,
                EntryKind::Explicit { denom } => denom.abs(),
            };
            let mut diff = z1.funcs[e].combine(re(1.0), &z0.funcs[e], re(-1.0));
            let d = diff.dim();
            for sum in sums.iter_mut() {
                let vals = diff.sampled(&self.grid);
                for (i, s) in sum.iter_mut().enumerate() {
                    let norm = vals[i * d..(i + 1) * d].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    *s += scale * norm;
                }
                diff = diff.derivative();
            }
        }
        for sum in &sums {
            best = best.max(sum.iter().copied().fold(0.0, f64::max));
        }
        best
    }

    /// Defect report of `z^m` given the next iterate.
    pub fn defect(&self, zm: &ModulationSet, zm1: &ModulationSet) -> DefectReport {
        let sups: Vec<f64> = self.defect_functions(zm, zm1).iter().map(|f| f.sup_norm(&self.grid)).collect();
        let idx = &self.index;
        let per_entry: Vec<EntryDefect> = sups
            .iter()
            .enumerate()
            .map(|(e, &sup)| {
                let (j, i) = idx.split(e);
                EntryDefect { j, k: idx.reps[i].clone(), sup }
            })
            .collect();
        DefectReport {
            sup: sups.iter().copied().fold(0.0, f64::max),
            per_entry,
            lambda_c2: self.lambda_norm(zm, zm1, 2),
            iteration: 0,
            stop_reason: StopReason::MaxSweeps,
            history: Vec::new(),
        }
    }

    /// Sweeps from the starting iterate until the defect target, stagnation
    /// or the sweep budget. Returns the last iterate whose defect was measured.
    pub fn construct(&self, state0: &State, t0: f64, opts: ConstructOptions) -> Result<(ModulationSet, DefectReport)> {
        let max_sweeps = opts.max_sweeps.unwrap_or_else(|| self.default_max_sweeps()).max(1);
        let target = opts.target_defect.unwrap_or_else(|| self.default_target());
        let mut z = self.starting_iterate(state0, t0)?;
        let mut history: Vec<SweepRecord> = Vec::new();
        let mut initial = None;
        let mut slow_sweeps = 0;
        for sweep in 1..=max_sweeps {
            let z1 = self.iterate(&z)?;
            let mut report = self.defect(&z, &z1);
            let first = *initial.get_or_insert(report.sup);
            history.push(SweepRecord {
                sweep,
                sup_defect: report.sup,
                lambda_c2: report.lambda_c2,
                lambda_c4: self.lambda_norm(&z, &z1, 4),
            });
            if !report.sup.is_finite() || report.sup > 10.0 * first && report.sup > target {
                return Err(Error::Divergence {
                    window: 0,
                    detail: format!(
                        "sup defect grew from {first:.3e} to {:.3e} after {sweep} sweeps",
                        report.sup
                    ),
                });
            }
            let stop = if report.sup <= target {
                Some(StopReason::Converged)
            } else {
                if history.len() >= 2 {
                    let prev = history[history.len() - 2].sup_defect;
                    if report.sup > 0.99 * prev {
                        slow_sweeps += 1;
                    } else {
                        slow_sweeps = 0;
                    }
                }
                if slow_sweeps >= 5 {
                    Some(StopReason::Stagnated)
                } else if sweep == max_sweeps {
                    Some(StopReason::MaxSweeps)
                } else {
                    None
                }
            };
            if let Some(reason) = stop {
                report.iteration = sweep - 1;
                report.stop_reason = reason;
                report.history = history;
                return Ok((z, report));
            }
            z = z1;
        }
        unreachable!("loop returns on the last sweep")
    }
}

impl ModulationSet {
    fn clone_meta(&self) -> ModulationSet {
        ModulationSet {
            index: self.index.clone(),
            grid: self.grid.clone(),
            funcs: Vec::new(),
            t0: self.t0,
            initial: self.initial.clone(),
        }
    }
}
