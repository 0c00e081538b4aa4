//! Reconstruction, the almost-invariant `ℰ`, and its tracking over
//! consecutive windows.

use num_complex::Complex64;
use serde::Serialize;

use super::construct::{ConstructOptions, DefectReport, StopReason};
use super::{MfeContext, ModulationSet, ZERO};
use crate::error::{Error, Result};
use crate::integrator::reference_samples;
use crate::model::{energies, BlockVector, State, SystemConfig};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(q̃, q̃̇)` before taking real parts, flat layout.
#[derive(Debug, Clone)]
pub struct ComplexReconstruction {
    pub q: Vec<Complex64>,
    pub v: Vec<Complex64>,
    /// `q̃̈`.
    pub a: Vec<Complex64>,
}

fn check_real(values: &[Complex64], what: &str, tol: f64) -> Result<()> {
    for z in values {
        if z.im.abs() > tol * z.re.abs().max(1.0) {
            return Err(Error::Numerical(format!("{what} has imaginary residue {:e}", z.im)));
        }
    }
    Ok(())
}

impl ModulationSet {
    /// Sum of the expansion and its first two time derivatives at `t`.
    pub fn reconstruct_complex(&self, t: f64) -> Result<ComplexReconstruction> {
        let tau = self.tau(t)?;
        let s = t - self.t0;
        let idx = &self.index;
        let inv_ea = 1.0 / idx.window();
        let len: usize = idx.dims.iter().sum();
        let mut q = vec![ZERO; len];
        let mut v = vec![ZERO; len];
        let mut a = vec![ZERO; len];
        let mut offset = 0;
        for j in 0..idx.dims.len() {
            let d = idx.dims[j];
            for (i, &kd) in idx.kdot.iter().enumerate() {
                let f = self.get(j, i);
                let d1 = f.derivative();
                let (z0, z1, z2) = (f.eval(tau), d1.eval(tau), d1.derivative().eval(tau));
                let phase = (I * kd * s).exp();
                for c in 0..d {
                    q[offset + c] += phase * z0[c];
                    v[offset + c] += phase * (z1[c] * inv_ea + I * kd * z0[c]);
                    a[offset + c] += phase * (z2[c] * (inv_ea * inv_ea) + 2.0 * I * kd * inv_ea * z1[c] - kd * kd * z0[c]);
                }
            }
            offset += d;
        }
        Ok(ComplexReconstruction { q, v, a })
    }

    /// `(q̃(t), q̃̇(t))` as a state (the velocity is the momentum).
    pub fn reconstruct(&self, t: f64) -> Result<State> {
        let r = self.reconstruct_complex(t)?;
        check_real(&r.q, "reconstructed position", 1e-9)?;
        check_real(&r.v, "reconstructed velocity", 1e-9)?;
        let dims = &self.index.dims;
        State::new(
            BlockVector::from_flat(dims, r.v.iter().map(|z| z.re).collect())?,
            BlockVector::from_flat(dims, r.q.iter().map(|z| z.re).collect())?,
        )
    }

    /// `ℰ = −i Σ_j Σ_k (k·ϖ) y_j^{−k}·ẏ_j^k` before discarding the imaginary part.
    /// The phases of `y_j^{−k}` and `ẏ_j^k` cancel, so only `z` is needed.
    pub fn almost_invariant_complex(&self, t: f64) -> Result<Complex64> {
        let tau = self.tau(t)?;
        let idx = &self.index;
        let inv_ea = 1.0 / idx.window();
        let values = self.eval_all(tau);
        let mut total = ZERO;
        for (e, f) in self.funcs.iter().enumerate() {
            let i = idx.split(e).1;
            let kd = idx.kdot[i];
            if kd == 0.0 {
                continue;
            }
            let z = &values[e];
            let dz = f.derivative().eval(tau);
            let conj = &values[idx.conjugate_entry(e)];
            let dot: Complex64 = conj.iter().zip(z.iter().zip(&dz)).map(|(y, (z, dz))| y * (dz * inv_ea + I * kd * z)).sum();
            total += -I * kd * dot;
        }
        Ok(total)
    }

    pub fn almost_invariant(&self, t: f64) -> Result<f64> {
        let e = self.almost_invariant_complex(t)?;
        if e.im.abs() > 1e-10 * e.re.abs().max(f64::MIN_POSITIVE) && e.im.abs() > 1e-300 {
            return Err(Error::Numerical(format!("ℰ has imaginary part {:e} (real part {:e})", e.im, e.re)));
        }
        Ok(e.re)
    }

    /// `q̃̈ + ω² q̃ + ∇U(q̃)` at `t`: how far the reconstruction is from solving
    /// the equations of motion.
    pub fn motion_residual(&self, t: f64, sys: &SystemConfig) -> Result<Vec<f64>> {
        let r = self.reconstruct_complex(t)?;
        let q: Vec<f64> = r.q.iter().map(|z| z.re).collect();
        let mut g = vec![0.0; q.len()];
        sys.potential().gradient(&q, &mut g);
        let w = sys.component_frequencies();
        Ok((0..q.len()).map(|x| r.a[x].re + w[x] * w[x] * q[x] + g[x]).collect())
    }
}

/// Anything that can produce the exact states at given increasing times.
pub trait StateSource {
    fn states_at(&mut self, times: &[f64]) -> Result<Vec<State>>;
}

/// Reference RK4 solution from `state0` at `t = 0`.
#[derive(Debug, Clone)]
pub struct ReferenceSource {
    pub state0: State,
    pub sys: SystemConfig,
    pub h_max: f64,
}

impl ReferenceSource {
    /// Step bound `0.001 ε`.
    pub fn new(state0: State, sys: SystemConfig) -> Self {
        let h_max = 1e-3 * sys.epsilon();
        Self { state0, sys, h_max }
    }
}

impl StateSource for ReferenceSource {
    fn states_at(&mut self, times: &[f64]) -> Result<Vec<State>> {
        reference_samples(&self.state0, times, self.h_max, &self.sys)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    pub windows: usize,
    /// Sample points per window for the reconstruction error (`S + 1` times).
    pub samples_per_window: usize,
    pub construct: ConstructOptions,
}

impl TrackOptions {
    pub fn new(windows: usize) -> Self {
        Self { windows, samples_per_window: 16, construct: ConstructOptions::default() }
    }
}

/// Almost-invariant and energy on one window `[mε^α, (m+1)ε^α]`.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantSeries {
    pub window: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub e_start: f64,
    pub e_end: f64,
    /// `|ℰ(end) − ℰ(start)|`.
    pub drift: f64,
    /// `|ℰ_m(end) − ℰ_{m+1}(start)|`; absent for the last window.
    pub jump_to_next: Option<f64>,
    pub h_osc_start: f64,
    pub h_osc_end: f64,
    /// `max_t max_j (ω_j²|r_j|² + |ṙ_j|²)^{1/2}` over the sample times.
    pub reconstruction_error: f64,
    /// `max_t |q̃̈ + ω²q̃ + ∇U(q̃)|_∞` over the sample times.
    pub motion_residual: f64,
    pub sweeps: usize,
    pub final_defect: f64,
    pub stop_reason: StopReason,
    #[serde(skip)]
    pub defect: Option<DefectReport>,
}

/// Per-block `(ω_j²|r_j|² + |ṙ_j|²)^{1/2}`, maximum over blocks.
pub fn remainder_norm(exact: &State, approx: &State, sys: &SystemConfig) -> f64 {
    let w = sys.frequencies();
    (0..sys.dims().len())
        .map(|j| {
            let rq: f64 = exact.q.block(j).iter().zip(approx.q.block(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            let rp: f64 = exact.p.block(j).iter().zip(approx.p.block(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (w[j] * w[j] * rq + rp).sqrt()
        })
        .fold(0.0, f64::max)
}

fn window_series(
    ctx: &MfeContext,
    m: usize,
    t0: f64,
    states: &[State],
    times: &[f64],
    opts: &TrackOptions,
) -> Result<InvariantSeries> {
    let wrap = |e: Error| match e {
        Error::Divergence { detail, .. } => Error::Divergence { window: m, detail },
        other => Error::Divergence { window: m, detail: other.to_string() },
    };
    let (z, report) = ctx.construct(&states[0], t0, opts.construct).map_err(wrap)?;
    let t_end = *times.last().unwrap();
    let e_start = z.almost_invariant(t0).map_err(wrap)?;
    let e_end = z.almost_invariant(t_end).map_err(wrap)?;
    let mut reconstruction_error: f64 = 0.0;
    let mut motion_residual: f64 = 0.0;
    for (s, &t) in states.iter().zip(times) {
        let approx = z.reconstruct(t).map_err(wrap)?;
        reconstruction_error = reconstruction_error.max(remainder_norm(s, &approx, &ctx.sys));
        let d = z.motion_residual(t, &ctx.sys).map_err(wrap)?;
        motion_residual = motion_residual.max(d.iter().fold(0.0, |a, x| a.max(x.abs())));
    }
    let h = |s: &State| energies(&s.p, &s.q, &ctx.sys).map(|e| e.oscillatory);
    Ok(InvariantSeries {
        window: m,
        t_start: t0,
        t_end,
        e_start,
        e_end,
        drift: (e_end - e_start).abs(),
        jump_to_next: None,
        h_osc_start: h(&states[0])?,
        h_osc_end: h(states.last().unwrap())?,
        reconstruction_error,
        motion_residual,
        sweeps: report.history.len(),
        final_defect: report.sup,
        stop_reason: report.stop_reason,
        defect: Some(report),
    })
}

/// Builds an expansion on each of `windows` consecutive windows starting at
/// `t = 0` and records `ℰ` at both ends of every window.
pub fn track_invariant(ctx: &MfeContext, source: &mut dyn StateSource, opts: &TrackOptions) -> Result<Vec<InvariantSeries>> {
    if opts.windows == 0 {
        return Err(Error::invalid("windows", "need at least one window"));
    }
    if opts.samples_per_window == 0 {
        return Err(Error::invalid("samples_per_window", "need at least one sample"));
    }
    let l = ctx.index.window();
    let s = opts.samples_per_window;
    let mut window_times: Vec<Vec<f64>> = Vec::with_capacity(opts.windows);
    for m in 0..opts.windows {
        let t0 = m as f64 * l;
        window_times.push((0..=s).map(|i| if i == s { (m + 1) as f64 * l } else { t0 + l * i as f64 / s as f64 }).collect());
    }
    let flat: Vec<f64> = window_times.iter().flatten().copied().collect();
    let all_states = source.states_at(&flat)?;
    let chunks: Vec<&[State]> = all_states.chunks(s + 1).collect();

    let run = |m: usize| window_series(ctx, m, window_times[m][0], chunks[m], &window_times[m], opts);
    #[cfg(feature = "parallel")]
    let results: Vec<Result<InvariantSeries>> = {
        use rayon::prelude::*;
        (0..opts.windows).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<InvariantSeries>> = (0..opts.windows).map(run).collect();

    let mut series = results.into_iter().collect::<Result<Vec<_>>>()?;
    for m in 0..series.len().saturating_sub(1) {
        let next = series[m + 1].e_start;
        series[m].jump_to_next = Some((series[m].e_end - next).abs());
    }
    Ok(series)
}
