//! Fixed-step time integration of `q̈ = -Ω² q - ∇U(q)`.
//!
//! The production scheme is the symplectic trigonometric method of Deuflhard
//! (filters `φ = 1`, `ψ = sinc`):
//!
//! ```text
//! q⁺ = cos(hΩ) q + Ω⁻¹ sin(hΩ) p + ½ h² sinc(hΩ) g(q)
//! p⁺ = -Ω sin(hΩ) q + cos(hΩ) p + ½ h (cos(hΩ) g(q) + g(q⁺))
//! ```
//!
//! with `g = -∇U`. On the slow block (`ω_0 = 0`) this is Störmer–Verlet.
//! A classical RK4 integrator serves as the reference solution in tests.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{energies_flat, EnergyBreakdown, State, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    Trigonometric,
    /// Classical RK4 on the first-order system.
    Reference,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub h: f64,
    pub scheme: Scheme,
    /// Record every `record_stride`-th step.
    pub record_stride: u64,
    /// Keep full `(p, q)` states in the trajectory, not just energies.
    pub keep_states: bool,
}

impl IntegratorConfig {
    pub fn trigonometric(h: f64, record_stride: u64) -> Self {
        Self { h, scheme: Scheme::Trigonometric, record_stride, keep_states: false }
    }

    pub fn reference(h: f64, record_stride: u64) -> Self {
        Self { h, scheme: Scheme::Reference, record_stride, keep_states: false }
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("h", "step size must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<EnergyBreakdown>,
    /// Empty unless states were requested.
    pub states: Vec<State>,
    /// Time at which `|q_0|` first exceeded the monitor radius.
    pub left_region_at: Option<f64>,
    /// `max |H_ω(t) - H_ω(0)|` over every step, and the time it occurred.
    pub max_deviation: (f64, f64),
    pub steps: u64,
    pub final_state: State,
}

impl Trajectory {
    /// `max |H_ω(t) - H_ω(0)|` over recorded samples only, with its time.
    pub fn max_sampled_deviation(&self) -> (f64, f64) {
        let h0 = self.energies[0].oscillatory;
        self.energies
            .iter()
            .zip(&self.times)
            .map(|(e, &t)| ((e.oscillatory - h0).abs(), t))
            .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
    }
}

/// Precomputed `cos`, `sin` factors of the trigonometric scheme for a fixed step.
#[derive(Debug, Clone)]
pub struct TrigStepper {
    h: f64,
    cos: Vec<f64>,
    /// `Ω⁻¹ sin(hΩ)` (→ `h` for `ω = 0`).
    sin_over_w: Vec<f64>,
    /// `Ω sin(hΩ)`.
    w_sin: Vec<f64>,
    /// `½ h² sinc(hΩ)`.
    half_h2_sinc: Vec<f64>,
}

impl TrigStepper {
    pub fn new(h: f64, config: &SystemConfig) -> Self {
        let freqs = config.component_frequencies();
        let mut cos = Vec::with_capacity(freqs.len());
        let mut sin_over_w = Vec::with_capacity(freqs.len());
        let mut w_sin = Vec::with_capacity(freqs.len());
        let mut half_h2_sinc = Vec::with_capacity(freqs.len());
        for &w in &freqs {
            if w == 0.0 {
                cos.push(1.0);
                sin_over_w.push(h);
                w_sin.push(0.0);
                half_h2_sinc.push(0.5 * h * h);
            } else {
                let (s, c) = (h * w).sin_cos();
                cos.push(c);
                sin_over_w.push(s / w);
                w_sin.push(w * s);
                half_h2_sinc.push(0.5 * h * s / w);
            }
        }
        Self { h, cos, sin_over_w, w_sin, half_h2_sinc }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Advances `(p, q)` by one step. `g` holds `-∇U(q)` on entry and
    /// `-∇U(q⁺)` on exit, so consecutive steps need one gradient each.
    #[inline]
    pub fn step(&self, p: &mut [f64], q: &mut [f64], g: &mut [f64], config: &SystemConfig) {
        let half_h = 0.5 * self.h;
        let coeffs = self.cos.iter().zip(&self.sin_over_w).zip(&self.w_sin).zip(&self.half_h2_sinc);
        for (((qi, pi), gi), (((c, sw), ws), hs)) in q.iter_mut().zip(p.iter_mut()).zip(g.iter()).zip(coeffs) {
            let (q0, p0) = (*qi, *pi);
            *qi = c * q0 + sw * p0 + hs * gi;
            *pi = -ws * q0 + c * p0 + half_h * c * gi;
        }
        config.potential().gradient(q, g);
        for (pi, gi) in p.iter_mut().zip(g.iter_mut()) {
            *gi = -*gi;
            *pi += half_h * *gi;
        }
    }
}

/// One step of the trigonometric scheme.
pub fn trig_step(state: &State, h: f64, config: &SystemConfig) -> Result<State> {
    config.check(&state.q)?;
    config.check(&state.p)?;
    let stepper = TrigStepper::new(h, config);
    let mut out = state.clone();
    let mut g = vec![0.0; config.len()];
    neg_gradient(out.q.as_slice(), config, &mut g);
    stepper.step(out.p.as_mut_slice(), out.q.as_mut_slice(), &mut g, config);
    Ok(out)
}

fn neg_gradient(q: &[f64], config: &SystemConfig, g: &mut [f64]) {
    config.potential().gradient(q, g);
    for x in g.iter_mut() {
        *x = -*x;
    }
}

/// Classical RK4 for `q̇ = p, ṗ = a(q)`, with reusable scratch space.
#[derive(Debug, Clone)]
pub struct Rk4Stepper {
    h: f64,
    scratch: Vec<f64>,
}

impl Rk4Stepper {
    pub fn new(h: f64, config: &SystemConfig) -> Self {
        Self { h, scratch: vec![0.0; 8 * config.len()] }
    }

    pub fn step(&mut self, p: &mut [f64], q: &mut [f64], config: &SystemConfig) {
        self.step_with(self.h, p, q, config);
    }

    pub fn step_with(&mut self, h: f64, p: &mut [f64], q: &mut [f64], config: &SystemConfig) {
        let n = q.len();
        let (a1, rest) = self.scratch.split_at_mut(n);
        let (a2, rest) = rest.split_at_mut(n);
        let (a3, rest) = rest.split_at_mut(n);
        let (a4, rest) = rest.split_at_mut(n);
        let (qt, rest) = rest.split_at_mut(n);
        let (p2, rest) = rest.split_at_mut(n);
        let (p3, rest) = rest.split_at_mut(n);
        let p4 = &mut rest[..n];
        crate::model::acceleration_flat(q, config, a1);
        for i in 0..n {
            qt[i] = q[i] + 0.5 * h * p[i];
            p2[i] = p[i] + 0.5 * h * a1[i];
        }
        crate::model::acceleration_flat(qt, config, a2);
        for i in 0..n {
            qt[i] = q[i] + 0.5 * h * p2[i];
            p3[i] = p[i] + 0.5 * h * a2[i];
        }
        crate::model::acceleration_flat(qt, config, a3);
        for i in 0..n {
            qt[i] = q[i] + h * p3[i];
        }
        for i in 0..n {
            p4[i] = p[i] + h * a3[i];
        }
        crate::model::acceleration_flat(qt, config, a4);
        for i in 0..n {
            q[i] += h / 6.0 * (p[i] + 2.0 * p2[i] + 2.0 * p3[i] + p4[i]);
            p[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
    }
}

fn slow_norm_sq(q: &[f64], config: &SystemConfig) -> f64 {
    q[..config.offsets()[1]].iter().map(|x| x * x).sum::<f64>()
}

/// Number of steps of size `h` needed to reach `t_end` (rounded to the nearest step).
pub fn step_count(t_end: f64, h: f64) -> u64 {
    (t_end / h).round().max(1.0) as u64
}

/// Fixed-step march over `[0, t_end]` with `round(t_end / h)` steps.
pub fn integrate(
    state0: &State,
    t_end: f64,
    iconf: &IntegratorConfig,
    config: &SystemConfig,
) -> Result<Trajectory> {
    iconf.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    config.check(&state0.q)?;
    config.check(&state0.p)?;
    let steps = step_count(t_end, iconf.h);
    let mut p = state0.p.clone();
    let mut q = state0.q.clone();

    let mut traj = Trajectory {
        times: vec![0.0],
        energies: vec![energies_flat(p.as_slice(), q.as_slice(), config)],
        states: if iconf.keep_states { vec![state0.clone()] } else { Vec::new() },
        left_region_at: None,
        max_deviation: (0.0, 0.0),
        steps,
        final_state: state0.clone(),
    };
    let radius_sq = config.monitor_radius() * config.monitor_radius();
    if slow_norm_sq(q.as_slice(), config) > radius_sq {
        traj.left_region_at = Some(0.0);
    }

    let mut g = vec![0.0; config.len()];
    let trig = TrigStepper::new(iconf.h, config);
    let mut rk4 = Rk4Stepper::new(iconf.h, config);
    if iconf.scheme == Scheme::Trigonometric {
        neg_gradient(q.as_slice(), config, &mut g);
    }

    let fast = config.offsets()[1];
    let w2: Vec<f64> = config.component_frequencies()[fast..].iter().map(|w| w * w).collect();
    let h_osc = |p: &[f64], q: &[f64]| {
        0.5 * p[fast..].iter().zip(&q[fast..]).zip(&w2).map(|((p, q), w2)| p * p + w2 * q * q).sum::<f64>()
    };
    let h_osc0 = h_osc(p.as_slice(), q.as_slice());
    let mut step = 0u64;
    while step < steps {
        let chunk = iconf.record_stride.min(steps - step);
        for _ in 0..chunk {
            match iconf.scheme {
                Scheme::Trigonometric => trig.step(p.as_mut_slice(), q.as_mut_slice(), &mut g, config),
                Scheme::Reference => rk4.step(p.as_mut_slice(), q.as_mut_slice(), config),
            }
            step += 1;
            let dev = (h_osc(p.as_slice(), q.as_slice()) - h_osc0).abs();
            if dev > traj.max_deviation.0 {
                traj.max_deviation = (dev, step as f64 * iconf.h);
            }
            if traj.left_region_at.is_none() && slow_norm_sq(q.as_slice(), config) > radius_sq {
                traj.left_region_at = Some(step as f64 * iconf.h);
            }
        }
        let t = step as f64 * iconf.h;
        let (ps, qs) = (p.as_slice(), q.as_slice());
        if ps.iter().chain(qs).any(|x| !x.is_finite()) {
            return Err(Error::Blowup { time: t, step });
        }
        let e = energies_flat(ps, qs, config);
        if !e.total.is_finite() {
            return Err(Error::Blowup { time: t, step });
        }
        traj.times.push(t);
        traj.energies.push(e);
        if iconf.keep_states {
            traj.states.push(State { p: p.clone(), q: q.clone() });
        }
    }
    traj.final_state = State { p, q };
    Ok(traj)
}

/// RK4 solution with `h_ref = min(0.001 ε, t_end / 1000)` recording full states.
pub fn reference_integrate(state0: &State, t_end: f64, config: &SystemConfig) -> Result<Trajectory> {
    let h = (0.001 * config.epsilon()).min(t_end / 1000.0);
    let steps = step_count(t_end, h);
    let h = t_end / steps as f64;
    integrate(state0, t_end, &IntegratorConfig::reference(h, steps).with_states(), config)
}

/// Advances a state to a sequence of increasing times with RK4 substeps of
/// size at most `h_max`. Used to sample an accurate solution at arbitrary times.
pub fn reference_samples(
    state0: &State,
    times: &[f64],
    h_max: f64,
    config: &SystemConfig,
) -> Result<Vec<State>> {
    let mut p = state0.p.clone();
    let mut q = state0.q.clone();
    let mut rk4 = Rk4Stepper::new(h_max, config);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::invalid("times", "sample times must be increasing"));
        }
        let span = target - t;
        if span > 0.0 {
            let n = (span / h_max).ceil() as u64;
            let h = span / n as f64;
            for _ in 0..n {
                rk4.step_with(h, p.as_mut_slice(), q.as_mut_slice(), config);
            }
        }
        t = target;
        let s = State { p: p.clone(), q: q.clone() };
        if !s.is_finite() {
            return Err(Error::Blowup { time: t, step: 0 });
        }
        out.push(s);
    }
    Ok(out)
}
