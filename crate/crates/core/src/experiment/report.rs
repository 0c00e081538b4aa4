//! Resonance reports and modulated Fourier diagnostics for a configuration.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::fmt17;
use crate::error::{Error, Result};
use crate::mfe::{
    CoefficientSize, ConstructOptions, InvariantSeries, MfeContext, ReferenceSource, SweepRecord, TrackOptions,
    DEFAULT_DEGREE,
};
use crate::resonance::{MultiIndex, ResonanceData};

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub epsilon: f64,
    pub order: usize,
    pub omega: Vec<f64>,
    /// Number of multi-indices with `‖k‖ ≤ N+1`.
    pub m_count: usize,
    pub alpha: f64,
    pub mu: f64,
    pub effective_gap: (f64, f64),
    pub resonant: Vec<MultiIndex>,
    pub basis: Vec<MultiIndex>,
    pub module_basis: Vec<Vec<i64>>,
    pub theta: Vec<f64>,
    pub varpi: Vec<f64>,
    pub representatives: Vec<MultiIndex>,
    pub checks: Vec<IdentityCheck>,
}

impl ResonanceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn contains_resonance(&self, k: &[i64]) -> bool {
        self.resonant.iter().any(|r| r.as_slice() == k)
    }
}

/// Resonance analysis of the configured frequencies at truncation order `order`,
/// with the identities the expansion relies on checked numerically.
pub fn resonance_report(config: &ExperimentConfig, order: usize) -> Result<ResonanceReport> {
    let (sys, _) = config.build()?;
    let eps = config.epsilon;
    let res = ResonanceData::analyze(sys.omega(), eps, order)?;
    let gap_hits = res.gap.occupied.iter().filter(|&&a| a >= res.alpha() && a <= res.alpha() + res.mu()).count();
    let residual = res.max_resonance_residual();
    let (min_nonres, _) = res.min_nonresonant().unwrap_or((f64::INFINITY, MultiIndex::zero(res.n())));
    let checks = vec![
        IdentityCheck { name: "log-values inside [α, α+μ]", value: gap_hits as f64, bound: 0.0, passed: gap_hits == 0 },
        IdentityCheck {
            name: "max |k·ϖ| over ℛ",
            value: residual,
            bound: 1e-8 / eps,
            passed: residual <= 1e-8 / eps,
        },
        IdentityCheck {
            name: "min |k·ϖ| over ‖k‖ ≤ N+1, k ∉ ℳ",
            value: min_nonres,
            bound: res.nonresonant_bound(),
            passed: min_nonres >= res.nonresonant_bound(),
        },
        IdentityCheck {
            name: "‖ϑ‖ ε^α",
            value: res.theta_norm_scaled,
            bound: 10.0,
            passed: res.theta_norm_scaled <= 10.0,
        },
    ];
    Ok(ResonanceReport {
        epsilon: eps,
        order,
        omega: sys.omega().to_vec(),
        m_count: res.gap.m_count,
        alpha: res.alpha(),
        mu: res.mu(),
        effective_gap: res.gap.effective_gap,
        resonant: res.resonant.clone(),
        basis: res.basis.clone(),
        module_basis: res.module.columns().to_vec(),
        theta: res.theta.clone(),
        varpi: res.varpi.clone(),
        representatives: res.representatives.clone(),
        checks,
    })
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ResonanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nums = |v: &[f64]| v.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "ε = {}, N = {}", self.epsilon, self.order)?;
        writeln!(f, "ω = [{}]", nums(&self.omega))?;
        writeln!(f, "M = {}, μ = 1/{} = {:.6}", self.m_count, 4 * self.m_count + 4, self.mu)?;
        writeln!(f, "α = {:.6}, gap [{:.6}, {:.6}], effective gap ({:.6}, {:.6})", self.alpha, self.alpha, self.alpha + self.mu, self.effective_gap.0, self.effective_gap.1)?;
        writeln!(f, "ℛ ({} elements): {}", self.resonant.len(), join(&self.resonant))?;
        writeln!(f, "independent basis: {}", join(&self.basis))?;
        let module: Vec<String> = self.module_basis.iter().map(|c| format!("{c:?}")).collect();
        writeln!(f, "ℳ basis: {}", module.join(", "))?;
        writeln!(f, "ϑ = [{}]", nums(&self.theta))?;
        writeln!(f, "ϖ = [{}]", nums(&self.varpi))?;
        writeln!(f, "𝒦 ({} representatives): {}", self.representatives.len(), join(&self.representatives))?;
        for c in &self.checks {
            let rel = if c.name.starts_with("min") { "≥" } else { "≤" };
            writeln!(f, "[{}] {} = {:.3e} {} {:.3e}", if c.passed { "ok" } else { "FAIL" }, c.name, c.value, rel, c.bound)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowDefects {
    pub window: usize,
    pub history: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MfeSummary {
    pub epsilon: f64,
    pub a: f64,
    pub order: usize,
    pub alpha: f64,
    pub mu: f64,
    pub mu_eff: f64,
    pub window_length: f64,
    pub windows: usize,
    pub max_final_defect: f64,
    pub max_reconstruction_error: f64,
    pub max_drift: f64,
    pub max_jump: f64,
    pub sum_drift: f64,
    pub sum_jump: f64,
    /// `|ℰ_last(end) − ℰ_0(start)|`.
    pub total_change: f64,
    /// `max |ℰ − H_ω|` over all window ends.
    pub max_invariant_gap: f64,
    /// `2ε^{N+1}`: one `ε^{N+1}` for the drift inside a window and one for the
    /// transition to the next.
    pub window_budget: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MfeReport {
    pub summary: MfeSummary,
    pub series: Vec<InvariantSeries>,
    pub defects: Vec<WindowDefects>,
    /// Coefficient sizes of the expansion on the first window.
    pub coefficients: Vec<CoefficientSize>,
}

impl MfeReport {
    /// Summed drifts and jumps as a multiple of one window's budget.
    pub fn budget_ratio(&self) -> f64 {
        (self.summary.sum_drift + self.summary.sum_jump) / self.summary.window_budget
    }
}

/// Expansions on `windows` consecutive windows along an accurate reference
/// solution, with defect histories and coefficient sizes.
pub fn mfe_diagnose(config: &ExperimentConfig, windows: usize, order: usize) -> Result<MfeReport> {
    if windows == 0 {
        return Err(Error::invalid("windows", "need at least one window"));
    }
    if order == 0 {
        return Err(Error::invalid("order", "N must be ≥ 1"));
    }
    let (sys, state) = config.build()?;
    let ctx = MfeContext::for_system(&sys, order, DEFAULT_DEGREE)?;
    let (first, _) = ctx.construct(&state, 0.0, ConstructOptions::default())?;
    let coefficients = first.coefficient_sizes();
    let mut source = ReferenceSource::new(state, sys.clone());
    let series = crate::mfe::track_invariant(&ctx, &mut source, &TrackOptions::new(windows))?;

    let max = |f: &dyn Fn(&InvariantSeries) -> f64| series.iter().map(f).fold(0.0, f64::max);
    let eps = config.epsilon;
    let summary = MfeSummary {
        epsilon: eps,
        a: config.a(),
        order,
        alpha: ctx.index.alpha,
        mu: ctx.index.mu,
        mu_eff: ctx.index.mu_eff,
        window_length: ctx.index.window(),
        windows,
        max_final_defect: max(&|s| s.final_defect),
        max_reconstruction_error: max(&|s| s.reconstruction_error),
        max_drift: max(&|s| s.drift),
        max_jump: max(&|s| s.jump_to_next.unwrap_or(0.0)),
        sum_drift: series.iter().map(|s| s.drift).sum(),
        sum_jump: series.iter().filter_map(|s| s.jump_to_next).sum(),
        total_change: (series.last().unwrap().e_end - series[0].e_start).abs(),
        max_invariant_gap: max(&|s| (s.e_start - s.h_osc_start).abs().max((s.e_end - s.h_osc_end).abs())),
        window_budget: 2.0 * eps.powi(order as i32 + 1),
    };
    let defects = series
        .iter()
        .map(|s| WindowDefects { window: s.window, history: s.defect.as_ref().map(|d| d.history.clone()).unwrap_or_default() })
        .collect();
    Ok(MfeReport { summary, series, defects, coefficients })
}

pub const MFE_JSON: &str = "mfe_report.json";
pub const MFE_SERIES: &str = "mfe_series.csv";
pub const MFE_DEFECTS: &str = "mfe_defects.csv";
pub const MFE_COEFFICIENTS: &str = "mfe_coefficients.csv";

impl MfeReport {
    /// Writes the JSON report and the three CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(dir.join(MFE_JSON), json)?;

        let mut w = csv::Writer::from_path(dir.join(MFE_SERIES))?;
        w.write_record([
            "window", "t_start", "t_end", "E_start", "E_end", "H_osc_start", "H_osc_end", "drift", "jump_to_next",
            "reconstruction_error", "motion_residual", "sweeps", "final_defect",
        ])?;
        for s in &self.series {
            w.write_record([
                s.window.to_string(),
                fmt17(s.t_start),
                fmt17(s.t_end),
                fmt17(s.e_start),
                fmt17(s.e_end),
                fmt17(s.h_osc_start),
                fmt17(s.h_osc_end),
                fmt17(s.drift),
                s.jump_to_next.map(fmt17).unwrap_or_default(),
                fmt17(s.reconstruction_error),
                fmt17(s.motion_residual),
                s.sweeps.to_string(),
                fmt17(s.final_defect),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(MFE_DEFECTS))?;
        w.write_record(["window", "sweep", "sup_defect", "lambda_c2", "lambda_c4"])?;
        for d in &self.defects {
            for r in &d.history {
                w.write_record([d.window.to_string(), r.sweep.to_string(), fmt17(r.sup_defect), fmt17(r.lambda_c2), fmt17(r.lambda_c4)])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(MFE_COEFFICIENTS))?;
        w.write_record(["j", "k", "max_abs", "constant"])?;
        for c in &self.coefficients {
            w.write_record([c.j.to_string(), c.k.to_string(), fmt17(c.max_abs), fmt17(c.constant)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(out, "ε = {}, a = {}, N = {}, α = {:.6}, window length {:.6}", s.epsilon, s.a, s.order, s.alpha, s.window_length);
        let _ = writeln!(out, "windows: {}, max final defect {:.3e}, max reconstruction error {:.3e}", s.windows, s.max_final_defect, s.max_reconstruction_error);
        let _ = writeln!(out, "ℰ drift: max {:.3e}, sum {:.3e}; jumps: max {:.3e}, sum {:.3e}", s.max_drift, s.sum_drift, s.max_jump, s.sum_jump);
        let _ = writeln!(out, "total ℰ change {:.3e}; max |ℰ − H_ω| {:.3e}", s.total_change, s.max_invariant_gap);
        let _ = writeln!(out, "drifts + jumps = {:.2} × window budget 2ε^(N+1) = {:.3e}", self.budget_ratio(), s.window_budget);
        out
    }
}
