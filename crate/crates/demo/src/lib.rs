//! Browser bindings: a short energy run, the resonance report and the
//! almost-invariant along a few windows.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg`.

use oscisep::experiment::{self, Coupling, ExperimentConfig};
use oscisep::mfe::{track_invariant, MfeContext, ReferenceSource, TrackOptions, DEFAULT_DEGREE};
use wasm_bindgen::prelude::*;

/// Columns of [`EnergyRun::data`].
pub const ENERGY_COLUMNS: [&str; 11] = ["t", "E_1", "E_2", "E_3", "E_4", "E_5", "E_6", "E_7", "H_osc", "H_slow", "H_total"];

#[wasm_bindgen]
pub struct EnergyRun {
    data: Vec<f64>,
    max_deviation: f64,
}

#[wasm_bindgen]
impl EnergyRun {
    /// Row-major samples, 11 values per row (see `columns`).
    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn columns(&self) -> usize {
        ENERGY_COLUMNS.len()
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }
}

fn config(epsilon: f64, a: f64) -> ExperimentConfig {
    ExperimentConfig::standard(epsilon, Coupling::Value(a))
}

pub fn energy_run(epsilon: f64, a: f64, t_end: f64, samples: u32) -> Result<EnergyRun, String> {
    let mut cfg = config(epsilon, a);
    cfg.t_end = t_end;
    cfg.samples = samples.max(1) as u64;
    let (traj, row) = experiment::run(&cfg).map_err(|e| e.to_string())?;
    let mut data = Vec::with_capacity(traj.times.len() * ENERGY_COLUMNS.len());
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        data.push(*t);
        data.extend_from_slice(&e.per_mode);
        data.extend([e.oscillatory, e.slow, e.total]);
    }
    Ok(EnergyRun { data, max_deviation: row.max_deviation_every_step })
}

pub fn resonance_summary(epsilon: f64, order: u32) -> Result<String, String> {
    experiment::resonance_report(&config(epsilon, 0.5), order as usize)
        .map(|r| r.to_string())
        .map_err(|e| e.to_string())
}

/// `[t, ℰ, H_ω]` at both ends of every window, flattened.
pub fn invariant_track(epsilon: f64, a: f64, windows: u32) -> Result<Vec<f64>, String> {
    let (sys, state) = config(epsilon, a).build().map_err(|e| e.to_string())?;
    let ctx = MfeContext::for_system(&sys, 1, DEFAULT_DEGREE).map_err(|e| e.to_string())?;
    let mut source = ReferenceSource::new(state, sys);
    let series = track_invariant(&ctx, &mut source, &TrackOptions::new(windows as usize)).map_err(|e| e.to_string())?;
    Ok(series
        .iter()
        .flat_map(|s| [s.t_start, s.e_start, s.h_osc_start, s.t_end, s.e_end, s.h_osc_end])
        .collect())
}

#[wasm_bindgen(js_name = simulateEnergies)]
pub fn simulate_energies_js(epsilon: f64, a: f64, t_end: f64, samples: u32) -> Result<EnergyRun, JsError> {
    energy_run(epsilon, a, t_end, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = resonanceReport)]
pub fn resonance_report_js(epsilon: f64, order: u32) -> Result<String, JsError> {
    resonance_summary(epsilon, order).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = invariantTrack)]
pub fn invariant_track_js(epsilon: f64, a: f64, windows: u32) -> Result<Vec<f64>, JsError> {
    invariant_track(epsilon, a, windows).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_rows() {
        let run = energy_run(0.02, 0.5, 2.0, 10).unwrap();
        assert_eq!(run.data.len(), 11 * 11);
        let row = &run.data[11..22];
        let sum: f64 = row[1..8].iter().sum();
        assert!((sum - row[8]).abs() < 1e-12);
        assert!(run.max_deviation > 0.0);
        assert!(energy_run(2.0, 0.5, 1.0, 10).is_err());
    }

    #[test]
    fn resonance_text() {
        let text = resonance_summary(0.01, 1).unwrap();
        assert!(text.contains("ϖ"));
        assert!(!text.contains("FAIL"));
    }

    #[test]
    fn invariant_windows() {
        let v = invariant_track(0.02, 0.02, 2).unwrap();
        assert_eq!(v.len(), 12);
        assert!((v[1] - v[2]).abs() < 0.1);
    }
}
