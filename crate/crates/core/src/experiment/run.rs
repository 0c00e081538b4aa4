//! Long runs with the trigonometric integrator, energy CSVs and ε-sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::integrator::{integrate, step_count, IntegratorConfig, Trajectory};

/// Maximal deviation of the oscillatory energy for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub epsilon: f64,
    pub a: f64,
    pub h: f64,
    pub t_end: f64,
    /// `max |H_ω(t) − H_ω(0)|` over recorded samples.
    pub max_deviation: f64,
    pub time_of_max: f64,
    /// The same maximum over every step.
    pub max_deviation_every_step: f64,
    pub time_of_max_every_step: f64,
    pub steps: u64,
    pub samples: usize,
    /// Time at which `|q_0|` first left the monitored ball.
    pub left_region_at: Option<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl DeviationRow {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "a = {}, ε = {}: max |H_ω(t) − H_ω(0)| = {:.3e} at t = {:.1} (every step: {:.3e}); {} steps, {:.1} s",
            self.a, self.epsilon, self.max_deviation, self.time_of_max, self.max_deviation_every_step, self.steps, self.wall_time_s
        );
        if let Some(t) = self.left_region_at {
            s.push_str(&format!("; q_0 left the monitored region at t = {t:.1}"));
        }
        s
    }
}

/// Formats with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const ENERGIES_FILE: &str = "energies.csv";

pub fn write_energies_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.energies.first().map_or(0, |e| e.per_mode.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("E_{j}")));
    header.extend(["H_osc", "H_slow", "H_total"].map(String::from));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(n + 4);
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        row.clear();
        row.push(fmt17(*t));
        row.extend(e.per_mode.iter().map(|x| fmt17(*x)));
        row.extend([e.oscillatory, e.slow, e.total].map(fmt17));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock timer; a no-op on wasm32, where `Instant` is unavailable.
struct Timer(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Timer {
    fn start() -> Self {
        Timer(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Runs the integrator without writing anything.
pub fn run(config: &ExperimentConfig) -> Result<(Trajectory, DeviationRow)> {
    let (sys, state) = config.build()?;
    let h = config.step_size();
    let steps = step_count(config.t_end, h);
    let iconf = IntegratorConfig::trigonometric(h, config.stride(steps));
    let start = Timer::start();
    let traj = integrate(&state, config.t_end, &iconf, &sys)?;
    let (max_deviation, time_of_max) = traj.max_sampled_deviation();
    let row = DeviationRow {
        epsilon: config.epsilon,
        a: config.a(),
        h,
        t_end: config.t_end,
        max_deviation,
        time_of_max,
        max_deviation_every_step: traj.max_deviation.0,
        time_of_max_every_step: traj.max_deviation.1,
        steps: traj.steps,
        samples: traj.times.len(),
        left_region_at: traj.left_region_at,
        wall_time_s: start.seconds(),
    };
    Ok((traj, row))
}

/// Runs the experiment and writes `energies.csv` into `out_dir`
/// (default: the config's `output_path`).
pub fn simulate(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<DeviationRow> {
    let dir = out_dir.unwrap_or(&config.output_path);
    fs::create_dir_all(dir)?;
    let (traj, row) = run(config)?;
    write_energies_csv(&dir.join(ENERGIES_FILE), &traj)?;
    Ok(row)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub dir: PathBuf,
    pub row: Option<DeviationRow>,
    pub error: Option<String>,
    /// The error was a numerical failure such as a blow-up.
    pub numerical_failure: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Least-squares slope of `log deviation` against `log ε` over the successful runs.
    pub slope: Option<f64>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &SweepEntry> {
        self.entries.iter().filter(|e| e.error.is_some())
    }

    pub fn rows(&self) -> impl Iterator<Item = &DeviationRow> {
        self.entries.iter().filter_map(|e| e.row.as_ref())
    }
}

pub const DEVIATIONS_FILE: &str = "deviations.csv";

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn write_table(path: &Path, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "epsilon",
        "a",
        "max_deviation",
        "time_of_max",
        "max_deviation_every_step",
        "time_of_max_every_step",
        "steps",
        "status",
    ])?;
    for e in entries {
        match &e.row {
            Some(r) => w.write_record([
                fmt17(r.epsilon),
                fmt17(r.a),
                fmt17(r.max_deviation),
                fmt17(r.time_of_max),
                fmt17(r.max_deviation_every_step),
                fmt17(r.time_of_max_every_step),
                r.steps.to_string(),
                "ok".to_string(),
            ])?,
            None => {
                let msg = e.error.clone().unwrap_or_default();
                w.write_record([fmt17(e.epsilon), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), msg])?
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One [`simulate`] per `ε` (in parallel), each in its own subdirectory of
/// `out_dir`, then the deviation table `deviations.csv`. Failed runs leave a
/// row with their error; the table is written either way.
pub fn sweep(template: &ExperimentConfig, epsilons: &[f64], out_dir: &Path) -> Result<SweepReport> {
    if epsilons.len() < 2 {
        return Err(Error::invalid("epsilons", "a sweep needs at least two values"));
    }
    for &e in epsilons {
        template.with_epsilon(e).validate()?;
    }
    fs::create_dir_all(out_dir)?;
    let one = |i: usize| {
        let eps = epsilons[i];
        let dir = out_dir.join(format!("run{i}_eps{eps}"));
        let result = simulate(&template.with_epsilon(eps), Some(&dir));
        let (row, error, numerical_failure) = match result {
            Ok(r) => (Some(r), None, false),
            Err(e) => (None, Some(e.to_string()), e.is_numerical()),
        };
        SweepEntry { epsilon: eps, dir, row, error, numerical_failure }
    };
    #[cfg(feature = "parallel")]
    let entries: Vec<SweepEntry> = {
        use rayon::prelude::*;
        (0..epsilons.len()).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Vec<SweepEntry> = (0..epsilons.len()).map(one).collect();

    write_table(&out_dir.join(DEVIATIONS_FILE), &entries)?;
    let points: Vec<(f64, f64)> = entries.iter().filter_map(|e| e.row.as_ref()).map(|r| (r.epsilon, r.max_deviation)).collect();
    Ok(SweepReport { slope: loglog_slope(&points), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Coupling;

    fn short(eps: f64, a: Coupling) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::standard(eps, a);
        cfg.t_end = 20.0;
        cfg.samples = 200;
        cfg
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.02, 0.01, 0.005].iter().map(|&e| (e, 3.0 * e * e)).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn csv_layout_and_precision() {
        let dir = tempfile::tempdir().unwrap();
        let row = simulate(&short(0.02, Coupling::Value(0.5)), Some(dir.path())).unwrap();
        let mut r = csv::Reader::from_path(dir.path().join(ENERGIES_FILE)).unwrap();
        let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header.len(), 11);
        assert_eq!(header[0], "t");
        assert_eq!(header[7], "E_7");
        assert_eq!(&header[8..], ["H_osc", "H_slow", "H_total"]);
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), row.samples);
        assert_eq!(rows.len(), 201);
        let field = &rows[1][3];
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{field}");
        // audit: the reported deviation equals the one recomputed from the file
        let h: Vec<f64> = rows.iter().map(|x| x[8].parse().unwrap()).collect();
        let audit = h.iter().map(|x| (x - h[0]).abs()).fold(0.0, f64::max);
        assert_eq!(audit, row.max_deviation);
        assert!(row.max_deviation_every_step >= row.max_deviation);
    }

    #[test]
    fn decoupled_harmonic_system_keeps_its_energy() {
        let mut cfg = short(0.02, Coupling::Value(0.0));
        cfg.coupling = Some(vec![0.0; 7]);
        let (_, row) = run(&cfg).unwrap();
        assert!(row.max_deviation_every_step < 1e-10, "{}", row.max_deviation_every_step);
    }

    #[test]
    fn sweep_is_deterministic_and_reports_failures() {
        let dir = tempfile::tempdir().unwrap();
        let rep = sweep(&short(0.02, Coupling::Epsilon), &[0.02, 0.02], dir.path()).unwrap();
        let rows: Vec<_> = rep.rows().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].max_deviation, rows[1].max_deviation);
        let a = fs::read(rep.entries[0].dir.join(ENERGIES_FILE)).unwrap();
        let b = fs::read(rep.entries[1].dir.join(ENERGIES_FILE)).unwrap();
        assert_eq!(a, b);

        assert!(sweep(&short(0.02, Coupling::Epsilon), &[0.02], dir.path()).is_err());

        // a = 1 lets q_0 run off to infinity
        let mut boom = short(0.02, Coupling::Value(1.0));
        boom.t_end = 2000.0;
        let rep = sweep(&boom, &[0.02, 0.04], dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(DEVIATIONS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(rep.failures().count() >= 1, "{text}");
    }
}
