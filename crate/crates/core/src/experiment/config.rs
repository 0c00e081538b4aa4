//! Experiment configuration files.
//!
//! Flat `key = value` lines (a TOML subset). Example:
//!
//! ```text
//! epsilon = 0.01
//! a = "epsilon"
//! t_end = 10000
//! dt_factor = 0.01
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockVector, CubicCouplingPotential, State, SystemConfig};
use crate::problem;

/// Coupling parameter `a`: a number, or tied to `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling", into = "RawCoupling")]
pub enum Coupling {
    Value(f64),
    Epsilon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawCoupling {
    Number(f64),
    Token(String),
}

impl TryFrom<RawCoupling> for Coupling {
    type Error = String;

    fn try_from(raw: RawCoupling) -> std::result::Result<Self, String> {
        match raw {
            RawCoupling::Number(x) => Ok(Coupling::Value(x)),
            RawCoupling::Token(s) if s.trim() == "epsilon" => Ok(Coupling::Epsilon),
            RawCoupling::Token(s) => s
                .trim()
                .parse::<f64>()
                .map(Coupling::Value)
                .map_err(|_| format!("`a` must be a number or \"epsilon\", got {s:?}")),
        }
    }
}

impl From<Coupling> for RawCoupling {
    fn from(c: Coupling) -> Self {
        match c {
            Coupling::Value(x) => RawCoupling::Number(x),
            Coupling::Epsilon => RawCoupling::Token("epsilon".into()),
        }
    }
}

impl Coupling {
    pub fn resolve(self, epsilon: f64) -> f64 {
        match self {
            Coupling::Value(x) => x,
            Coupling::Epsilon => epsilon,
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Value(x) => write!(f, "{x}"),
            Coupling::Epsilon => write!(f, "epsilon"),
        }
    }
}

fn default_a() -> Coupling {
    Coupling::Value(0.5)
}
fn default_t_end() -> f64 {
    100_000.0
}
fn default_dt_factor() -> f64 {
    0.01
}
fn default_samples() -> u64 {
    10_000
}
fn default_order() -> usize {
    1
}
fn default_slow_stiffness() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_radius() -> f64 {
    problem::DEFAULT_MONITOR_RADIUS
}

/// One experiment. Unset optional fields fall back to the seven-frequency
/// test problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    #[serde(default = "default_a")]
    pub a: Coupling,
    /// `εω_j` values; divided by `ε` when the system is built.
    #[serde(default)]
    pub freq_spec: Option<Vec<f64>>,
    /// Fast coupling coefficients `c_1..c_n` of `U = ½κq_0² + (c·q)³`, with `c_0 = a`.
    #[serde(default)]
    pub coupling: Option<Vec<f64>>,
    /// `κ`.
    #[serde(default = "default_slow_stiffness")]
    pub slow_stiffness: f64,
    /// Initial positions `(q_0, q_1, .., q_n)`, taken literally.
    #[serde(default)]
    pub q0: Option<Vec<f64>>,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// `h = dt_factor · ε`.
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    /// Record every this many steps; by default chosen to give `samples` records.
    #[serde(default)]
    pub record_stride: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Truncation order `N`.
    #[serde(default = "default_order", alias = "N")]
    pub order: usize,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default = "default_radius")]
    pub monitor_radius: f64,
}

const FAST_COUPLING: [f64; 7] = [1.0, 1.0, 2.0, 3.0, 1.0, 1.0, 3.0];

impl ExperimentConfig {
    /// The test problem at `ε` with coupling `a` and all defaults.
    pub fn standard(epsilon: f64, a: Coupling) -> Self {
        Self {
            epsilon,
            a,
            freq_spec: None,
            coupling: None,
            slow_stiffness: default_slow_stiffness(),
            q0: None,
            p0: None,
            t_end: default_t_end(),
            dt_factor: default_dt_factor(),
            record_stride: None,
            samples: default_samples(),
            order: default_order(),
            output_path: default_output(),
            monitor_radius: default_radius(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("need 0 < ε < 1, got {}", self.epsilon)));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor.is_finite()) {
            return Err(Error::invalid("dt_factor", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be ≥ 1"));
        }
        if self.record_stride == Some(0) {
            return Err(Error::invalid("record_stride", "must be ≥ 1"));
        }
        if !self.a().is_finite() || !self.slow_stiffness.is_finite() {
            return Err(Error::invalid("a", "coefficients must be finite"));
        }
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid("freq_spec", "need at least one frequency"));
        }
        let check_len = |name: &'static str, v: &Option<Vec<f64>>, len: usize| match v {
            Some(v) if v.len() != len => Err(Error::invalid(name, format!("expected {len} entries, got {}", v.len()))),
            _ => Ok(()),
        };
        check_len("coupling", &self.coupling, n)?;
        check_len("q0", &self.q0, n + 1)?;
        check_len("p0", &self.p0, n + 1)?;
        if n != 7 {
            for (name, v) in [("coupling", &self.coupling), ("q0", &self.q0), ("p0", &self.p0)] {
                if v.is_none() {
                    return Err(Error::invalid(name, "required when freq_spec does not have 7 entries"));
                }
            }
        }
        if let Some(f) = &self.freq_spec {
            if f.iter().any(|x| !(x.is_finite() && *x >= 1.0 - 1e-12)) {
                return Err(Error::invalid("freq_spec", "εω_j values must be ≥ 1"));
            }
        }
        Ok(())
    }

    /// Number of fast oscillators.
    pub fn n(&self) -> usize {
        self.freq_spec.as_ref().map_or(7, Vec::len)
    }

    pub fn a(&self) -> f64 {
        self.a.resolve(self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn step_size(&self) -> f64 {
        self.dt_factor * self.epsilon
    }

    pub fn scaled_frequencies(&self) -> Vec<f64> {
        self.freq_spec.clone().unwrap_or_else(|| problem::scaled_frequencies(self.epsilon))
    }

    /// Record stride for a run of `steps` steps.
    pub fn stride(&self, steps: u64) -> u64 {
        self.record_stride.unwrap_or_else(|| steps.div_ceil(self.samples).max(1))
    }

    pub fn build(&self) -> Result<(SystemConfig, State)> {
        self.validate()?;
        let eps = self.epsilon;
        let n = self.n();
        let omega: Vec<f64> = self.scaled_frequencies().iter().map(|x| x / eps).collect();
        let mut c = vec![self.a()];
        c.extend(self.coupling.clone().unwrap_or_else(|| FAST_COUPLING.to_vec()));
        let potential = CubicCouplingPotential::new(vec![1; n + 1], c, self.slow_stiffness);
        let sys = SystemConfig::new(eps, omega, Arc::new(potential), self.monitor_radius)?;
        let q = self.q0.clone().unwrap_or_else(|| problem::initial_positions(eps));
        let p = self.p0.clone().unwrap_or_else(problem::initial_momenta);
        let dims = sys.dims().to_vec();
        let state = State::new(BlockVector::from_flat(&dims, p)?, BlockVector::from_flat(&dims, q)?)?;
        Ok((sys, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_token() {
        let cfg = ExperimentConfig::parse("epsilon = 0.02\na = \"epsilon\"\n").unwrap();
        assert_eq!(cfg.a, Coupling::Epsilon);
        assert_eq!(cfg.a(), 0.02);
        assert_eq!(cfg.with_epsilon(0.01).a(), 0.01);
        assert_eq!(ExperimentConfig::parse("epsilon = 0.02\na = 0.5").unwrap().a(), 0.5);
        assert!(ExperimentConfig::parse("epsilon = 0.02\na = \"eps\"").is_err());
    }

    #[test]
    fn defaults_match_test_problem() {
        let cfg = ExperimentConfig::parse("epsilon = 0.005").unwrap();
        assert_eq!(cfg.t_end, 100_000.0);
        assert_eq!(cfg.step_size(), 0.01 * 0.005);
        let (sys, state) = cfg.build().unwrap();
        let (sys2, state2) = problem::seven_frequency_problem(0.005, 0.5).unwrap();
        assert_eq!(sys.frequencies(), sys2.frequencies());
        assert_eq!(state, state2);
    }

    #[test]
    fn frequencies_are_divided_by_epsilon() {
        let text = "epsilon = 0.1\nfreq_spec = [1.0, 2.5]\ncoupling = [0, 0]\nq0 = [1, 0.1, 0.1]\np0 = [0, 0, 0]\n";
        let (sys, _) = ExperimentConfig::parse(text).unwrap().build().unwrap();
        assert_eq!(sys.frequencies(), &[0.0, 10.0, 25.0]);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "epsilon = 1.5",
            "epsilon = 0.01\ndt_factor = 0",
            "epsilon = 0.01\nt_end = -1",
            "epsilon = 0.01\nfreq_spec = [1.0, 2.0]",
            "epsilon = 0.01\nq0 = [1.0]",
            "epsilon = 0.01\nunknown_key = 3",
            "a = 0.5",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn text_roundtrip() {
        let mut cfg = ExperimentConfig::standard(0.01, Coupling::Epsilon);
        cfg.t_end = 12.5;
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
