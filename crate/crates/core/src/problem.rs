//! The seven-frequency test problem with the cubic coupling potential.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{example_potential, BlockVector, State, SystemConfig};

/// Scaled frequencies `εω_j` of the test problem.
pub fn scaled_frequencies(epsilon: f64) -> Vec<f64> {
    let e = epsilon;
    vec![1.0, 1.0 + e * e, 1.0 + e, 1.0 + e.powf(0.75), 1.0 + e.powf(2.0 / 3.0), 1.0 + e.sqrt(), 2.0]
}

/// `q(0)` with the fast entries scaled by ε.
pub fn initial_positions(epsilon: f64) -> Vec<f64> {
    let fast = [0.3, 0.4, 0.7, -1.1, 0.4, -0.6, -0.7];
    std::iter::once(1.0).chain(fast.iter().map(|x| x * epsilon)).collect()
}

pub fn initial_momenta() -> Vec<f64> {
    vec![-0.2, 0.6, 0.7, -0.9, -0.9, 0.4, -1.1, 0.8]
}

/// Radius of the ball around the origin in which `q_0` is monitored.
pub const DEFAULT_MONITOR_RADIUS: f64 = 10.0;

/// System and initial state for coupling parameter `a`.
pub fn seven_frequency_problem(epsilon: f64, a: f64) -> Result<(SystemConfig, State)> {
    let omega = scaled_frequencies(epsilon).into_iter().map(|x| x / epsilon).collect();
    let config = SystemConfig::new(epsilon, omega, Arc::new(example_potential(a)), DEFAULT_MONITOR_RADIUS)?;
    let dims = config.dims().to_vec();
    let state = State::new(
        BlockVector::from_flat(&dims, initial_momenta())?,
        BlockVector::from_flat(&dims, initial_positions(epsilon))?,
    )?;
    Ok((config, state))
}
