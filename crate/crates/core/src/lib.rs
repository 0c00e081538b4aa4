//! Numerical laboratory for oscillatory Hamiltonian systems in which several
//! high-frequency harmonic oscillators are coupled to a slow system.
//!
//! * [`model`]: Hamiltonian, potentials with exact derivative forms, energies.
//! * [`integrator`]: Deuflhard's trigonometric integrator and an RK4 reference.
//! * [`resonance`]: gap finding, almost-resonant multi-indices, the resonance
//!   module and modified frequencies.
//! * [`mfe`]: modulated Fourier expansions on short windows and the almost-invariant.
//! * [`experiment`]: configuration files, long runs, sweeps and reports.

pub mod error;
pub mod experiment;
pub mod integrator;
pub mod mfe;
pub mod model;
pub mod problem;
pub mod resonance;

pub use error::{Error, Result};
