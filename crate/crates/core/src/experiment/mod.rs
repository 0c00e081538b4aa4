//! Experiment configurations, long runs, ε-sweeps and diagnostic reports.

mod config;
mod report;
mod run;

pub use config::{Coupling, ExperimentConfig};
pub use report::{
    mfe_diagnose, resonance_report, IdentityCheck, MfeReport, MfeSummary, ResonanceReport, WindowDefects, MFE_COEFFICIENTS,
    MFE_DEFECTS, MFE_JSON, MFE_SERIES,
};
pub use run::{
    fmt17, loglog_slope, run, simulate, sweep, write_energies_csv, DeviationRow, SweepEntry, SweepReport, DEVIATIONS_FILE,
    ENERGIES_FILE,
};
