//! Synthetic experiments: data generators for every setting, the comparison
//! arms (hidden samples, extraction, raw view, CCA projection), run reports
//! and sweeps.

mod cca;
mod config;
pub mod generate;
pub mod io;
mod run;

pub use cca::{cca_project, cca_projection, CcaProjection};
pub use config::{Arm, ExperimentConfig, Setting, SweepConfig};
pub use generate::{generate, Dataset, GroundTruth};
pub use run::{run, sweep, ArmOutcome, ArmSummary, RunReport, SweepTable};
