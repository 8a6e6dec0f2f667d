//! Monte Carlo word-error sweeps and their file outputs.

pub mod config;
pub mod engine;
pub mod output;
pub mod trial;

pub use config::{parse_pdb, SimConfig, WepScope};
pub use engine::{run_wep_sweep, run_wep_sweep_with};
pub use output::{
    config_hash, emit_outputs, estimate_diversity_slope, read_csv, wilson_interval, write_csv, OutputPaths, SimResult, SimRow,
    SlopeEstimate,
};
pub use trial::{TrialContext, TrialOutcome};
