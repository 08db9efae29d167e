//! Scenario loading, simulation and output.

mod builtin;
mod emit;
mod run;
mod scenario;

pub use builtin::{builtin_scenario, NAMES as BUILTIN_NAMES};
pub use emit::{emit, write_csv, write_summary, OutputFormat, CSV_HEADER};
pub use run::{
    run, run_many, RunOptions, RunRow, RunSummary, RunTrace, ENVELOPE_ATOL, ENVELOPE_RTOL,
};
pub use scenario::{
    admit, load_scenario, random_members_connected, random_selectors, sample_indices, Admission,
    Overrides, Scenario, ScenarioFile,
};

/// Constants of the built-in reference experiments.
pub mod reference {
    pub use super::builtin::{
        AGENTS, ALPHA_HAT, ATTACKED_Z, BETA_HAT, DIM, ETA, NAMES, NOISE_BOUND, RADIUS,
        RIDE_FRACTION, ROUNDS, Z_SENSORS,
    };
}
