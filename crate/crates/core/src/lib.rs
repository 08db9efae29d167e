//! Flag-raising distributed parameter estimation.
//!
//! A network of agents estimates a shared parameter `θ*` from local linear
//! measurements with bounded noise. Each agent runs a consensus+innovations
//! update and raises a flag as soon as a neighbor's estimate strays farther
//! than a shrinking threshold `γ_t` from its own. Some agents may be
//! adversarial and send arbitrary messages.
//!
//! The crate provides the per-agent protocol, step-size selection and
//! certification, error envelopes, attack strategies and a seeded,
//! scenario-driven simulator.
//!
//! ```
//! use frde::harness::{builtin_scenario, run, RunOptions};
//!
//! let mut scenario = builtin_scenario("example1", 7).unwrap();
//! scenario.rounds = 50;
//! let trace = run(&scenario, &RunOptions::default()).unwrap();
//! assert_eq!(trace.rows.len(), 51);
//! assert!(!trace.summary.detected);
//! ```

pub mod adversary;
pub mod bounds;
pub mod error;
pub mod graph;
pub mod harness;
pub mod par;
pub mod params;
pub mod protocol;
pub mod rng;
pub mod sensing;
pub mod spectral;

pub use error::{FrdeError, Result};
pub use par::ExecMode;
