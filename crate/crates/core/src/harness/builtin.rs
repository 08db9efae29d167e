//! The four reference experiments on a 150-agent network.
//!
//! 50 agents sense only `z`, the rest sense `(x, y)`. The graph is a random
//! geometric graph in which the `(x, y)` agents alone stay connected, so the
//! network remains observable when any subset of the `z` agents misbehaves.

use nalgebra::DVector;

use super::scenario::{random_members_connected, random_selectors, Scenario};
use crate::adversary::{self, AdversarySet, AttackStrategy, MagnitudePolicy};
use crate::error::{FrdeError, Result};
use crate::graph::{self, GeometricConstraints};
use crate::params;
use crate::sensing::{self, NoiseMode, ParameterSpec, SensingModel};

pub const AGENTS: usize = 150;
pub const DIM: usize = 3;
pub const ETA: f64 = 500.0;
pub const NOISE_BOUND: f64 = 0.03;
pub const Z_SENSORS: usize = 50;
pub const ATTACKED_Z: usize = 35;
pub const ROUNDS: usize = 5000;
pub const RADIUS: f64 = 0.15;
pub const ALPHA_HAT: f64 = 1.0;
pub const BETA_HAT: f64 = 10.0;
/// Riding fraction for example 4. Large fractions drag the normal agents
/// along fast enough to trip their own flags.
pub const RIDE_FRACTION: f64 = 0.02;

pub const NAMES: [&str; 4] = ["example1", "example2", "example3", "example4"];

/// Example 1 has no adversaries, example 2 turns every `z` agent into a
/// null-space attacker, example 3 has 35 `z` agents impersonate a shifted
/// `z` coordinate and example 4 has the same 35 ride the threshold along `x`.
pub fn builtin_scenario(name: &str, seed: u64) -> Result<Scenario> {
    if !NAMES.contains(&name) {
        return Err(FrdeError::InvalidArgument(format!(
            "unknown builtin `{name}` (expected one of {})",
            NAMES.join(", ")
        )));
    }
    let selectors = random_selectors(AGENTS, Z_SENSORS, "z", "xy", seed)?;
    let z_agents: Vec<usize> = (0..AGENTS).filter(|&i| selectors[i] == "z").collect();
    let xy_agents: Vec<usize> = (0..AGENTS).filter(|&i| selectors[i] != "z").collect();
    let h = selectors
        .iter()
        .map(|s| sensing::selector_matrix(s, DIM))
        .collect::<Result<Vec<_>>>()?;
    let model = SensingModel::new(h, NOISE_BOUND)?;
    let graph = graph::random_geometric(
        AGENTS,
        RADIUS,
        seed,
        &GeometricConstraints {
            connected: true,
            connected_subsets: vec![xy_agents.clone()],
            min_degree: 0,
            max_retries: 1000,
        },
    )?;
    let parameter = ParameterSpec::random_in_ball(DIM, ETA, seed)?;
    let params = params::procedure1(&graph, &model, ALPHA_HAT, BETA_HAT)?;
    let z_axis = DVector::from_vec(vec![0.0, 0.0, 1.0]);

    let (adversaries, strategy) = match name {
        "example1" => (AdversarySet::none(AGENTS), None),
        "example2" => {
            let set = AdversarySet::new(AGENTS, &z_agents)?;
            let s = adversary::synthesize_null_space_attack(
                &model,
                set.normal(),
                &parameter,
                MagnitudePolicy::MaxFeasible,
            )?;
            (set, Some(s))
        }
        _ => {
            let set = random_members_connected(&graph, &z_agents, ATTACKED_Z, seed)?;
            let s = if name == "example3" {
                // Take whichever sign of the z axis allows the larger shift.
                let up = adversary::saturating_offset(&parameter, &z_axis)?;
                let down = adversary::saturating_offset(&parameter, &-&z_axis)?;
                let offset = if up.norm() >= down.norm() { up } else { down };
                AttackStrategy::fixed_offset(&parameter, offset)?
            } else {
                let x_axis = DVector::from_vec(vec![1.0, 0.0, 0.0]);
                AttackStrategy::threshold_riding(RIDE_FRACTION, x_axis)?
            };
            (set, Some(s))
        }
    };

    Ok(Scenario {
        name: name.to_string(),
        graph,
        model,
        parameter,
        noise_mode: NoiseMode::Uniform,
        params,
        adversaries,
        strategy,
        rounds: ROUNDS,
        seed,
    })
}
