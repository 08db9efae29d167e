//! Scenario definition, scenario files and admission checks.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::Deserialize;

use crate::adversary::{self, AdversarySet, AttackStrategy, MagnitudePolicy, Script};
use crate::bounds;
use crate::error::{Assumption, FrdeError, Result};
use crate::graph::{self, GeometricConstraints, Graph};
use crate::params::{self, Certificate, FrdeParams, LaplacianBounds, Procedure2Inputs};
use crate::rng::{stream_rng, Stream};
use crate::sensing::{self, NoiseMode, ParameterSpec, SensingModel};

/// Attempts at drawing a random adversary set with a connected complement.
const MEMBER_RETRIES: usize = 1000;

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: Graph,
    pub model: SensingModel,
    pub parameter: ParameterSpec,
    pub noise_mode: NoiseMode,
    pub params: FrdeParams,
    pub adversaries: AdversarySet,
    /// Required exactly when `adversaries` is nonempty.
    pub strategy: Option<AttackStrategy>,
    pub rounds: usize,
    pub seed: u64,
}

/// Spectral facts established while admitting a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub certificate: Certificate,
    /// `λ_min(J^𝒩)` when the normal set is connected and observable.
    pub r2: Option<f64>,
}

/// Accepts a scenario only if the graph is connected, all agents together are
/// globally observable and the step sizes are certified.
pub fn admit(s: &Scenario) -> Result<Admission> {
    use Assumption::*;
    let n = s.graph.n_vertices();
    if s.model.n_agents() != n {
        return Err(FrdeError::rejected(
            WellFormed,
            format!("{} sensing models for {n} agents", s.model.n_agents()),
        ));
    }
    if s.parameter.dim() != s.model.dim() {
        return Err(FrdeError::rejected(
            WellFormed,
            format!(
                "parameter dimension {} but sensing dimension {}",
                s.parameter.dim(),
                s.model.dim()
            ),
        ));
    }
    if s.adversaries.n_agents() != n {
        return Err(FrdeError::rejected(
            WellFormed,
            "adversary set sized for another graph",
        ));
    }
    if !s.adversaries.is_empty() && s.strategy.is_none() {
        return Err(FrdeError::rejected(
            WellFormed,
            "adversaries without a strategy",
        ));
    }
    if !graph::is_graph_connected(&s.graph) {
        return Err(FrdeError::rejected(
            Connectivity,
            "communication graph is disconnected",
        ));
    }
    if !sensing::is_globally_observable(&s.model, &s.graph.vertices())? {
        return Err(FrdeError::rejected(
            GlobalObservability,
            "the summed Gram matrix of all agents is singular",
        ));
    }
    s.params
        .validate()
        .map_err(|e| FrdeError::rejected(CertifiedParams, e.to_string()))?;
    let certificate = params::certify(&s.params, &s.graph, &s.model)?;
    if !certificate.passes() {
        return Err(FrdeError::rejected(
            CertifiedParams,
            format!(
                "lambda_max(J) = {}, lambda_min(J) = {}, r1 = {}",
                certificate.lambda_max, certificate.lambda_min, certificate.r1
            ),
        ));
    }
    let r2 = bounds::normal_set_r2(&s.graph, &s.model, s.adversaries.normal(), &s.params)?;
    Ok(Admission { certificate, r2 })
}

/// `count` of `n` indices drawn from `stream` at `coords`, sorted.
pub fn sample_indices(
    n: usize,
    count: usize,
    seed: u64,
    stream: Stream,
    coords: &[u64],
) -> Result<Vec<usize>> {
    if count > n {
        return Err(FrdeError::InvalidArgument(format!(
            "cannot pick {count} of {n}"
        )));
    }
    let mut rng = stream_rng(seed, stream, coords);
    let mut picked = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Selector names with `count` randomly chosen agents using `selector` and
/// the rest `others`.
pub fn random_selectors(
    n: usize,
    count: usize,
    selector: &str,
    others: &str,
    seed: u64,
) -> Result<Vec<String>> {
    let chosen = sample_indices(n, count, seed, Stream::Sensing, &[])?;
    let mut out = vec![others.to_string(); n];
    for i in chosen {
        out[i] = selector.to_string();
    }
    Ok(out)
}

/// Draws `count` adversaries from `pool` until the normal set induces a
/// connected subgraph.
pub fn random_members_connected(
    g: &Graph,
    pool: &[usize],
    count: usize,
    seed: u64,
) -> Result<AdversarySet> {
    let n = g.n_vertices();
    for attempt in 0..MEMBER_RETRIES {
        let pick = sample_indices(
            pool.len(),
            count,
            seed,
            Stream::Adversary,
            &[attempt as u64],
        )?;
        let members: Vec<usize> = pick.into_iter().map(|i| pool[i]).collect();
        let set = AdversarySet::new(n, &members)?;
        if !set.normal().is_empty() && graph::is_connected(g, set.normal())? {
            return Ok(set);
        }
    }
    Err(FrdeError::InvalidArgument(format!(
        "no draw of {count} adversaries left a connected normal set in {MEMBER_RETRIES} attempts"
    )))
}

// ---- scenario files ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub rounds: usize,
    pub graph: GraphSpec,
    pub sensing: SensingSpec,
    pub parameter: ParameterFileSpec,
    pub params: ParamsSpec,
    #[serde(default)]
    pub adversary: Option<AdversarySpec>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSpec {
    Edges {
        edges: String,
    },
    RandomGeometric {
        n: usize,
        radius: f64,
        #[serde(default)]
        min_degree: usize,
        #[serde(default = "default_retries")]
        max_retries: usize,
    },
}

fn default_retries() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    pub dim: usize,
    pub noise_bound: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub normalize: bool,
    pub selectors: Option<Vec<String>>,
    /// One matrix per agent, each a list of rows.
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    pub random_selectors: Option<RandomSelectorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSelectorSpec {
    pub count: usize,
    pub selector: String,
    pub others: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterFileSpec {
    pub eta: f64,
    pub theta_star: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case")]
pub enum ParamsSpec {
    Procedure1 {
        #[serde(default = "one")]
        alpha_hat: f64,
        #[serde(default = "ten")]
        beta_hat: f64,
    },
    Procedure2 {
        kappa1: Option<f64>,
        #[serde(default)]
        bounds: BoundsSpec,
    },
    Manual {
        alpha: f64,
        beta: f64,
        r1: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsSpec {
    #[default]
    Exact,
    Fallback,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    /// 1-based agent ids.
    #[serde(default)]
    pub members: Vec<usize>,
    pub random: Option<RandomMemberSpec>,
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMemberSpec {
    pub count: usize,
    /// Draw only among agents with this selector; all agents when absent.
    pub from_selector: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    NullSpace {
        mu_bar: Option<Vec<f64>>,
    },
    FixedOffset {
        offset: Option<Vec<f64>>,
        direction: Option<Vec<f64>>,
    },
    ThresholdRiding {
        rho: f64,
        direction: Vec<f64>,
    },
    Script {
        path: Option<String>,
        inline: Option<String>,
    },
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
}

fn malformed(detail: impl Into<String>) -> FrdeError {
    FrdeError::rejected(Assumption::WellFormed, detail)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| malformed(e.to_string()))
    }

    /// Builds the scenario. Relative script paths resolve against `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>, overrides: Overrides) -> Result<Scenario> {
        self.resolve_inner(base_dir, overrides)
            .map_err(|e| match e {
                FrdeError::ScenarioRejected { .. } | FrdeError::Io { .. } => e,
                other => malformed(other.to_string()),
            })
    }

    fn resolve_inner(&self, base_dir: Option<&Path>, overrides: Overrides) -> Result<Scenario> {
        let seed = overrides.seed.unwrap_or(self.seed);
        let rounds = overrides.rounds.unwrap_or(self.rounds);

        let graph = match &self.graph {
            GraphSpec::Edges { edges } => Graph::parse_edge_list(edges)?,
            GraphSpec::RandomGeometric {
                n,
                radius,
                min_degree,
                max_retries,
            } => graph::random_geometric(
                *n,
                *radius,
                seed,
                &GeometricConstraints {
                    connected: true,
                    connected_subsets: Vec::new(),
                    min_degree: *min_degree,
                    max_retries: *max_retries,
                },
            )?,
        };
        let n = graph.n_vertices();

        let sp = &self.sensing;
        let given = [
            sp.selectors.is_some(),
            sp.matrices.is_some(),
            sp.random_selectors.is_some(),
        ];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(malformed(
                "sensing needs exactly one of selectors, matrices, random_selectors",
            ));
        }
        let selectors = match (&sp.selectors, &sp.random_selectors) {
            (Some(s), _) => Some(s.clone()),
            (_, Some(r)) => Some(random_selectors(n, r.count, &r.selector, &r.others, seed)?),
            _ => None,
        };
        let raw: Vec<DMatrix<f64>> = match (&selectors, &sp.matrices) {
            (Some(sel), _) => sel
                .iter()
                .map(|s| sensing::selector_matrix(s, sp.dim))
                .collect::<Result<_>>()?,
            (_, Some(ms)) => ms
                .iter()
                .enumerate()
                .map(|(i, rows)| rows_to_matrix(rows, sp.dim, i))
                .collect::<Result<_>>()?,
            _ => unreachable!(),
        };
        if raw.len() != n {
            return Err(malformed(format!(
                "{} sensing entries for {n} agents",
                raw.len()
            )));
        }
        let model = if sp.normalize {
            sensing::normalize_sensing(raw, sp.noise_bound)?
        } else {
            SensingModel::new(raw, sp.noise_bound)?
        };

        // Step-size selection needs both, so report them before it runs.
        if !graph::is_graph_connected(&graph) {
            return Err(FrdeError::rejected(
                Assumption::Connectivity,
                "communication graph is disconnected",
            ));
        }
        if !sensing::is_globally_observable(&model, &graph.vertices())? {
            return Err(FrdeError::rejected(
                Assumption::GlobalObservability,
                "the summed Gram matrix of all agents is singular",
            ));
        }

        let parameter = match &self.parameter.theta_star {
            Some(t) => ParameterSpec::new(DVector::from_column_slice(t), self.parameter.eta)?,
            None => ParameterSpec::random_in_ball(sp.dim, self.parameter.eta, seed)?,
        };

        let params = match &self.params {
            ParamsSpec::Procedure1 {
                alpha_hat,
                beta_hat,
            } => params::procedure1(&graph, &model, *alpha_hat, *beta_hat)?,
            ParamsSpec::Procedure2 { kappa1, bounds } => {
                let b = match bounds {
                    BoundsSpec::Exact => LaplacianBounds::Exact,
                    BoundsSpec::Fallback => LaplacianBounds::Fallback,
                };
                params::procedure2(&Procedure2Inputs::from_network(&graph, &model, b, *kappa1)?)?
            }
            ParamsSpec::Manual { alpha, beta, r1 } => FrdeParams::manual(*alpha, *beta, *r1)?,
        };

        let (adversaries, strategy) = match &self.adversary {
            None => (AdversarySet::none(n), None),
            Some(a) => {
                let set = self.resolve_members(a, &graph, selectors.as_deref(), seed)?;
                let strategy = resolve_strategy(&a.strategy, &model, &set, &parameter, base_dir)?;
                (set, Some(strategy))
            }
        };

        Ok(Scenario {
            name: self.name.clone(),
            graph,
            model,
            parameter,
            noise_mode: sp.noise_mode,
            params,
            adversaries,
            strategy,
            rounds,
            seed,
        })
    }

    fn resolve_members(
        &self,
        a: &AdversarySpec,
        graph: &Graph,
        selectors: Option<&[String]>,
        seed: u64,
    ) -> Result<AdversarySet> {
        let n = graph.n_vertices();
        match (&a.random, a.members.is_empty()) {
            (Some(_), false) => Err(malformed("give either members or random, not both")),
            (None, _) => {
                let ids = a
                    .members
                    .iter()
                    .map(|&v| {
                        v.checked_sub(1)
                            .ok_or_else(|| malformed("adversary ids are 1-based"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                AdversarySet::new(n, &ids)
            }
            (Some(r), true) => {
                let pool: Vec<usize> = match &r.from_selector {
                    None => (0..n).collect(),
                    Some(want) => {
                        let sel = selectors.ok_or_else(|| {
                            malformed("from_selector needs selector-based sensing")
                        })?;
                        (0..n).filter(|&i| sel[i] == *want).collect()
                    }
                };
                random_members_connected(graph, &pool, r.count, seed)
            }
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: usize, agent: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != dim) {
        return Err(malformed(format!(
            "agent {} has a row whose length is not {dim}",
            agent + 1
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), dim, &flat))
}

fn resolve_strategy(
    spec: &StrategySpec,
    model: &SensingModel,
    set: &AdversarySet,
    parameter: &ParameterSpec,
    base_dir: Option<&Path>,
) -> Result<AttackStrategy> {
    let vec = |v: &[f64]| DVector::from_column_slice(v);
    match spec {
        StrategySpec::NullSpace { mu_bar } => {
            let policy = match mu_bar {
                Some(v) => MagnitudePolicy::Given(vec(v)),
                None => MagnitudePolicy::MaxFeasible,
            };
            adversary::synthesize_null_space_attack(model, set.normal(), parameter, policy)
        }
        StrategySpec::FixedOffset { offset, direction } => {
            let offset = match (offset, direction) {
                (Some(o), None) => vec(o),
                (None, Some(d)) => adversary::saturating_offset(parameter, &vec(d))?,
                _ => {
                    return Err(malformed(
                        "fixed_offset needs exactly one of offset, direction",
                    ))
                }
            };
            AttackStrategy::fixed_offset(parameter, offset)
        }
        StrategySpec::ThresholdRiding { rho, direction } => {
            if direction.len() != model.dim() {
                return Err(malformed("riding direction has the wrong dimension"));
            }
            AttackStrategy::threshold_riding(*rho, vec(direction))
        }
        StrategySpec::Script { path, inline } => {
            let text = match (path, inline) {
                (Some(p), None) => {
                    let full = match base_dir {
                        Some(b) => b.join(p),
                        None => p.into(),
                    };
                    std::fs::read_to_string(&full).map_err(|source| FrdeError::Io {
                        path: full.clone(),
                        source,
                    })?
                }
                (None, Some(t)) => t.clone(),
                _ => return Err(malformed("script needs exactly one of path, inline")),
            };
            Ok(AttackStrategy::ArbitraryScript(Script::parse(
                &text,
                model.dim(),
            )?))
        }
    }
}

/// Reads and resolves a scenario file.
pub fn load_scenario(path: &Path, overrides: Overrides) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| FrdeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioFile::parse(&text)?.resolve(path.parent(), overrides)
}
