//! The synchronous round loop.

use nalgebra::DVector;

use super::scenario::{admit, Scenario};
use crate::adversary::{adversary_messages, AdversaryView};
use crate::bounds::{EnvelopeState, ErrorTrace};
use crate::error::{EnvelopeKind, FrdeError, Result};
use crate::par::{map_indexed, ExecMode};
use crate::params::FrdeParams;
use crate::protocol::{agent_step, init_agent, AgentState, Flag, Message, ThresholdState};
use crate::sensing::{measure, NoiseSource};

/// Relative slack when comparing observed errors with an envelope.
pub const ENVELOPE_RTOL: f64 = 1e-9;
/// Absolute slack, as a fraction of the envelope's starting value, covering
/// round-off once the envelope itself is near zero.
pub const ENVELOPE_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub exec: ExecMode,
    /// Keep every agent's estimate for every row.
    pub record_estimates: bool,
    /// Abort with [`FrdeError::EnvelopeViolation`] when an envelope is exceeded.
    pub check_envelopes: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            exec: ExecMode::default(),
            record_estimates: false,
            check_envelopes: true,
        }
    }
}

/// One row of the time series, describing the network at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: usize,
    pub gamma: f64,
    pub w: f64,
    /// Present while `Z_t` is defined and no normal agent has flagged.
    pub z: Option<f64>,
    pub err_global: f64,
    pub err_normal: f64,
    pub detected: bool,
    pub flag_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub n_adversaries: usize,
    pub strategy: Option<&'static str>,
    pub rounds: usize,
    pub noise_bound: f64,
    pub params: FrdeParams,
    pub lambda_min_j: f64,
    pub lambda_max_j: f64,
    pub r2: Option<f64>,
    pub gamma_final: f64,
    pub gamma_limit: f64,
    pub w_final: f64,
    pub w_limit: f64,
    pub z_final: Option<f64>,
    pub z_limit: Option<f64>,
    pub detected: bool,
    pub first_detection: Option<usize>,
    pub flag_count: usize,
    pub err_global: f64,
    pub err_normal: f64,
    pub theta_star: DVector<f64>,
    pub theta_bar: Option<DVector<f64>>,
    /// Average final estimate over the normal agents.
    pub mean_normal_estimate: DVector<f64>,
}

impl RunSummary {
    /// Final error divided by `B`; undefined when `B = 0`.
    pub fn implied_rho_global(&self) -> Option<f64> {
        (self.noise_bound > 0.0).then(|| self.err_global / self.noise_bound)
    }

    pub fn implied_rho_normal(&self) -> Option<f64> {
        (self.noise_bound > 0.0).then(|| self.err_normal / self.noise_bound)
    }

    /// `W` limit over `B`, i.e. `α√N / λ_min(J)`.
    pub fn theory_rho_global(&self) -> Option<f64> {
        (self.noise_bound > 0.0).then(|| self.w_limit / self.noise_bound)
    }

    pub fn theory_rho_normal(&self) -> Option<f64> {
        match self.z_limit {
            Some(z) if self.noise_bound > 0.0 => Some(z / self.noise_bound),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<RunRow>,
    pub errors: ErrorTrace,
    /// `flags[t][n]` is agent `n`'s flag at time `t`.
    pub flags: Vec<Vec<Flag>>,
    /// `estimates[t][n]`, when requested.
    pub estimates: Option<Vec<Vec<DVector<f64>>>>,
    pub summary: RunSummary,
}

struct Recorder<'a> {
    s: &'a Scenario,
    opts: RunOptions,
    trace_rows: Vec<RunRow>,
    errors: ErrorTrace,
    flags: Vec<Vec<Flag>>,
    estimates: Vec<Vec<DVector<f64>>>,
    first_detection: Option<usize>,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        t: usize,
        states: &[AgentState],
        gamma: f64,
        env: &EnvelopeState,
    ) -> Result<()> {
        let theta = &self.s.parameter.theta_star;
        let sq: Vec<f64> = states
            .iter()
            .map(|a| {
                a.estimate
                    .iter()
                    .zip(theta.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .collect();
        let err_global = sq.iter().sum::<f64>().sqrt();
        let normal = self.s.adversaries.normal();
        let err_normal = normal.iter().map(|&i| sq[i]).sum::<f64>().sqrt();
        let flags: Vec<Flag> = states.iter().map(|a| a.flag).collect();
        let flag_count = normal.iter().filter(|&&i| flags[i].is_attack()).count();
        let detected = flag_count > 0;
        if detected && self.first_detection.is_none() {
            self.first_detection = Some(t);
        }
        let z = env.z.filter(|_| self.first_detection.is_none());

        if self.opts.check_envelopes {
            let c = &env.consts;
            if self.s.adversaries.is_empty() {
                check(t, EnvelopeKind::Global, err_global, env.w, c.w0)?;
            }
            if let Some(z) = z {
                check(t, EnvelopeKind::Normal, err_normal, z, c.z0)?;
            }
        }

        self.trace_rows.push(RunRow {
            t,
            gamma,
            w: env.w,
            z,
            err_global,
            err_normal,
            detected,
            flag_count,
        });
        self.errors.global.push(err_global);
        self.errors.normal.push(err_normal);
        self.errors
            .per_agent
            .push(sq.into_iter().map(f64::sqrt).collect());
        self.flags.push(flags);
        if self.opts.record_estimates {
            self.estimates
                .push(states.iter().map(|a| a.estimate.clone()).collect());
        }
        Ok(())
    }
}

fn check(row: usize, kind: EnvelopeKind, observed: f64, bound: f64, start: f64) -> Result<()> {
    if observed > bound * (1.0 + ENVELOPE_RTOL) + ENVELOPE_ATOL * start {
        return Err(FrdeError::EnvelopeViolation {
            row,
            kind,
            observed,
            bound,
        });
    }
    Ok(())
}

/// Runs an admitted scenario for `scenario.rounds` rounds.
pub fn run(s: &Scenario, opts: &RunOptions) -> Result<RunTrace> {
    let adm = admit(s)?;
    let n = s.graph.n_vertices();
    let m = s.model.dim();
    let b = s.model.noise_bound();
    let eta = s.parameter.eta;
    let normal = s.adversaries.normal();
    let noise = NoiseSource {
        seed: s.seed,
        mode: s.noise_mode,
    };
    let theta_star = &s.parameter.theta_star;
    let theta_bar = s.strategy.as_ref().and_then(|st| st.theta_bar());

    let mut states: Vec<AgentState> = (0..n).map(|_| init_agent(m)).collect();
    let mut threshold = ThresholdState::new(eta, n, s.params.alpha, b, s.params.r1);
    let mut env = EnvelopeState::new(
        adm.certificate.lambda_min,
        adm.r2,
        &s.params,
        b,
        n,
        normal.len(),
        eta,
    )?;

    let mut rec = Recorder {
        s,
        opts: *opts,
        trace_rows: Vec::with_capacity(s.rounds + 1),
        errors: ErrorTrace::default(),
        flags: Vec::with_capacity(s.rounds + 1),
        estimates: Vec::new(),
        first_detection: None,
    };
    rec.record(0, &states, threshold.gamma, &env)?;

    for t in 0..s.rounds {
        let gamma = threshold.gamma;

        // Messages sent by adversaries, grouped by receiver.
        let mut forged: Vec<Vec<Message>> = vec![Vec::new(); n];
        if let Some(strategy) = &s.strategy {
            let estimates: Vec<DVector<f64>> = states.iter().map(|a| a.estimate.clone()).collect();
            let view = AdversaryView {
                graph: &s.graph,
                model: &s.model,
                theta_star,
                estimates: &estimates,
                round: t,
                gamma,
            };
            for msg in adversary_messages(strategy, &s.adversaries, &view)? {
                forged[msg.receiver].push(msg);
            }
        }

        let step = |i: usize| -> Result<AgentState> {
            let adversarial = s.adversaries.contains(i);
            let theta = match theta_bar {
                Some(tb) if adversarial => tb,
                _ => theta_star,
            };
            let y = measure(&s.model, theta, i, t, &noise);
            let neighbors = s.graph.neighbors(i);
            let mut inbox: Vec<Message> = neighbors
                .iter()
                .filter(|&&l| !s.adversaries.contains(l))
                .map(|&l| Message::honest(l, i, t, &states[l].estimate))
                .collect();
            inbox.extend(forged[i].iter().cloned());
            let mut next = agent_step(
                i,
                &states[i],
                &inbox,
                neighbors,
                &y,
                s.model.h(i),
                &s.params,
                gamma,
            )?;
            if adversarial {
                next.flag = Flag::NoAttack;
            }
            Ok(next)
        };
        states = map_indexed(n, opts.exec, step)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        threshold = threshold.step();
        env.step(gamma);
        rec.record(t + 1, &states, threshold.gamma, &env)?;
    }

    let last = rec
        .trace_rows
        .last()
        .expect("row 0 always recorded")
        .clone();
    let mut mean = DVector::zeros(m);
    for &i in normal {
        mean += &states[i].estimate;
    }
    if !normal.is_empty() {
        mean /= normal.len() as f64;
    }
    let summary = RunSummary {
        name: s.name.clone(),
        seed: s.seed,
        n,
        dim: m,
        n_adversaries: s.adversaries.members().len(),
        strategy: s.strategy.as_ref().map(|st| st.name()),
        rounds: s.rounds,
        noise_bound: b,
        params: s.params,
        lambda_min_j: adm.certificate.lambda_min,
        lambda_max_j: adm.certificate.lambda_max,
        r2: adm.r2,
        gamma_final: threshold.gamma,
        gamma_limit: threshold.fixed_point(),
        w_final: env.w,
        w_limit: env.w_limit(),
        z_final: env.z,
        z_limit: env.z_limit().ok(),
        detected: last.detected,
        first_detection: rec.first_detection,
        flag_count: last.flag_count,
        err_global: last.err_global,
        err_normal: last.err_normal,
        theta_star: theta_star.clone(),
        theta_bar: theta_bar.cloned(),
        mean_normal_estimate: mean,
    };
    Ok(RunTrace {
        rows: rec.trace_rows,
        errors: rec.errors,
        flags: rec.flags,
        estimates: opts.record_estimates.then_some(rec.estimates),
        summary,
    })
}

/// Runs independent scenarios, in parallel across scenarios when `opts.exec`
/// allows it. Each run itself is sequential.
pub fn run_many(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<RunTrace>> {
    let inner = RunOptions {
        exec: ExecMode::Sequential,
        ..*opts
    };
    map_indexed(scenarios.len(), opts.exec, |i| run(&scenarios[i], &inner))
}
