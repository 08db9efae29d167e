//! Per-agent estimator and detector.
//!
//! Every round an agent sends its estimate to all neighbors, raises its flag
//! if any received estimate is farther than `γ_t` from its own, and then moves
//! its estimate by a consensus term toward its neighbors plus an innovation
//! term toward its own measurement.

use nalgebra::{DMatrix, DVector};

use crate::error::{FrdeError, Result};
use crate::params::FrdeParams;
use crate::sensing::Measurement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Flag {
    #[default]
    NoAttack,
    Attack,
}

impl Flag {
    pub fn is_attack(self) -> bool {
        self == Flag::Attack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub estimate: DVector<f64>,
    pub flag: Flag,
}

/// Zero estimate and no flag.
pub fn init_agent(m_dim: usize) -> AgentState {
    AgentState {
        estimate: DVector::zeros(m_dim),
        flag: Flag::NoAttack,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub round: usize,
    pub payload: DVector<f64>,
}

impl Message {
    /// The honest message: the sender's current estimate.
    pub fn honest(sender: usize, receiver: usize, round: usize, estimate: &DVector<f64>) -> Self {
        Message {
            sender,
            receiver,
            round,
            payload: estimate.clone(),
        }
    }
}

/// Euclidean distance computed as `sqrt(Σ (a_i − b_i)²)` in index order.
pub fn deviation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Inbox messages ordered by sender after checking there is exactly one
/// message per neighbor, all addressed to `receiver` for `round`.
fn ordered_inbox<'a>(
    receiver: usize,
    round: usize,
    dim: usize,
    inbox: &'a [Message],
    neighbors: &[usize],
) -> Result<Vec<&'a Message>> {
    let mut msgs: Vec<&Message> = inbox.iter().collect();
    msgs.sort_by_key(|m| m.sender);
    let mut senders: Vec<usize> = msgs.iter().map(|m| m.sender).collect();
    let mut expected = neighbors.to_vec();
    expected.sort_unstable();
    senders.dedup();
    if senders.len() != msgs.len() {
        return Err(FrdeError::MalformedRound(format!(
            "agent {receiver} received duplicate messages in round {round}"
        )));
    }
    if senders != expected {
        return Err(FrdeError::MalformedRound(format!(
            "agent {receiver} expected messages from {expected:?} in round {round}, got {senders:?}"
        )));
    }
    for m in &msgs {
        if m.receiver != receiver || m.round != round || m.payload.len() != dim {
            return Err(FrdeError::MalformedRound(format!(
                "message from {} is not a round-{round} message for agent {receiver}",
                m.sender
            )));
        }
    }
    Ok(msgs)
}

/// `x(t+1) = x(t) − β Σ_l (x(t) − m_l) + α Hᵀ(y − H x(t))`.
pub fn estimate_update(
    receiver: usize,
    state: &AgentState,
    inbox: &[Message],
    neighbors: &[usize],
    y: &Measurement,
    h: &DMatrix<f64>,
    params: &FrdeParams,
) -> Result<DVector<f64>> {
    let x = &state.estimate;
    let msgs = ordered_inbox(receiver, y.round, x.len(), inbox, neighbors)?;
    let mut consensus = DVector::zeros(x.len());
    for m in msgs {
        consensus += x - &m.payload;
    }
    let innovation = h.transpose() * (&y.value - h * x);
    Ok(x - consensus * params.beta + innovation * params.alpha)
}

/// Attack if already flagged or some neighbor deviates by strictly more than `gamma`.
pub fn flag_update(
    receiver: usize,
    round: usize,
    state: &AgentState,
    inbox: &[Message],
    neighbors: &[usize],
    gamma: f64,
) -> Result<Flag> {
    let msgs = ordered_inbox(receiver, round, state.estimate.len(), inbox, neighbors)?;
    if state.flag.is_attack() {
        return Ok(Flag::Attack);
    }
    let crossed = msgs
        .iter()
        .any(|m| deviation(&state.estimate, &m.payload) > gamma);
    Ok(if crossed {
        Flag::Attack
    } else {
        Flag::NoAttack
    })
}

/// One full agent round: flag from the pre-update estimate, then the estimate update.
#[allow(clippy::too_many_arguments)]
pub fn agent_step(
    receiver: usize,
    state: &AgentState,
    inbox: &[Message],
    neighbors: &[usize],
    y: &Measurement,
    h: &DMatrix<f64>,
    params: &FrdeParams,
    gamma: f64,
) -> Result<AgentState> {
    let flag = flag_update(receiver, y.round, state, inbox, neighbors, gamma)?;
    let estimate = estimate_update(receiver, state, inbox, neighbors, y, h, params)?;
    Ok(AgentState { estimate, flag })
}

/// Detection threshold `γ_t` with `γ_0 = 2η√N` and
/// `γ_{t+1} = (1 − r₁)γ_t + αB√N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdState {
    pub gamma: f64,
    pub r1: f64,
    /// `αB√N`.
    pub drive: f64,
}

impl ThresholdState {
    pub fn new(eta: f64, n: usize, alpha: f64, noise_bound: f64, r1: f64) -> Self {
        let sqrt_n = (n as f64).sqrt();
        ThresholdState {
            gamma: 2.0 * eta * sqrt_n,
            r1,
            drive: alpha * noise_bound * sqrt_n,
        }
    }

    pub fn step(self) -> Self {
        ThresholdState {
            gamma: (1.0 - self.r1) * self.gamma + self.drive,
            ..self
        }
    }

    /// `αB√N / r₁`.
    pub fn fixed_point(&self) -> f64 {
        self.drive / self.r1
    }
}
