//! Attack strategies for the agents in `𝒜`.
//!
//! Normal agents only ever see their own measurement and the messages of their
//! neighbors. Strategies instead receive an [`AdversaryView`], a read-only
//! window onto the whole network state including `θ*`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{FrdeError, Result};
use crate::graph::Graph;
use crate::protocol::Message;
use crate::sensing::{self, ParameterSpec, SensingModel};
use crate::spectral::{self, RANK_TOL};

/// Fraction of `η` an offset attack saturates to.
pub const SATURATION: f64 = 0.99;

/// Relative size below which null-vector components are set to zero.
const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySet {
    members: Vec<usize>,
    normal: Vec<usize>,
    is_member: Vec<bool>,
}

impl AdversarySet {
    pub fn new(n: usize, members: &[usize]) -> Result<Self> {
        let mut is_member = vec![false; n];
        for &a in members {
            if a >= n {
                return Err(FrdeError::InvalidVertex { vertex: a, n });
            }
            if is_member[a] {
                return Err(FrdeError::DuplicateVertex(a));
            }
            is_member[a] = true;
        }
        let members: Vec<usize> = (0..n).filter(|&i| is_member[i]).collect();
        let normal = (0..n).filter(|&i| !is_member[i]).collect();
        Ok(AdversarySet {
            members,
            normal,
            is_member,
        })
    }

    pub fn none(n: usize) -> Self {
        Self::new(n, &[]).expect("empty set is valid")
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn normal(&self) -> &[usize] {
        &self.normal
    }

    pub fn contains(&self, v: usize) -> bool {
        self.is_member.get(v).copied().unwrap_or(false)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.is_member.len()
    }
}

/// A scripted payload for one `(round, sender, receiver)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptPayload {
    /// Send this vector.
    Absolute(DVector<f64>),
    /// Send the receiver's estimate plus `scale · γ_t · u` for unit `u`.
    GammaOffset { scale: f64, direction: DVector<f64> },
    /// Send the sender's own estimate.
    Honest,
}

/// A replay table of adversary payloads covering rounds `0..rounds`.
///
/// Pairs missing from a covered round send honestly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub rounds: usize,
    pub entries: BTreeMap<(usize, usize, usize), ScriptPayload>,
}

impl Script {
    /// Parses lines of `round sender receiver kind values...` with 1-based
    /// agent ids. `kind` is `abs v1 .. vM`, `gamma scale u1 .. uM` or
    /// `honest`. A `rounds K` line sets the covered length; without one the
    /// script covers up to its last scripted round.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut declared = None;
        let mut last = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| FrdeError::Parse(format!("script line {}: {msg}", lineno + 1));
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok[0] == "rounds" {
                if tok.len() != 2 {
                    return Err(err("expected `rounds K`"));
                }
                declared = Some(
                    tok[1]
                        .parse::<usize>()
                        .map_err(|_| err("bad round count"))?,
                );
                continue;
            }
            if tok.len() < 4 {
                return Err(err("expected `round sender receiver kind ...`"));
            }
            let round: usize = tok[0].parse().map_err(|_| err("bad round"))?;
            let id = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(err("agent ids are 1-based integers")),
                }
            };
            let (sender, receiver) = (id(tok[1])?, id(tok[2])?);
            let nums = tok[4..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| err("bad number")))
                .collect::<Result<Vec<f64>>>()?;
            let payload = match tok[3] {
                "abs" => {
                    if nums.len() != dim {
                        return Err(err(&format!("abs needs {dim} values")));
                    }
                    ScriptPayload::Absolute(DVector::from_vec(nums))
                }
                "gamma" => {
                    if nums.len() != dim + 1 {
                        return Err(err(&format!("gamma needs a scale and {dim} values")));
                    }
                    let direction = unit(DVector::from_column_slice(&nums[1..]))
                        .ok_or_else(|| err("gamma direction must be nonzero"))?;
                    ScriptPayload::GammaOffset {
                        scale: nums[0],
                        direction,
                    }
                }
                "honest" if nums.is_empty() => ScriptPayload::Honest,
                other => return Err(err(&format!("unknown payload kind `{other}`"))),
            };
            last = Some(last.map_or(round, |l: usize| l.max(round)));
            entries.insert((round, sender, receiver), payload);
        }
        let rounds = declared.unwrap_or_else(|| last.map_or(0, |l| l + 1));
        Ok(Script { rounds, entries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackStrategy {
    /// Honest execution against `θ̄ = θ* + μ̄` with `μ̄` unobservable to `𝒩`.
    NullSpaceImpersonation {
        mu_bar: DVector<f64>,
        theta_bar: DVector<f64>,
    },
    /// Honest execution against an arbitrary `θ̄ = θ* + μ̄`.
    FixedOffsetImpersonation {
        mu_bar: DVector<f64>,
        theta_bar: DVector<f64>,
    },
    /// Send `x_receiver + ρ·γ_t·u`.
    ThresholdRiding {
        rho: f64,
        direction: DVector<f64>,
    },
    ArbitraryScript(Script),
}

impl AttackStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::NullSpaceImpersonation { .. } => "null_space",
            AttackStrategy::FixedOffsetImpersonation { .. } => "fixed_offset",
            AttackStrategy::ThresholdRiding { .. } => "threshold_riding",
            AttackStrategy::ArbitraryScript(_) => "script",
        }
    }

    /// The parameter adversaries pretend is true, if they impersonate.
    pub fn theta_bar(&self) -> Option<&DVector<f64>> {
        match self {
            AttackStrategy::NullSpaceImpersonation { theta_bar, .. }
            | AttackStrategy::FixedOffsetImpersonation { theta_bar, .. } => Some(theta_bar),
            _ => None,
        }
    }

    pub fn threshold_riding(rho: f64, direction: DVector<f64>) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(FrdeError::InvalidArgument(format!(
                "riding fraction must be positive, got {rho}"
            )));
        }
        let direction = unit(direction)
            .ok_or_else(|| FrdeError::InvalidArgument("riding direction must be nonzero".into()))?;
        Ok(AttackStrategy::ThresholdRiding { rho, direction })
    }

    /// Impersonation of `θ* + offset`, where the offset may be observable.
    pub fn fixed_offset(spec: &ParameterSpec, offset: DVector<f64>) -> Result<Self> {
        check_offset(spec, &offset)?;
        Ok(AttackStrategy::FixedOffsetImpersonation {
            theta_bar: &spec.theta_star + &offset,
            mu_bar: offset,
        })
    }
}

fn unit(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

fn check_offset(spec: &ParameterSpec, offset: &DVector<f64>) -> Result<()> {
    if offset.len() != spec.dim() {
        return Err(FrdeError::InvalidArgument(format!(
            "offset has dimension {}, expected {}",
            offset.len(),
            spec.dim()
        )));
    }
    let norm = (&spec.theta_star + offset).norm();
    if norm > spec.eta {
        return Err(FrdeError::InvalidArgument(format!(
            "||theta* + offset|| = {norm} exceeds eta = {}",
            spec.eta
        )));
    }
    Ok(())
}

/// `c·u` with `c > 0` chosen so `‖θ* + c·u‖ = 0.99η` (or halfway between
/// `‖θ*‖` and `η` when `θ*` is already past `0.99η`).
pub fn saturating_offset(spec: &ParameterSpec, direction: &DVector<f64>) -> Result<DVector<f64>> {
    let u = unit(direction.clone())
        .ok_or_else(|| FrdeError::InvalidArgument("offset direction must be nonzero".into()))?;
    if u.len() != spec.dim() {
        return Err(FrdeError::InvalidArgument(format!(
            "direction has dimension {}, expected {}",
            u.len(),
            spec.dim()
        )));
    }
    let t2 = spec.theta_star.norm_squared();
    let t = t2.sqrt();
    if t >= spec.eta {
        return Err(FrdeError::NoRoomInTheta {
            norm: t,
            eta: spec.eta,
        });
    }
    let target = (SATURATION * spec.eta).max(0.5 * (t + spec.eta));
    let b = spec.theta_star.dot(&u);
    let c = -b + (b * b + target * target - t2).sqrt();
    Ok(u * c)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MagnitudePolicy {
    MaxFeasible,
    Given(DVector<f64>),
}

/// Builds an attack that no normal agent can detect: `μ̄` lies in the null
/// space of the normal agents' stacked sensing matrices.
pub fn synthesize_null_space_attack(
    model: &SensingModel,
    normal: &[usize],
    spec: &ParameterSpec,
    policy: MagnitudePolicy,
) -> Result<AttackStrategy> {
    if spec.dim() != model.dim() {
        return Err(FrdeError::InvalidArgument(format!(
            "parameter dimension {} does not match sensing dimension {}",
            spec.dim(),
            model.dim()
        )));
    }
    if sensing::is_globally_observable(model, normal)? {
        return Err(FrdeError::NoUndetectableDirection);
    }
    let norm = spec.theta_star.norm();
    if norm >= spec.eta {
        return Err(FrdeError::NoRoomInTheta {
            norm,
            eta: spec.eta,
        });
    }
    let stacked = model.stacked(normal);
    let scale = stacked.norm();
    let mu_bar = match policy {
        MagnitudePolicy::MaxFeasible => {
            let basis = spectral::null_space_basis(&stacked, RANK_TOL)?;
            if basis.ncols() == 0 {
                return Err(FrdeError::NoUndetectableDirection);
            }
            let v = snap(basis.column(0).into_owned());
            if (&stacked * &v).norm() > RANK_TOL * scale.max(1.0) {
                return Err(FrdeError::NoUndetectableDirection);
            }
            saturating_offset(spec, &v)?
        }
        MagnitudePolicy::Given(mu) => {
            check_offset(spec, &mu)?;
            if (&stacked * &mu).norm() > RANK_TOL * scale.max(1.0) * mu.norm() {
                return Err(FrdeError::InvalidArgument(
                    "given offset is visible to the normal agents".into(),
                ));
            }
            mu
        }
    };
    Ok(AttackStrategy::NullSpaceImpersonation {
        theta_bar: &spec.theta_star + &mu_bar,
        mu_bar,
    })
}

// Zeroes round-off sized components so that coordinate-aligned null
// directions are exact.
fn snap(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    let snapped = v.map(|x| if x.abs() <= SNAP_TOL * n { 0.0 } else { x });
    let sn = snapped.norm();
    snapped / sn
}

/// Global state visible to adversaries.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryView<'a> {
    pub graph: &'a Graph,
    pub model: &'a SensingModel,
    pub theta_star: &'a DVector<f64>,
    /// Current estimates of every agent; adversaries' entries are their internal state.
    pub estimates: &'a [DVector<f64>],
    pub round: usize,
    pub gamma: f64,
}

/// Every message sent by a member of `set` in `view.round`, ordered by
/// `(sender, receiver)`.
pub fn adversary_messages(
    strategy: &AttackStrategy,
    set: &AdversarySet,
    view: &AdversaryView,
) -> Result<Vec<Message>> {
    if let AttackStrategy::ArbitraryScript(script) = strategy {
        if view.round >= script.rounds {
            return Err(FrdeError::ScriptUnderrun { round: view.round });
        }
    }
    let mut out = Vec::new();
    for &a in set.members() {
        for &r in view.graph.neighbors(a) {
            let own = &view.estimates[a];
            let target = &view.estimates[r];
            let payload = match strategy {
                AttackStrategy::NullSpaceImpersonation { .. }
                | AttackStrategy::FixedOffsetImpersonation { .. } => own.clone(),
                AttackStrategy::ThresholdRiding { rho, direction } => {
                    target + direction * (rho * view.gamma)
                }
                AttackStrategy::ArbitraryScript(script) => {
                    match script.entries.get(&(view.round, a, r)) {
                        None | Some(ScriptPayload::Honest) => own.clone(),
                        Some(ScriptPayload::Absolute(v)) => v.clone(),
                        Some(ScriptPayload::GammaOffset { scale, direction }) => {
                            target + direction * (scale * view.gamma)
                        }
                    }
                }
            };
            if payload.len() != own.len() {
                return Err(FrdeError::MalformedRound(format!(
                    "adversary {} payload has dimension {}",
                    a + 1,
                    payload.len()
                )));
            }
            out.push(Message {
                sender: a,
                receiver: r,
                round: view.round,
                payload,
            });
        }
    }
    Ok(out)
}

/// Projection helper used when reporting: components of `v` visible to the
/// normal set's sensors.
pub fn visible_part(model: &SensingModel, normal: &[usize], v: &DVector<f64>) -> DVector<f64> {
    let stacked: DMatrix<f64> = model.stacked(normal);
    stacked * v
}
