use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FrdeError>;

/// Which standing assumption a rejected scenario violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// The communication graph must be connected.
    Connectivity,
    /// The models of all agents must be globally observable.
    GlobalObservability,
    /// Step sizes must satisfy the spectral conditions on `J`.
    CertifiedParams,
    /// Any other malformed input.
    WellFormed,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::Connectivity => "connectivity (graph must be connected)",
            Assumption::GlobalObservability => {
                "global observability (sum of H_n^T H_n over all agents must be invertible)"
            }
            Assumption::CertifiedParams => {
                "parameter certification (lambda_max(J) <= 1 and 0 < r1 <= lambda_min(J))"
            }
            Assumption::WellFormed => "well-formed scenario",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// Global error against `W_t`.
    Global,
    /// Normal-subset error against `Z_t`.
    Normal,
}

impl std::fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvelopeKind::Global => f.write_str("||e_t|| <= W_t"),
            EnvelopeKind::Normal => f.write_str("||e_t^N|| <= Z_t"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FrdeError {
    #[error("empty vertex set")]
    EmptyVertexSet,
    #[error("vertex {vertex} out of range for graph on {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate vertex {0} in subset")]
    DuplicateVertex(usize),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("constraint unsatisfiable at this radius (radius {radius}, {retries} attempts)")]
    ConstraintUnsatisfiable { radius: f64, retries: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kappa1 too small: {kappa1} must exceed {bound}")]
    Kappa1TooSmall { kappa1: f64, bound: f64 },
    #[error("degenerate r1: {0}")]
    DegenerateR1(f64),
    #[error("malformed round: {0}")]
    MalformedRound(String),
    #[error("no undetectable direction: normal agents' models are globally observable")]
    NoUndetectableDirection,
    #[error("no room in Θ: ||theta*|| = {norm} is not below eta = {eta}")]
    NoRoomInTheta { norm: f64, eta: f64 },
    #[error("script underrun at round {round}")]
    ScriptUnderrun { round: usize },
    #[error("uncertified: lambda_min(J) = {0} is not in (0, 1]")]
    Uncertified(f64),
    #[error("normal set not observable/connected")]
    NormalSetNotObservable,
    #[error("scenario rejected, violates {assumption}: {detail}")]
    ScenarioRejected {
        assumption: Assumption,
        detail: String,
    },
    #[error("envelope violation at row {row}: {kind} fails ({observed} > {bound})")]
    EnvelopeViolation {
        row: usize,
        kind: EnvelopeKind,
        observed: f64,
        bound: f64,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FrdeError {
    pub(crate) fn rejected(assumption: Assumption, detail: impl Into<String>) -> Self {
        FrdeError::ScenarioRejected {
            assumption,
            detail: detail.into(),
        }
    }
}
