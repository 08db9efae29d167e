//! Error envelopes.
//!
//! `W_t` bounds the stacked error of an attack-free network:
//! `W_{t+1} = (1 − λ_min(J))W_t + αB√N`, `W_0 = η√N`.
//!
//! `Z_t` bounds the stacked error of the normal agents while no flag has been
//! raised: `Z_{t+1} = (1 − r₂)Z_t + κ₂γ_t + αB√|𝒩|`, `Z_0 = η√|𝒩|`, where
//! `r₂ = λ_min(J^𝒩)` and `κ₂ = β(N − |𝒩|)√|𝒩|`.

use crate::error::{FrdeError, Result};
use crate::graph::{self, Graph};
use crate::params::{build_j, FrdeParams, CERT_TOL};
use crate::sensing::{self, SensingModel};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConstants {
    pub lambda_min_j: f64,
    /// `λ_min(J^𝒩)`; absent when the normal set is disconnected or unobservable.
    pub r2: Option<f64>,
    pub r1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa2: f64,
    /// `αB√N`.
    pub drive_w: f64,
    /// `αB√|𝒩|`.
    pub drive_z: f64,
    pub w0: f64,
    pub z0: f64,
    pub n: usize,
    pub n_normal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeState {
    pub w: f64,
    pub z: Option<f64>,
    pub consts: EnvelopeConstants,
}

impl EnvelopeState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda_min_j: f64,
        r2: Option<f64>,
        params: &FrdeParams,
        noise_bound: f64,
        n: usize,
        n_normal: usize,
        eta: f64,
    ) -> Result<Self> {
        if !(lambda_min_j > 0.0 && lambda_min_j <= 1.0 + CERT_TOL) {
            return Err(FrdeError::Uncertified(lambda_min_j));
        }
        let r2 = match r2 {
            Some(r) if !(r > 0.0 && r <= 1.0 + CERT_TOL) => {
                return Err(FrdeError::NormalSetNotObservable)
            }
            other => other,
        };
        let sqrt_n = (n as f64).sqrt();
        let sqrt_nn = (n_normal as f64).sqrt();
        let consts = EnvelopeConstants {
            lambda_min_j,
            r2,
            r1: params.r1,
            alpha: params.alpha,
            beta: params.beta,
            kappa2: params.beta * (n - n_normal) as f64 * sqrt_nn,
            drive_w: params.alpha * noise_bound * sqrt_n,
            drive_z: params.alpha * noise_bound * sqrt_nn,
            w0: eta * sqrt_n,
            z0: eta * sqrt_nn,
            n,
            n_normal,
        };
        Ok(EnvelopeState {
            w: consts.w0,
            z: r2.map(|_| consts.z0),
            consts,
        })
    }

    pub fn w_step(&mut self) {
        self.w = (1.0 - self.consts.lambda_min_j) * self.w + self.consts.drive_w;
    }

    /// `αB√N / λ_min(J)`.
    pub fn w_limit(&self) -> f64 {
        self.consts.drive_w / self.consts.lambda_min_j
    }

    /// `W_t` by direct summation of the geometric series.
    pub fn w_closed_form(&self, t: usize) -> f64 {
        let q = 1.0 - self.consts.lambda_min_j;
        let mut sum = 0.0;
        let mut pow = 1.0;
        for _ in 0..t {
            sum += pow;
            pow *= q;
        }
        pow * self.consts.w0 + self.consts.drive_w * sum
    }

    /// Advances `Z` using this round's threshold `γ_t`.
    pub fn z_step(&mut self, gamma_t: f64) -> Result<()> {
        let r2 = self.consts.r2.ok_or(FrdeError::NormalSetNotObservable)?;
        let z = self.z.ok_or(FrdeError::NormalSetNotObservable)?;
        self.z = Some((1.0 - r2) * z + self.consts.kappa2 * gamma_t + self.consts.drive_z);
        Ok(())
    }

    /// `αB√|𝒩| / r₂ · (1 + β(N − |𝒩|)√N / r₁)`.
    pub fn z_limit(&self) -> Result<f64> {
        let c = &self.consts;
        let r2 = c.r2.ok_or(FrdeError::NormalSetNotObservable)?;
        let adversaries = (c.n - c.n_normal) as f64;
        Ok(c.drive_z / r2 * (1.0 + c.beta * adversaries * (c.n as f64).sqrt() / c.r1))
    }

    /// Step both envelopes; `gamma_t` is the threshold of the round being left.
    pub fn step(&mut self, gamma_t: f64) {
        self.w_step();
        if self.z.is_some() {
            self.z_step(gamma_t).expect("z defined");
        }
    }
}

/// `λ_min(J^𝒩)` when `normal` is connected and globally observable.
pub fn normal_set_r2(
    g: &Graph,
    model: &SensingModel,
    normal: &[usize],
    params: &FrdeParams,
) -> Result<Option<f64>> {
    if normal.is_empty()
        || !graph::is_connected(g, normal)?
        || !sensing::is_globally_observable(model, normal)?
    {
        return Ok(None);
    }
    let j = build_j(g, model, normal, params.beta, params.alpha)?;
    let r2 = spectral::min_eig(&j.matrix)?;
    Ok((r2 > 0.0).then_some(r2))
}

/// Error norms per round: stacked global, stacked normal, and each agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrace {
    pub global: Vec<f64>,
    pub normal: Vec<f64>,
    pub per_agent: Vec<Vec<f64>>,
}

impl ErrorTrace {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// `‖x^𝒳 − 1 ⊗ θ*‖` at `row`.
    pub fn subset_error(&self, row: usize, subset: &[usize]) -> f64 {
        let errs = &self.per_agent[row];
        subset
            .iter()
            .map(|&i| errs[i] * errs[i])
            .sum::<f64>()
            .sqrt()
    }
}

/// Whether the final stacked error of `subset` is within `ρB`
/// (within `1e-9` when `B = 0`).
pub fn check_correctness(trace: &ErrorTrace, subset: &[usize], rho: f64, b: f64) -> Result<bool> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(FrdeError::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let last = trace
        .len()
        .checked_sub(1)
        .ok_or_else(|| FrdeError::InvalidArgument("empty trace".into()))?;
    let err = trace.subset_error(last, subset);
    Ok(if b == 0.0 {
        err <= 1e-9
    } else {
        err <= rho * b
    })
}
