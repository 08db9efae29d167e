//! Linear measurement models with norm-bounded noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FrdeError, Result};
use crate::rng::{stream_rng, Stream};
use crate::spectral::{self, SymmetricMatrix, RANK_TOL};

/// Slack on `λ_max(H_nᵀH_n) ≤ 1` for matrices produced by normalization.
pub const SENSING_NORM_TOL: f64 = 1e-12;

/// The true parameter and the radius of the ball known to contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    pub theta_star: DVector<f64>,
    pub eta: f64,
}

impl ParameterSpec {
    pub fn new(theta_star: DVector<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(FrdeError::InvalidArgument(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if theta_star.iter().any(|x| !x.is_finite()) {
            return Err(FrdeError::InvalidArgument("theta* is not finite".into()));
        }
        let norm = theta_star.norm();
        if norm > eta {
            return Err(FrdeError::InvalidArgument(format!(
                "||theta*|| = {norm} exceeds eta = {eta}"
            )));
        }
        Ok(ParameterSpec { theta_star, eta })
    }

    /// Draws θ* uniformly from the closed ball of radius `eta` in `R^m`.
    pub fn random_in_ball(m: usize, eta: f64, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, Stream::Theta, &[]);
        let theta = uniform_in_ball(&mut rng, m, eta);
        ParameterSpec::new(theta, eta)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Uniform in the ball of radius `B`.
    #[default]
    Uniform,
    /// Always `B` times the normalized all-ones direction.
    WorstCase,
}

/// Per-agent sensing matrices `H_n` (each `rows_n × M`) and the noise bound `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    h: Vec<DMatrix<f64>>,
    gram: Vec<DMatrix<f64>>,
    noise_bound: f64,
    m: usize,
}

impl SensingModel {
    pub fn new(h: Vec<DMatrix<f64>>, noise_bound: f64) -> Result<Self> {
        let m = check_shapes(&h)?;
        if !(noise_bound >= 0.0 && noise_bound.is_finite()) {
            return Err(FrdeError::InvalidArgument(format!(
                "noise bound must be finite and non-negative, got {noise_bound}"
            )));
        }
        let gram: Vec<DMatrix<f64>> = h.iter().map(|hn| hn.transpose() * hn).collect();
        for (n, g) in gram.iter().enumerate() {
            let top = spectral::max_eig(&SymmetricMatrix::from_symmetric_unchecked(
                spectral::symmetrize(g.clone()),
            ))?;
            if top > 1.0 + SENSING_NORM_TOL {
                return Err(FrdeError::InvalidMatrix(format!(
                    "agent {}: lambda_max(H^T H) = {top} exceeds 1; normalize first",
                    n + 1
                )));
            }
        }
        Ok(SensingModel {
            h,
            gram,
            noise_bound,
            m,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.h.len()
    }

    /// Parameter dimension `M`.
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn h(&self, agent: usize) -> &DMatrix<f64> {
        &self.h[agent]
    }

    /// `H_nᵀ H_n`.
    pub fn gram(&self, agent: usize) -> &DMatrix<f64> {
        &self.gram[agent]
    }

    /// `Σ_{i ∈ subset} H_iᵀ H_i`.
    pub fn gram_sum(&self, subset: &[usize]) -> Result<SymmetricMatrix> {
        let mut s = DMatrix::zeros(self.m, self.m);
        for &i in subset {
            if i >= self.h.len() {
                return Err(FrdeError::InvalidVertex {
                    vertex: i,
                    n: self.h.len(),
                });
            }
            s += &self.gram[i];
        }
        Ok(SymmetricMatrix::from_symmetric_unchecked(
            spectral::symmetrize(s),
        ))
    }

    /// Vertically stacked `H_i` over `subset`.
    pub fn stacked(&self, subset: &[usize]) -> DMatrix<f64> {
        let rows: usize = subset.iter().map(|&i| self.h[i].nrows()).sum();
        let mut out = DMatrix::zeros(rows, self.m);
        let mut r = 0;
        for &i in subset {
            let hi = &self.h[i];
            out.rows_mut(r, hi.nrows()).copy_from(hi);
            r += hi.nrows();
        }
        out
    }
}

fn check_shapes(h: &[DMatrix<f64>]) -> Result<usize> {
    let m = h
        .first()
        .map(|x| x.ncols())
        .ok_or_else(|| FrdeError::InvalidArgument("no agents".into()))?;
    if m == 0 {
        return Err(FrdeError::InvalidArgument(
            "parameter dimension must be positive".into(),
        ));
    }
    for (n, hn) in h.iter().enumerate() {
        if hn.ncols() != m {
            return Err(FrdeError::InvalidMatrix(format!(
                "agent {} has {} columns, expected {m}",
                n + 1,
                hn.ncols()
            )));
        }
        if hn.iter().any(|x| !x.is_finite()) {
            return Err(FrdeError::InvalidMatrix(format!(
                "agent {} has a non-finite entry",
                n + 1
            )));
        }
    }
    Ok(m)
}

/// Rescales each `H_n` by `c_n = min(1, 1/√λ_max(H_nᵀH_n))`. The returned
/// model's noise bound is `max_n c_n·B`.
pub fn normalize_sensing(raw: Vec<DMatrix<f64>>, raw_noise_bound: f64) -> Result<SensingModel> {
    check_shapes(&raw)?;
    let mut scaled = Vec::with_capacity(raw.len());
    let mut bound: f64 = 0.0;
    for hn in raw {
        let g =
            SymmetricMatrix::from_symmetric_unchecked(spectral::symmetrize(hn.transpose() * &hn));
        let top = spectral::max_eig(&g)?;
        let c = if top > 1.0 { 1.0 / top.sqrt() } else { 1.0 };
        bound = bound.max(c * raw_noise_bound);
        scaled.push(if c == 1.0 { hn } else { hn * c });
    }
    SensingModel::new(scaled, bound)
}

/// Whether `Σ_{i ∈ subset} H_iᵀH_i` is invertible at relative tolerance [`RANK_TOL`].
pub fn is_globally_observable(model: &SensingModel, subset: &[usize]) -> Result<bool> {
    if subset.is_empty() {
        return Ok(false);
    }
    let (lo, hi) = spectral::extreme_eigs(&model.gram_sum(subset)?)?;
    Ok(hi > 0.0 && lo > RANK_TOL * hi)
}

/// Coordinate-selector sensing rows: each letter of `x`, `y`, `z` picks `e_1`, `e_2`, `e_3`.
pub fn selector_matrix(selector: &str, m: usize) -> Result<DMatrix<f64>> {
    let mut rows = Vec::new();
    for ch in selector.chars() {
        let k = match ch {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            _ => {
                return Err(FrdeError::Parse(format!(
                    "unknown sensing selector {selector:?}"
                )))
            }
        };
        if k >= m {
            return Err(FrdeError::Parse(format!(
                "selector {selector:?} needs dimension > {k}, have {m}"
            )));
        }
        rows.push(k);
    }
    Ok(DMatrix::from_fn(rows.len(), m, |r, c| {
        if rows[r] == c {
            1.0
        } else {
            0.0
        }
    }))
}

/// Seeded noise generator; draws are a pure function of `(seed, agent, round)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSource {
    pub fn draw(&self, agent: usize, round: usize, dim: usize, bound: f64) -> DVector<f64> {
        if dim == 0 || bound == 0.0 {
            return DVector::zeros(dim);
        }
        match self.mode {
            NoiseMode::Uniform => {
                let mut rng = stream_rng(self.seed, Stream::Noise, &[agent as u64, round as u64]);
                uniform_in_ball(&mut rng, dim, bound)
            }
            NoiseMode::WorstCase => DVector::from_element(dim, bound / (dim as f64).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub agent: usize,
    pub round: usize,
    pub value: DVector<f64>,
}

/// `y_n(t) = H_n θ + w_n(t)`.
pub fn measure(
    model: &SensingModel,
    theta: &DVector<f64>,
    agent: usize,
    round: usize,
    noise: &NoiseSource,
) -> Measurement {
    let hn = &model.h[agent];
    let w = noise.draw(agent, round, hn.nrows(), model.noise_bound);
    Measurement {
        agent,
        round,
        value: hn * theta + w,
    }
}

pub(crate) fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    if dim == 0 {
        return DVector::zeros(0);
    }
    loop {
        let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm > 1e-300 {
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / dim as f64);
            // Round-off in the scaling can land a hair outside the ball.
            let v = dir * (r / norm);
            let vn = v.norm();
            return if vn > radius { v * (radius / vn) } else { v };
        }
    }
}
