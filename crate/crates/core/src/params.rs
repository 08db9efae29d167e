//! Step-size selection and the spectral conditions on
//! `J_{β,α} = β(L ⊗ I_M) + α·blockdiag(H_nᵀH_n)`.
//!
//! Two selection procedures are provided. [`procedure1`] normalizes an
//! auxiliary pair `(α̂, β̂)` by `λ_max(J_{β̂,α̂})` and needs the whole network.
//! [`procedure2`] only needs `λ_2(L)`, `λ_max(L)`, `λ_min(𝒢)` and `N`, or the
//! `N`-only fallback bounds `λ_2(L) ≥ 4/N²` and `λ_max(L) ≤ N`.

use nalgebra::DMatrix;

use crate::error::{FrdeError, Result};
use crate::graph::{self, Graph};
use crate::sensing::SensingModel;
use crate::spectral::{self, SymmetricMatrix};

/// Absolute slack on eigenvalue comparisons during certification.
pub const CERT_TOL: f64 = 1e-9;

/// Default multiplicative margin over the `κ₁` lower bound.
pub const KAPPA1_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Procedure1,
    Procedure2,
    Manual,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Procedure1 => "procedure1",
            Provenance::Procedure2 => "procedure2",
            Provenance::Manual => "manual",
        })
    }
}

/// Consensus step `β`, innovation step `α` and threshold decay `r₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrdeParams {
    pub alpha: f64,
    pub beta: f64,
    pub r1: f64,
    pub provenance: Provenance,
}

impl FrdeParams {
    pub fn manual(alpha: f64, beta: f64, r1: f64) -> Result<Self> {
        let p = FrdeParams {
            alpha,
            beta,
            r1,
            provenance: Provenance::Manual,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(FrdeError::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(FrdeError::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.r1 > 0.0 && self.r1 <= 1.0) {
            return Err(FrdeError::InvalidArgument(format!(
                "r1 must lie in (0, 1], got {}",
                self.r1
            )));
        }
        Ok(())
    }

    /// `κ = β/α`.
    pub fn kappa(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// `J` restricted to a vertex subset, with block rows in subset order.
#[derive(Debug, Clone, PartialEq)]
pub struct JMatrix {
    pub matrix: SymmetricMatrix,
    pub subset: Vec<usize>,
}

impl JMatrix {
    pub fn extreme_eigs(&self) -> Result<(f64, f64)> {
        spectral::extreme_eigs(&self.matrix)
    }
}

pub fn build_j(
    g: &Graph,
    model: &SensingModel,
    subset: &[usize],
    beta: f64,
    alpha: f64,
) -> Result<JMatrix> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(FrdeError::InvalidArgument(format!(
            "step sizes must be finite and non-negative (alpha {alpha}, beta {beta})"
        )));
    }
    if model.n_agents() != g.n_vertices() {
        return Err(FrdeError::InvalidArgument(format!(
            "graph has {} vertices but sensing model has {} agents",
            g.n_vertices(),
            model.n_agents()
        )));
    }
    let lx = graph::induced_laplacian(g, subset)?;
    let m = model.dim();
    let k = subset.len();
    let mut j = DMatrix::zeros(k * m, k * m);
    for a in 0..k {
        for b in 0..k {
            let l = lx.get(a, b);
            if l != 0.0 {
                for d in 0..m {
                    j[(a * m + d, b * m + d)] = beta * l;
                }
            }
        }
        let gram = model.gram(subset[a]);
        for r in 0..m {
            for c in 0..m {
                // Average the pair so the block is exactly symmetric.
                j[(a * m + r, a * m + c)] += alpha * 0.5 * (gram[(r, c)] + gram[(c, r)]);
            }
        }
    }
    Ok(JMatrix {
        matrix: SymmetricMatrix::from_symmetric_unchecked(j),
        subset: subset.to_vec(),
    })
}

/// `𝒢 = (1/n_total) Σ_{n ∈ subset} H_nᵀH_n`; `n_total` is the full network size
/// even when `subset` is a proper subset.
#[derive(Debug, Clone, PartialEq)]
pub struct GramAverage(pub SymmetricMatrix);

impl GramAverage {
    pub fn new(model: &SensingModel, subset: &[usize], n_total: usize) -> Result<Self> {
        if n_total == 0 {
            return Err(FrdeError::InvalidArgument(
                "n_total must be positive".into(),
            ));
        }
        let s = model.gram_sum(subset)?.into_inner() / n_total as f64;
        Ok(GramAverage(SymmetricMatrix::from_symmetric_unchecked(s)))
    }

    pub fn min_eig(&self) -> Result<f64> {
        spectral::min_eig(&self.0)
    }
}

pub fn procedure1(
    g: &Graph,
    model: &SensingModel,
    alpha_hat: f64,
    beta_hat: f64,
) -> Result<FrdeParams> {
    if !(alpha_hat > 0.0 && beta_hat > 0.0 && alpha_hat.is_finite() && beta_hat.is_finite()) {
        return Err(FrdeError::InvalidArgument(format!(
            "auxiliary parameters must be positive (alpha_hat {alpha_hat}, beta_hat {beta_hat})"
        )));
    }
    let all = g.vertices();
    let top = spectral::max_eig(&build_j(g, model, &all, beta_hat, alpha_hat)?.matrix)?;
    let alpha = alpha_hat / top;
    let beta = beta_hat / top;
    let r1 = spectral::min_eig(&build_j(g, model, &all, beta, alpha)?.matrix)?;
    if r1.is_nan() || r1 <= 0.0 {
        return Err(FrdeError::DegenerateR1(r1));
    }
    Ok(FrdeParams {
        alpha,
        beta,
        r1: r1.min(1.0),
        provenance: Provenance::Procedure1,
    })
}

/// Spectral summaries consumed by [`procedure2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Procedure2Inputs {
    pub lambda2: f64,
    pub lambda_max_l: f64,
    /// `λ_min(𝒢)`.
    pub gmin: f64,
    pub n: usize,
    pub kappa1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianBounds {
    /// Use the actual `λ_2(L)` and `λ_max(L)`.
    Exact,
    /// Use `λ_2(L) ≥ 4/N²` and `λ_max(L) ≤ N`.
    Fallback,
}

impl Procedure2Inputs {
    pub fn from_network(
        g: &Graph,
        model: &SensingModel,
        bounds: LaplacianBounds,
        kappa1: Option<f64>,
    ) -> Result<Self> {
        let n = g.n_vertices();
        let gmin = GramAverage::new(model, &g.vertices(), n)?.min_eig()?;
        let (lambda2, lambda_max_l) = match bounds {
            LaplacianBounds::Exact => {
                let ev = spectral::eig_sym(&graph::laplacian(g), false)?.eigenvalues;
                (ev.get(1).copied().unwrap_or(0.0), ev[n - 1])
            }
            LaplacianBounds::Fallback => (4.0 / (n * n) as f64, n as f64),
        };
        Ok(Procedure2Inputs {
            lambda2,
            lambda_max_l,
            gmin,
            n,
            kappa1,
        })
    }

    /// Strict lower bound on `κ₁`: `(λ_min(𝒢) + 2√(4 − λ_min(𝒢))) / λ_2(L)`.
    pub fn kappa1_bound(&self) -> f64 {
        (self.gmin + 2.0 * (4.0 - self.gmin).sqrt()) / self.lambda2
    }
}

pub fn procedure2(inputs: &Procedure2Inputs) -> Result<FrdeParams> {
    let Procedure2Inputs {
        lambda2,
        lambda_max_l,
        gmin,
        n,
        kappa1,
    } = *inputs;
    if !(lambda2 > 0.0 && lambda2.is_finite()) {
        return Err(FrdeError::InvalidArgument(format!(
            "lambda2(L) must be positive, got {lambda2}"
        )));
    }
    if !(lambda_max_l > 0.0 && lambda_max_l.is_finite()) {
        return Err(FrdeError::InvalidArgument(format!(
            "lambda_max(L) must be positive, got {lambda_max_l}"
        )));
    }
    if !(gmin > 0.0 && gmin <= 1.0 + CERT_TOL) {
        return Err(FrdeError::InvalidArgument(format!(
            "lambda_min(G) must lie in (0, 1], got {gmin}"
        )));
    }
    if n == 0 {
        return Err(FrdeError::InvalidArgument("n must be positive".into()));
    }
    let bound = inputs.kappa1_bound();
    let kappa1 = match kappa1 {
        Some(k) if k > bound => k,
        Some(k) => return Err(FrdeError::Kappa1TooSmall { kappa1: k, bound }),
        None => KAPPA1_MARGIN * bound,
    };
    let alpha = 1.0 / (kappa1 * lambda_max_l + n as f64);
    let beta = alpha * kappa1;
    let gap = gmin - lambda2 * kappa1;
    let r1 = alpha * (gmin - 4.0 * gmin / (4.0 * gmin + gap * gap).sqrt());
    if r1.is_nan() || r1 <= 0.0 {
        return Err(FrdeError::DegenerateR1(r1));
    }
    Ok(FrdeParams {
        alpha,
        beta,
        r1: r1.min(1.0),
        provenance: Provenance::Procedure2,
    })
}

/// Outcome of checking `λ_max(J) ≤ 1` and `0 < r₁ ≤ λ_min(J)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub r1: f64,
    /// `1 − λ_max(J)`; non-negative when the step-size condition holds.
    pub max_margin: f64,
    /// `λ_min(J) − r₁`; non-negative when the decay condition holds.
    pub r1_margin: f64,
}

impl Certificate {
    pub fn max_ok(&self) -> bool {
        self.lambda_max <= 1.0 + CERT_TOL
    }

    pub fn r1_ok(&self) -> bool {
        self.r1 > 0.0 && self.r1 <= self.lambda_min + CERT_TOL
    }

    pub fn passes(&self) -> bool {
        self.max_ok() && self.r1_ok()
    }
}

pub fn certify(params: &FrdeParams, g: &Graph, model: &SensingModel) -> Result<Certificate> {
    let j = build_j(g, model, &g.vertices(), params.beta, params.alpha)?;
    let (lambda_min, lambda_max) = j.extreme_eigs()?;
    Ok(Certificate {
        lambda_min,
        lambda_max,
        r1: params.r1,
        max_margin: 1.0 - lambda_max,
        r1_margin: lambda_min - params.r1,
    })
}
