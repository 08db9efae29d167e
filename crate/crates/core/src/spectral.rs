//! Dense symmetric eigenvalue problems.
//!
//! The solver reduces the matrix to tridiagonal form with Householder
//! reflections and then runs the implicit QL iteration with Wilkinson-style
//! shifts. Both stages are O(d³) with small constants, which keeps the
//! 450×450 system matrices of the 150-agent scenarios well under a second.

use nalgebra::{DMatrix, DVector};

use crate::error::{FrdeError, Result};

/// Asymmetry accepted at construction, relative to `max(1, max |m_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default relative tolerance for rank decisions (null spaces, observability).
pub const RANK_TOL: f64 = 1e-8;

/// A dense real matrix that is symmetric to within [`SYMMETRY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(FrdeError::InvalidMatrix(format!(
                "not square: {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(FrdeError::InvalidMatrix("non-finite entry".into()));
        }
        let scale = m.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(FrdeError::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j}): |m_ij - m_ji| = {gap:e}"
                    )));
                }
            }
        }
        Ok(SymmetricMatrix(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymmetricMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Wraps `m` without checks. Callers assemble `m` symmetrically by construction.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymmetricMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Eigenvalues in ascending order, with eigenvectors as matching columns when requested.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl EigenResult {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn eig_sym(m: &SymmetricMatrix, want_vectors: bool) -> Result<EigenResult> {
    let n = m.dim();
    if m.0.iter().any(|x| !x.is_finite()) {
        return Err(FrdeError::InvalidMatrix("non-finite entry".into()));
    }
    if n == 0 {
        return Ok(EigenResult {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(|| DMatrix::zeros(0, 0)),
        });
    }

    // Row-major working copy.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = m.0[(i, j)];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e, n);
    tridiagonal_ql(&mut v, &mut d, &mut e, n, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = want_vectors.then(|| DMatrix::from_fn(n, n, |i, c| v[i * n + order[c]]));
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest and largest eigenvalue.
pub fn extreme_eigs(m: &SymmetricMatrix) -> Result<(f64, f64)> {
    let r = eig_sym(m, false)?;
    Ok((r.min(), r.max()))
}

pub fn min_eig(m: &SymmetricMatrix) -> Result<f64> {
    extreme_eigs(m).map(|(lo, _)| lo)
}

pub fn max_eig(m: &SymmetricMatrix) -> Result<f64> {
    extreme_eigs(m).map(|(_, hi)| hi)
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
///
/// Candidates are the eigenvectors of `mᵀm` taken in ascending eigenvalue
/// order; a candidate `v` is kept while `‖m v‖ ≤ tol·‖m‖`. An all-zero `m`
/// (including one with no rows) has the whole space as its null space.
pub fn null_space_basis(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(FrdeError::InvalidMatrix("non-finite entry".into()));
    }
    let cols = m.ncols();
    let gram = SymmetricMatrix::from_symmetric_unchecked(symmetrize(m.transpose() * m));
    let eig = eig_sym(&gram, true)?;
    let norm = eig.max().max(0.0).sqrt();
    let vecs = eig.eigenvectors.expect("vectors requested");
    if norm == 0.0 {
        return Ok(DMatrix::identity(cols, cols));
    }
    let mut keep = 0;
    for k in 0..cols {
        let residual = (m * vecs.column(k)).norm();
        if residual <= tol * norm {
            keep = k + 1;
        } else {
            break;
        }
    }
    Ok(vecs.columns(0, keep).into_owned())
}

/// Averages `m` with its transpose so round-off in products cannot break symmetry.
pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

// Householder reduction to tridiagonal form. On exit `d` holds the diagonal,
// `e[1..]` the sub-diagonal and `v` the accumulated orthogonal transform.
fn tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + (n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e); rotations are applied to `v` only
// when eigenvectors are wanted.
fn tridiagonal_ql(
    v: &mut [f64],
    d: &mut [f64],
    e: &mut [f64],
    n: usize,
    want_vectors: bool,
) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let max_iter = 60 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(FrdeError::InvalidMatrix(
                        "QL iteration failed to converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let hk = v[k * n + i + 1];
                            v[k * n + i + 1] = s * v[k * n + i] + c * hk;
                            v[k * n + i] = c * v[k * n + i] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
