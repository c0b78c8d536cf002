//! Symmetric eigendecomposition and SVD by Jacobi rotations.
//!
//! Both solvers are plain double-precision loops; they are meant for the
//! few-hundred-dimension matrices of the correlation analysis, not for large
//! problems.

use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const SINGULAR_FLOOR: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with eigenvectors as matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix<f64>,
}

/// Thin singular value decomposition `m = u · diag(sigma) · vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: Matrix<f64>,
    pub sigma: Vec<f64>,
    pub v: Matrix<f64>,
}

/// Flips every column so its largest-magnitude entry (first on ties) is
/// positive, applying the same flip to the paired matrix when given.
fn fix_signs(primary: &mut Matrix<f64>, mut paired: Option<&mut Matrix<f64>>) {
    for j in 0..primary.cols() {
        let mut best = 0.0f64;
        let mut best_val = 0.0f64;
        for i in 0..primary.rows() {
            let v = primary[(i, j)];
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < 0.0 {
            for i in 0..primary.rows() {
                primary[(i, j)] = -primary[(i, j)];
            }
            if let Some(p) = paired.as_deref_mut() {
                for i in 0..p.rows() {
                    p[(i, j)] = -p[(i, j)];
                }
            }
        }
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: equal values keep their original column order
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn permute_columns(m: &Matrix<f64>, order: &[usize]) -> Matrix<f64> {
    let mut out = Matrix::zeros(m.rows(), order.len());
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..m.rows() {
            out[(i, new_j)] = m[(i, old_j)];
        }
    }
    out
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(s: &Matrix<f64>) -> Result<SymEig> {
    if s.rows() != s.cols() {
        return Err(Error::Dimension {
            op: "sym_eig",
            left: s.shape(),
            right: (s.cols(), s.rows()),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("sym_eig input"));
    }
    if !s.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::contract("sym_eig requires a symmetric matrix"));
    }
    let n = s.rows();
    let mut a = s.clone();
    // symmetrize exactly so rotations stay consistent
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let total: f64 = a.as_slice().iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let sn = t * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                // A <- Jᵀ A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let order = descending_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = permute_columns(&v, &order);
    fix_signs(&mut vectors, None);
    Ok(SymEig { values, vectors })
}

/// `(s + ridge·I)^{-1/2}` for a symmetric positive semidefinite `s`.
pub fn inv_sqrt_sym(s: &Matrix<f64>, ridge: f64) -> Result<Matrix<f64>> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::contract("ridge must be a finite non-negative number"));
    }
    let eig = sym_eig(s)?;
    let n = s.rows();
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let shifted = lambda + ridge;
        if shifted <= SINGULAR_FLOOR {
            return Err(Error::Singular(format!(
                "eigenvalue {lambda:e} + ridge {ridge:e} is not above {SINGULAR_FLOOR:e}"
            )));
        }
        let f = 1.0 / libm::sqrt(shifted);
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    let mut out = scaled.matmul(&eig.vectors.transpose())?;
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok(out)
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Orthogonalizes the columns of `m` directly, which avoids squaring the
/// condition number the way an eigendecomposition of `mᵀm` would.
pub fn svd(m: &Matrix<f64>) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        let mut u = t.v;
        let mut v = t.u;
        // re-apply the sign convention to the new left factor
        fix_signs(&mut u, Some(&mut v));
        return Ok(Svd {
            u,
            sigma: t.sigma,
            v,
        });
    }
    let (rows, n) = m.shape();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    let x = a[(k, i)];
                    let y = a[(k, j)];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..rows {
                    let x = a[(k, i)];
                    let y = a[(k, j)];
                    a[(k, i)] = c * x - s * y;
                    a[(k, j)] = s * x + c * y;
                }
                for k in 0..n {
                    let x = v[(k, i)];
                    let y = v[(k, j)];
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| libm::sqrt((0..rows).map(|k| a[(k, j)] * a[(k, j)]).sum::<f64>()))
        .collect();
    let order = descending_order(&norms);
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut v = permute_columns(&v, &order);
    let a = permute_columns(&a, &order);

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let tol = sigma_max * 1e-13 * (rows.max(n) as f64);
    let mut u = Matrix::zeros(rows, n);
    let mut rank = 0;
    for j in 0..n {
        if sigma[j] > tol && sigma[j] > 0.0 {
            for k in 0..rows {
                u[(k, j)] = a[(k, j)] / sigma[j];
            }
            rank += 1;
        }
    }
    complete_orthonormal(&mut u, rank);
    fix_signs(&mut u, Some(&mut v));
    Ok(Svd { u, sigma, v })
}

/// Fills columns `filled..` of `u` with unit vectors orthogonal to the
/// preceding columns (modified Gram-Schmidt over the standard basis).
fn complete_orthonormal(u: &mut Matrix<f64>, filled: usize) {
    let rows = u.rows();
    let mut col = filled;
    let mut basis = 0;
    while col < u.cols() && basis < rows {
        let mut cand: Vec<f64> = (0..rows).map(|k| if k == basis { 1.0 } else { 0.0 }).collect();
        basis += 1;
        for _ in 0..2 {
            for j in 0..col {
                let proj: f64 = (0..rows).map(|k| u[(k, j)] * cand[k]).sum();
                for k in 0..rows {
                    cand[k] -= proj * u[(k, j)];
                }
            }
        }
        let norm = libm::sqrt(cand.iter().map(|x| x * x).sum::<f64>());
        if norm < 1e-8 {
            continue;
        }
        for k in 0..rows {
            u[(k, col)] = cand[k] / norm;
        }
        col += 1;
    }
}
