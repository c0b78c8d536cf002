//! Canonical correlation fusion of two user views.
//!
//! Both views are standardized per dimension, the within- and cross-view
//! correlation matrices are formed with a `1/(N−1)` factor, and the whitened
//! cross-correlation `R11^{-1/2} R12 R22^{-1/2}` is decomposed by SVD. The
//! leading `K` singular vector pairs, mapped back through the whitening
//! transforms, are the projections `A1` and `A2`; a user's fused vector is
//! the sum of both projected (standardized) views.
//!
//! Everything here runs in `f64`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::EmbeddingTable;
use crate::numerics::{inv_sqrt_sym, svd, Matrix};
use crate::tensor::{NamedTensor, TensorSet};
use crate::{Error, Result};

/// Default relative ridge: this fraction of the mean diagonal of each
/// within-view correlation matrix is added to its diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub mean1: Vec<f64>,
    pub std1: Vec<f64>,
    pub mean2: Vec<f64>,
    pub std2: Vec<f64>,
    /// `d1 × K`.
    pub a1: Matrix<f64>,
    /// `d2 × K`.
    pub a2: Matrix<f64>,
    /// Canonical correlations, descending, in `[0, 1]`.
    pub correlations: Vec<f64>,
    /// Relative ridge as requested.
    pub ridge: f64,
    /// Absolute values actually added to the diagonals of `R11` and `R22`.
    pub ridge1: f64,
    pub ridge2: f64,
}

/// Within- and cross-view correlation matrices of a fitted model's
/// standardized inputs, with the fitted ridges on the diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlations {
    pub r11: Matrix<f64>,
    pub r22: Matrix<f64>,
    pub r12: Matrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseStatus {
    Ok,
    /// One of the views is missing; the vector is all zeros.
    MissingView,
}

fn column_stats(x: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = x.shape();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = libm::sqrt(s / (n - 1) as f64);
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn standardize_rows(x: &Matrix<f64>, mean: &[f64], std: &[f64]) -> Matrix<f64> {
    let mut out = x.clone();
    for i in 0..x.rows() {
        for ((v, m), s) in out.row_mut(i).iter_mut().zip(mean).zip(std) {
            *v = (*v - m) / s;
        }
    }
    out
}

fn cross(a: &Matrix<f64>, b: &Matrix<f64>, n: usize) -> Result<Matrix<f64>> {
    Ok(a.transpose().matmul(b)?.scale(1.0 / (n - 1) as f64))
}

fn mean_diag(m: &Matrix<f64>) -> f64 {
    (0..m.rows()).map(|i| m[(i, i)]).sum::<f64>() / m.rows() as f64
}

fn add_diag(m: &mut Matrix<f64>, v: f64) {
    for i in 0..m.rows() {
        m[(i, i)] += v;
    }
}

impl CcaModel {
    /// Fits on row-aligned views: row `i` of `x1` and of `x2` belong to the
    /// same user.
    pub fn fit(x1: &Matrix<f64>, x2: &Matrix<f64>, k: usize, ridge: f64) -> Result<Self> {
        let n = x1.rows();
        if x2.rows() != n {
            return Err(Error::Dimension {
                op: "cca fit",
                left: x1.shape(),
                right: x2.shape(),
            });
        }
        if n < 3 {
            return Err(Error::contract(format!("CCA needs at least 3 users, got {n}")));
        }
        let bound = x1.cols().min(x2.cols()).min(n - 1);
        if k == 0 || k > bound {
            return Err(Error::contract(format!(
                "K = {k} must lie in 1..={bound} (min of view dims {} and {} and N−1 = {})",
                x1.cols(),
                x2.cols(),
                n - 1
            )));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::contract("ridge must be finite and non-negative"));
        }
        if !x1.is_finite() || !x2.is_finite() {
            return Err(Error::NonFinite("cca input"));
        }
        let (mean1, std1) = column_stats(x1);
        let (mean2, std2) = column_stats(x2);
        let s1 = standardize_rows(x1, &mean1, &std1);
        let s2 = standardize_rows(x2, &mean2, &std2);
        let mut r11 = cross(&s1, &s1, n)?;
        let mut r22 = cross(&s2, &s2, n)?;
        let r12 = cross(&s1, &s2, n)?;
        let ridge1 = ridge * mean_diag(&r11);
        let ridge2 = ridge * mean_diag(&r22);
        add_diag(&mut r11, ridge1);
        add_diag(&mut r22, ridge2);
        let w1 = inv_sqrt_sym(&r11, 0.0).map_err(|e| singular("stylometric", e))?;
        let w2 = inv_sqrt_sym(&r22, 0.0).map_err(|e| singular("personality", e))?;
        let t = w1.matmul(&r12)?.matmul(&w2)?;
        let dec = svd(&t)?;
        let a1 = w1.matmul(&dec.u.leading_columns(k))?;
        let a2 = w2.matmul(&dec.v.leading_columns(k))?;
        let correlations = dec.sigma[..k].iter().map(|s| s.clamp(0.0, 1.0)).collect();
        Ok(Self {
            mean1,
            std1,
            mean2,
            std2,
            a1,
            a2,
            correlations,
            ridge,
            ridge1,
            ridge2,
        })
    }

    pub fn dim(&self) -> usize {
        self.correlations.len()
    }

    pub fn view_dims(&self) -> (usize, usize) {
        (self.mean1.len(), self.mean2.len())
    }

    /// Standardized inputs' correlation matrices, including the ridges used
    /// by the fit.
    pub fn correlations_of(&self, x1: &Matrix<f64>, x2: &Matrix<f64>) -> Result<Correlations> {
        let n = x1.rows();
        let s1 = standardize_rows(x1, &self.mean1, &self.std1);
        let s2 = standardize_rows(x2, &self.mean2, &self.std2);
        let mut r11 = cross(&s1, &s1, n)?;
        let mut r22 = cross(&s2, &s2, n)?;
        add_diag(&mut r11, self.ridge1);
        add_diag(&mut r22, self.ridge2);
        Ok(Correlations {
            r11,
            r22,
            r12: cross(&s1, &s2, n)?,
        })
    }

    /// Canonical variates `(W, Z)` of row-aligned inputs, `N × K` each.
    pub fn project(&self, x1: &Matrix<f64>, x2: &Matrix<f64>) -> Result<(Matrix<f64>, Matrix<f64>)> {
        let w = standardize_rows(x1, &self.mean1, &self.std1).matmul(&self.a1)?;
        let z = standardize_rows(x2, &self.mean2, &self.std2).matmul(&self.a2)?;
        Ok((w, z))
    }

    /// Fused `K`-dim vector of one user.
    pub fn fuse(&self, d: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let (d1, d2) = self.view_dims();
        if d.len() != d1 || p.len() != d2 {
            return Err(Error::Dimension {
                op: "cca fuse",
                left: (d1, d2),
                right: (d.len(), p.len()),
            });
        }
        let mut out = vec![0.0; self.dim()];
        for (view, (mean, std, a)) in [
            (d, (&self.mean1, &self.std1, &self.a1)),
            (p, (&self.mean2, &self.std2, &self.a2)),
        ] {
            for (i, &x) in view.iter().enumerate() {
                let s = (x - mean[i]) / std[i];
                for (o, &w) in out.iter_mut().zip(a.row(i)) {
                    *o += s * w;
                }
            }
        }
        Ok(out)
    }

    /// Like [`fuse`](Self::fuse) but for possibly missing views.
    pub fn fuse_or_zero(&self, d: Option<&[f32]>, p: Option<&[f32]>) -> Result<(Vec<f64>, FuseStatus)> {
        match (d, p) {
            (Some(d), Some(p)) => {
                let d: Vec<f64> = d.iter().map(|&v| v as f64).collect();
                let p: Vec<f64> = p.iter().map(|&v| v as f64).collect();
                Ok((self.fuse(&d, &p)?, FuseStatus::Ok))
            }
            _ => {
                log::warn!("user missing from one view gets a zero fused vector");
                Ok((vec![0.0; self.dim()], FuseStatus::MissingView))
            }
        }
    }

    /// Stored at `f32` precision.
    pub fn to_tensors(&self, prefix: &str) -> TensorSet {
        let v = |name: &str, xs: &[f64]| NamedTensor::vector(format!("{prefix}{name}"), xs.iter().map(|&x| x as f32).collect());
        let m = |name: &str, x: &Matrix<f64>| NamedTensor::from_matrix(format!("{prefix}{name}"), &x.map(|v| v as f32));
        [
            v("mean1", &self.mean1),
            v("std1", &self.std1),
            v("mean2", &self.mean2),
            v("std2", &self.std2),
            m("A1", &self.a1),
            m("A2", &self.a2),
            v("lambda", &self.correlations),
            v("ridge", &[self.ridge, self.ridge1, self.ridge2]),
        ]
        .into_iter()
        .collect()
    }

    pub fn from_tensors(set: &TensorSet, prefix: &str) -> Result<Self> {
        let v = |name: &str| -> Result<Vec<f64>> {
            Ok(set.get(&format!("{prefix}{name}"))?.data.iter().map(|&x| x as f64).collect())
        };
        let m = |name: &str| -> Result<Matrix<f64>> { Ok(set.matrix(&format!("{prefix}{name}"))?.map(|x| x as f64)) };
        let ridge = v("ridge")?;
        if ridge.len() != 3 {
            return Err(Error::contract("CCA ridge tensor must hold 3 values"));
        }
        let model = Self {
            mean1: v("mean1")?,
            std1: v("std1")?,
            mean2: v("mean2")?,
            std2: v("std2")?,
            a1: m("A1")?,
            a2: m("A2")?,
            correlations: v("lambda")?,
            ridge: ridge[0],
            ridge1: ridge[1],
            ridge2: ridge[2],
        };
        let k = model.dim();
        if model.a1.shape() != (model.mean1.len(), k)
            || model.a2.shape() != (model.mean2.len(), k)
            || model.std1.len() != model.mean1.len()
            || model.std2.len() != model.mean2.len()
        {
            return Err(Error::contract("CCA tensors have inconsistent shapes"));
        }
        Ok(model)
    }
}

fn singular(view: &str, e: Error) -> Error {
    match e {
        Error::Singular(msg) => Error::Singular(format!("{view} correlation matrix: {msg}")),
        other => other,
    }
}

fn table_matrix(table: &EmbeddingTable, ids: &[String]) -> Result<Matrix<f64>> {
    let mut data = Vec::with_capacity(ids.len() * table.dim());
    for id in ids {
        let row = table.get(id).ok_or_else(|| Error::Lookup {
            kind: "user",
            id: id.clone(),
        })?;
        data.extend(row.iter().map(|&v| v as f64));
    }
    Matrix::from_vec(ids.len(), table.dim(), data)
}

/// Fits on the users present in both tables, skipping users whose
/// personality vector is all zeros. Returns the model and the ids used.
pub fn fit_tables(
    stylometric: &EmbeddingTable,
    personality: &EmbeddingTable,
    k: usize,
    ridge: f64,
) -> Result<(CcaModel, Vec<String>)> {
    let ids: Vec<String> = stylometric
        .ids()
        .iter()
        .filter(|id| personality.get(id).is_some_and(|p| p.iter().any(|&v| v != 0.0)))
        .cloned()
        .collect();
    let skipped = stylometric.len() - ids.len();
    if skipped > 0 {
        log::warn!("{skipped} users lack a usable personality vector and are left out of the CCA fit");
    }
    let x1 = table_matrix(stylometric, &ids)?;
    let x2 = table_matrix(personality, &ids)?;
    Ok((CcaModel::fit(&x1, &x2, k, ridge)?, ids))
}

/// Fused vectors for every user present in both tables, in stylometric
/// table order.
pub fn fuse_table(model: &CcaModel, stylometric: &EmbeddingTable, personality: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(model.dim());
    for (id, d) in stylometric.iter() {
        if let Some(p) = personality.get(id) {
            let (u, _) = model.fuse_or_zero(Some(d), Some(p))?;
            let u: Vec<f32> = u.iter().map(|&v| v as f32).collect();
            out.push(id.to_string(), &u)?;
        }
    }
    Ok(out)
}

/// Concatenation `[d ⊕ p]` for every user present in both tables.
pub fn concat_table(stylometric: &EmbeddingTable, personality: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(stylometric.dim() + personality.dim());
    let mut buf = Vec::with_capacity(out.dim());
    for (id, d) in stylometric.iter() {
        if let Some(p) = personality.get(id) {
            buf.clear();
            buf.extend_from_slice(d);
            buf.extend_from_slice(p);
            out.push(id.to_string(), &buf)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_views_are_perfectly_correlated() {
        let x = random(50, 4, 1);
        let m = CcaModel::fit(&x, &x, 4, 0.0).unwrap();
        for &c in &m.correlations {
            assert!((1.0 - 1e-6..=1.0).contains(&c), "{c}");
        }
    }

    #[test]
    fn rank_bound_is_named() {
        let x = random(4, 5, 2);
        match CcaModel::fit(&x, &x, 4, 0.0) {
            Err(Error::Contract(msg)) => assert!(msg.contains("1..=3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collinear_view_without_ridge_is_singular() {
        let mut x = random(20, 3, 3);
        for i in 0..20 {
            x[(i, 2)] = x[(i, 0)] + x[(i, 1)];
        }
        assert!(matches!(CcaModel::fit(&x, &x, 2, 0.0), Err(Error::Singular(_))));
        assert!(CcaModel::fit(&x, &x, 2, DEFAULT_RIDGE).is_ok());
    }

    #[test]
    fn means_fuse_to_zero() {
        let x1 = random(30, 3, 4);
        let x2 = random(30, 2, 5);
        let m = CcaModel::fit(&x1, &x2, 2, 0.0).unwrap();
        let u = m.fuse(&m.mean1.clone(), &m.mean2.clone()).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        assert!(matches!(m.fuse(&[0.0; 2], &[0.0; 2]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn tables_skip_zero_personality_and_round_trip() {
        let mut s = EmbeddingTable::new(2);
        let mut p = EmbeddingTable::new(2);
        let x = random(8, 4, 6);
        for i in 0..8 {
            let r = x.row(i);
            s.push(format!("u{i}"), &[r[0] as f32, r[1] as f32]).unwrap();
            if i == 3 {
                p.push(format!("u{i}"), &[0.0, 0.0]).unwrap();
            } else if i != 5 {
                p.push(format!("u{i}"), &[r[2] as f32, r[3] as f32]).unwrap();
            }
        }
        let (m, ids) = fit_tables(&s, &p, 2, DEFAULT_RIDGE).unwrap();
        assert_eq!(ids.len(), 6);
        assert!(!ids.contains(&"u3".to_string()) && !ids.contains(&"u5".to_string()));
        let fused = fuse_table(&m, &s, &p).unwrap();
        assert_eq!(fused.len(), 7);
        let back = CcaModel::from_tensors(&m.to_tensors("cca/"), "cca/").unwrap();
        assert_eq!(back.view_dims(), m.view_dims());
        assert_eq!(back.correlations.len(), 2);
    }
}
