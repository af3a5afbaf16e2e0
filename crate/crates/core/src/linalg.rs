//! Small dense linear-algebra helpers shared by the estimators.
//!
//! Representation vectors follow the column-stacked layout `q = vec(Q)`, i.e.
//! block `k` of a length-`K*p` vector holds column `k` of the `p x K` matrix.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Chol = Cholesky<f64, Dyn>;

pub fn factor(m: &DMatrix<f64>, what: &str) -> Result<Chol> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// `log det(M)` for a symmetric positive-definite matrix.
pub fn log_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    Ok(log_det_factored(&factor(m, what)?))
}

pub fn log_det_factored(chol: &Chol) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// `vᵀ M⁻¹ v` from a Cholesky factor of `M` (one forward substitution).
pub fn inv_quad_form(chol: &Chol, v: &DVector<f64>) -> f64 {
    let l = chol.l_dirty();
    let n = v.len();
    let mut y = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = v[i];
        for (j, yj) in y.iter().enumerate().take(i) {
            s -= l[(i, j)] * yj;
        }
        y[i] = s / l[(i, i)];
        acc += y[i] * y[i];
    }
    acc
}

/// `c ⊗ x`: the representation design vector for membership `c` and features `x`.
pub fn kron_vec(c: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let p = x.len();
    let mut w = DVector::zeros(c.len() * p);
    for (k, ck) in c.iter().enumerate() {
        w.rows_mut(k * p, p).axpy(*ck, x, 0.0);
    }
    w
}

/// `target += (c cᵀ) ⊗ s`, the summed representation Gram contribution of a
/// history with raw second moment `s` under a fixed membership `c`.
pub fn add_kron_outer(target: &mut DMatrix<f64>, c: &DVector<f64>, s: &DMatrix<f64>) {
    let p = s.nrows();
    for k in 0..c.len() {
        for l in 0..c.len() {
            let w = c[k] * c[l];
            if w == 0.0 {
                continue;
            }
            let mut block = target.view_mut((k * p, l * p), (p, p));
            block += s * w;
        }
    }
}

/// Reshape a column-stacked representation vector into its `p x K` matrix.
pub fn unstack(q: &DVector<f64>, p: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(p, q.len() / p, q.as_slice())
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
