//! Weighted least squares with an intercept, solved by modified
//! Gram-Schmidt QR. Columns that are (numerically) linear combinations of
//! earlier ones get coefficient 0, so constant or one-hot-collinear
//! features do not break the fit.

use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::tree::check_inputs;
use crate::error::Result;
use crate::features::Matrix;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub intercept: T,
    pub coef: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn predict_row(&self, row: &[T]) -> T {
        self.coef.iter().zip(row).fold(self.intercept, |acc, (c, x)| acc + *c * *x)
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn fit_linear<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<LinearModel<T>> {
    check_inputs(x, y, w)?;
    let n = x.rows();
    let p = x.cols() + 1;
    let sw: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
    // Column 0 is the intercept.
    let column = |j: usize| -> Vec<T> {
        (0..n)
            .map(|i| sw[i] * if j == 0 { T::one() } else { x.get(i, j - 1) })
            .collect()
    };

    let mut q: Vec<Vec<T>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    // r[k] holds row k of R over the kept columns.
    let mut r: Vec<Vec<T>> = Vec::new();
    for j in 0..p {
        let a = column(j);
        let a_norm = dot(&a, &a).sqrt();
        let mut v = a;
        let mut coeffs = vec![T::zero(); q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                coeffs[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * *qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if a_norm == T::zero() || norm <= T::lit(RANK_TOL) * a_norm {
            continue;
        }
        for (k, c) in coeffs.into_iter().enumerate() {
            r[k].push(c);
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        let mut row = vec![T::zero(); q.len()];
        row.push(norm);
        r.push(row);
        q.push(v);
        kept.push(j);
    }
    // r[k] has entries for kept columns 0..m; pad the earlier rows.
    let m = kept.len();
    let mut b: Vec<T> = y.iter().zip(&sw).map(|(y, s)| *y * *s).collect();
    let mut qtb = vec![T::zero(); m];
    for k in 0..m {
        qtb[k] = dot(&q[k], &b);
        for (bi, qi) in b.iter_mut().zip(&q[k]) {
            *bi -= qtb[k] * *qi;
        }
    }
    let mut sol = vec![T::zero(); m];
    for k in (0..m).rev() {
        let mut acc = qtb[k];
        for l in k + 1..m {
            acc -= r[k][l] * sol[l];
        }
        sol[k] = acc / r[k][k];
    }
    let mut full = vec![T::zero(); p];
    for (k, &j) in kept.iter().enumerate() {
        full[j] = sol[k];
    }
    Ok(LinearModel {
        intercept: full[0],
        coef: full[1..].to_vec(),
    })
}
