use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::matrix::Matrix;
use crate::fingerprint::Fnv;

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `q * (n - 1)`.
pub fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-column `(x - median) / IQR`, with scale 1 where the IQR is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler<T> {
    pub center: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> RobustScaler<T> {
    /// Fits on the given columns; an empty column gets center 0, scale 1.
    pub fn fit_columns(columns: &[Vec<T>]) -> Self {
        let mut center = Vec::with_capacity(columns.len());
        let mut scale = Vec::with_capacity(columns.len());
        for col in columns {
            if col.is_empty() {
                center.push(T::zero());
                scale.push(T::one());
                continue;
            }
            let mut s = col.clone();
            s.sort_by(|a, b| a.partial_cmp(b).expect("finite inputs"));
            center.push(quantile(&s, 0.5));
            let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
            scale.push(if iqr > T::zero() { iqr } else { T::one() });
        }
        RobustScaler { center, scale }
    }

    pub fn fit(m: &Matrix<T>) -> Self {
        let cols: Vec<Vec<T>> = (0..m.cols()).map(|j| m.column(j)).collect();
        Self::fit_columns(&cols)
    }

    pub fn width(&self) -> usize {
        self.center.len()
    }

    pub fn apply_row(&self, row: &mut [T]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.center[j]) / self.scale[j];
        }
    }

    pub fn invert_row(&self, row: &mut [T]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * self.scale[j] + self.center[j];
        }
    }

    pub fn apply_value(&self, col: usize, v: T) -> T {
        (v - self.center[col]) / self.scale[col]
    }

    pub fn invert_value(&self, col: usize, v: T) -> T {
        v * self.scale[col] + self.center[col]
    }

    pub fn apply(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        out
    }

    pub fn invert(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.invert_row(out.row_mut(i));
        }
        out
    }

    /// Stable identity of the fitted parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        for (c, s) in self.center.iter().zip(&self.scale) {
            h.f64(c.as_f64()).f64(s.as_f64());
        }
        h.finish()
    }
}
