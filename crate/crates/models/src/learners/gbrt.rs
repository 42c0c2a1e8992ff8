//! Gradient-boosted regression trees for squared error.
//!
//! Each stage fits a tree to the current residuals and adds it shrunk by
//! the learning rate. There is no row subsampling, so a fit is a pure
//! function of its inputs.

use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::tree::{check_inputs, fit_presorted, Presorted, RegressionTree, TreeParams};
use crate::error::{ModelError, Result};
use crate::features::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    #[serde(flatten)]
    pub tree: TreeParams,
}

impl Default for GbrtParams {
    fn default() -> Self {
        GbrtParams {
            n_trees: 100,
            learning_rate: 0.1,
            tree: TreeParams::default(),
        }
    }
}

impl GbrtParams {
    pub fn new(n_trees: usize, learning_rate: f64, max_depth: usize, min_samples_leaf: usize) -> Self {
        GbrtParams {
            n_trees,
            learning_rate,
            tree: TreeParams {
                max_depth,
                min_samples_leaf,
                ..TreeParams::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ModelError::usage(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.tree.min_samples_leaf == 0 {
            return Err(ModelError::usage("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel<T> {
    pub base: T,
    pub learning_rate: T,
    pub n_features: usize,
    pub trees: Vec<RegressionTree<T>>,
    /// Weighted training MSE after the base value and after each stage.
    pub train_loss: Vec<T>,
}

impl<T: Scalar> GbrtModel<T> {
    pub fn predict_row(&self, row: &[T]) -> T {
        let mut acc = T::zero();
        for t in &self.trees {
            acc += t.predict(row);
        }
        self.base + self.learning_rate * acc
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base.is_finite() || !self.learning_rate.is_finite() {
            return Err(ModelError::format("gbrt", "non-finite base or learning rate"));
        }
        for t in &self.trees {
            t.validate(self.n_features)?;
        }
        Ok(())
    }
}

fn weighted_mse<T: Scalar>(y: &[T], f: &[T], w: &[T], sw: T) -> T {
    let mut acc = T::zero();
    for i in 0..y.len() {
        let r = y[i] - f[i];
        acc += w[i] * r * r;
    }
    acc / sw
}

pub fn fit_gbrt<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T], params: &GbrtParams) -> Result<GbrtModel<T>> {
    params.validate()?;
    check_inputs(x, y, w)?;
    let sw = w.iter().fold(T::zero(), |a, &b| a + b);
    let base = y.iter().zip(w).fold(T::zero(), |a, (&y, &w)| a + y * w) / sw;
    let lr = T::lit(params.learning_rate);
    let pre = Presorted::new(x, w);
    let mut f = vec![base; y.len()];
    let mut resid = vec![T::zero(); y.len()];
    let mut train_loss = vec![weighted_mse(y, &f, w, sw)];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..y.len() {
            resid[i] = y[i] - f[i];
        }
        let tree = fit_presorted(&resid, w, &pre, &params.tree);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += lr * tree.predict(x.row(i));
        }
        trees.push(tree);
        train_loss.push(weighted_mse(y, &f, w, sw));
    }
    Ok(GbrtModel {
        base,
        learning_rate: lr,
        n_features: x.cols(),
        trees,
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> (Matrix<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = x.iter().map(|v| 3.0 * v + 1.0).collect();
        (Matrix::from_vec(n, 1, x), y)
    }

    #[test]
    fn zero_trees_predicts_weighted_mean() {
        let (x, y) = line(4);
        let m = fit_gbrt(&x, &y, &[1.0, 1.0, 1.0, 5.0], &GbrtParams::new(0, 0.1, 3, 1)).unwrap();
        let mean = (1.0 + 4.0 + 7.0 + 50.0) / 8.0;
        assert_eq!(m.predict_row(&[0.0]), mean);
    }

    #[test]
    fn training_loss_never_increases() {
        let (x, y) = line(50);
        let m = fit_gbrt(&x, &y, &[1.0; 50], &GbrtParams::new(60, 0.2, 2, 1)).unwrap();
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(*m.train_loss.last().unwrap() < 0.01 * m.train_loss[0]);
    }

    #[test]
    fn constant_target_is_exact() {
        let (x, _) = line(10);
        let m = fit_gbrt(&x, &[4.0; 10], &[1.0; 10], &GbrtParams::default()).unwrap();
        assert!(m.predict(&x).iter().all(|&p| (p - 4.0).abs() < 1e-12));
    }

    #[test]
    fn deterministic() {
        let (x, y) = line(30);
        let p = GbrtParams::new(20, 0.1, 3, 2);
        assert_eq!(fit_gbrt(&x, &y, &[1.0; 30], &p).unwrap(), fit_gbrt(&x, &y, &[1.0; 30], &p).unwrap());
    }

    #[test]
    fn bad_learning_rate() {
        let (x, y) = line(3);
        assert!(fit_gbrt(&x, &y, &[1.0; 3], &GbrtParams::new(1, 0.0, 1, 1)).is_err());
        assert!(fit_gbrt(&x, &y, &[1.0; 3], &GbrtParams::new(1, 1.5, 1, 1)).is_err());
    }

    #[test]
    fn f32_fit() {
        let x = Matrix::from_vec(4, 1, vec![0.0f32, 1.0, 2.0, 3.0]);
        let m = fit_gbrt(&x, &[0.0, 0.0, 1.0, 1.0], &[1.0; 4], &GbrtParams::new(50, 0.5, 1, 1)).unwrap();
        assert!((m.predict_row(&[3.0]) - 1.0).abs() < 1e-4);
    }
}
