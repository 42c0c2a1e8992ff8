//! Minibatch training with Adam and global gradient-norm clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twin_core::{MetricReport, Scalar};

use super::dataset::{RunoffDataset, SampleSplit};
use super::lstm::LstmNetwork;
use super::predict::{clamp_nonnegative, model_version, RunoffMeta, RunoffModel, Scalers};
use crate::error::{ModelError, Result};
use crate::features::Matrix;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub clip_norm: f64,
}

impl TrainConfig {
    /// Full-size network.
    pub fn paper() -> Self {
        TrainConfig {
            hidden: super::lstm::PAPER_HIDDEN,
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            clip_norm: 1.0,
        }
    }

    /// Small network for tests and quick local runs.
    pub fn toy() -> Self {
        TrainConfig {
            hidden: 8,
            epochs: 40,
            batch_size: 16,
            learning_rate: 5e-3,
            seed: 0,
            clip_norm: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(ModelError::usage("batch size and hidden units must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(ModelError::usage("learning rate and clip norm must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error on the scaled training targets.
    pub train_loss: f64,
    /// MAE in original units after clamping.
    pub val_mae: f64,
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    /// Snapshot with the best validation MAE (the input net for 0 epochs).
    pub net: LstmNetwork<T>,
    pub curve: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
}

/// Scaled samples ready for the inner loop.
struct Prepared<T> {
    scaled: Matrix<T>,
    width: usize,
    window: usize,
    scaled_target: Vec<T>,
}

impl<T: Scalar> Prepared<T> {
    fn new(ds: &RunoffDataset<T>, scalers: &Scalers<T>) -> Self {
        Prepared {
            scaled: scalers.features.apply(&ds.inputs),
            width: ds.width(),
            window: ds.window,
            scaled_target: ds.target.iter().map(|&v| scalers.target.apply_value(0, v)).collect(),
        }
    }

    fn seq(&self, end: usize) -> &[T] {
        let start = end + 1 - self.window;
        &self.scaled.as_slice()[start * self.width..(end + 1) * self.width]
    }
}

fn predict_original<T: Scalar>(net: &LstmNetwork<T>, prep: &Prepared<T>, scalers: &Scalers<T>, end: usize) -> Result<T> {
    let raw = net.forward_flat(prep.seq(end))?.output;
    Ok(clamp_nonnegative(&[scalers.target.invert_value(0, raw)])[0])
}

fn mae_on<T: Scalar>(
    net: &LstmNetwork<T>,
    ds: &RunoffDataset<T>,
    prep: &Prepared<T>,
    scalers: &Scalers<T>,
    ends: &[usize],
) -> Result<f64> {
    let mut acc = 0.0;
    for &e in ends {
        acc += (predict_original(net, prep, scalers, e)? - ds.target_for(e)).abs().as_f64();
    }
    Ok(acc / ends.len().max(1) as f64)
}

/// Trains on the training partition of `split`, keeping the parameters
/// with the lowest validation MAE.
pub fn train<T: Scalar>(
    net: LstmNetwork<T>,
    ds: &RunoffDataset<T>,
    scalers: &Scalers<T>,
    split: &SampleSplit,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    cfg.validate()?;
    if net.input_width() != ds.width() {
        return Err(ModelError::usage(format!(
            "network takes {} inputs, dataset has {}",
            net.input_width(),
            ds.width()
        )));
    }
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(ModelError::usage("training and validation partitions must be non-empty"));
    }
    let prep = Prepared::new(ds, scalers);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = net;
    let mut best = (f64::INFINITY, net.clone(), None);
    let n_params = net.param_count();
    let (mut m, mut v) = (vec![T::zero(); n_params], vec![T::zero(); n_params]);
    let mut grad = vec![T::zero(); n_params];
    let mut step = 0i32;
    let mut order = split.train.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let (b1, b2, lr) = (T::lit(BETA1), T::lit(BETA2), T::lit(cfg.learning_rate));

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let scale = T::lit(2.0) / T::from_usize_lossy(batch.len());
            for &e in batch {
                let cache = net.forward_flat(prep.seq(e))?;
                let r = cache.output - prep.scaled_target[e + ds.horizon];
                loss_sum += (r * r).as_f64();
                net.backward_into(&cache, scale * r, &mut grad)?;
            }
            if !loss_sum.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            let norm = grad.iter().map(|g| (*g * *g).as_f64()).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let c = T::lit(cfg.clip_norm / norm);
                grad.iter_mut().for_each(|g| *g *= c);
            }
            step += 1;
            let bc1 = T::one() - b1.powi(step);
            let bc2 = T::one() - b2.powi(step);
            let params = net.params_mut();
            for k in 0..n_params {
                m[k] = b1 * m[k] + (T::one() - b1) * grad[k];
                v[k] = b2 * v[k] + (T::one() - b2) * grad[k] * grad[k];
                params[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + T::lit(ADAM_EPS));
            }
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_mae = mae_on(&net, ds, &prep, scalers, &split.validation)?;
        if !train_loss.is_finite() || !val_mae.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        tracing::debug!(epoch, train_loss, val_mae, "lstm epoch");
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_mae,
        });
        if val_mae < best.0 {
            best = (val_mae, net.clone(), Some(epoch));
        }
    }
    Ok(Trained {
        net: best.1,
        curve,
        best_epoch: best.2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunoffReport {
    pub curve: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub val_mae: f64,
    pub persistence_val_mae: f64,
    pub test: MetricReport<f64>,
    pub persistence_test_mae: f64,
}

/// Splits, fits scalers, initializes a seeded network, trains it and
/// scores the test partition against persistence.
pub fn fit_runoff<T: Scalar>(ds: &RunoffDataset<T>, cfg: &TrainConfig) -> Result<(RunoffModel<T>, RunoffReport)> {
    let split = ds.split()?;
    let scalers = Scalers::fit(ds, &split.train)?;
    let net = LstmNetwork::seeded(ds.width(), cfg.hidden, cfg.seed)?;
    let trained = train(net, ds, &scalers, &split, cfg)?;
    let prep = Prepared::new(ds, &scalers);
    let persistence = |ends: &[usize]| {
        ends.iter().map(|&e| (ds.persistence_for(e) - ds.target_for(e)).abs().as_f64()).sum::<f64>() / ends.len() as f64
    };
    let mut actual = Vec::with_capacity(split.test.len());
    let mut predicted = Vec::with_capacity(split.test.len());
    for &e in &split.test {
        actual.push(ds.target_for(e).as_f64());
        predicted.push(predict_original(&trained.net, &prep, &scalers, e)?.as_f64());
    }
    let report = RunoffReport {
        val_mae: mae_on(&trained.net, ds, &prep, &scalers, &split.validation)?,
        persistence_val_mae: persistence(&split.validation),
        test: MetricReport::evaluate(&actual, &predicted)?,
        persistence_test_mae: persistence(&split.test),
        curve: trained.curve,
        best_epoch: trained.best_epoch,
    };
    let scaler_version = scalers.version();
    let meta = RunoffMeta {
        station: ds.station.clone(),
        horizon: ds.horizon,
        window: ds.window,
        columns: ds.columns.clone(),
        model_version: model_version(&trained.net, &scaler_version),
        scaler_version,
    };
    Ok((
        RunoffModel {
            net: trained.net,
            scalers,
            meta,
        },
        report,
    ))
}
