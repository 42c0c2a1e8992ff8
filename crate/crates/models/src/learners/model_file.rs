//! The `LGBT` model file for fitted global forecasters; layout in
//! `docs/model-format.md`.

use std::path::Path;

use twin_core::Scalar;

use super::forecast::{GlobalForecaster, Recipe, Regressor};
use super::gbrt::GbrtModel;
use super::linear::LinearModel;
use super::tree::{Node, RegressionTree};
use crate::binfmt::{read, write_atomic, Dec, Enc};
use crate::error::{ModelError, Result};

pub const MAGIC: &[u8; 4] = b"LGBT";
pub const VERSION: u16 = 1;

const KIND_GBRT: u8 = 0;
const KIND_LINEAR: u8 = 1;
const KIND_PERSISTENCE: u8 = 2;
const NODE_LEAF: u8 = 0;
const NODE_SPLIT: u8 = 1;

pub fn encode_forecaster<T: Scalar>(f: &GlobalForecaster<T>) -> Vec<u8> {
    let mut e = Enc::new::<T>(MAGIC, VERSION);
    e.str(&serde_json::to_string(&f.recipe).expect("recipe serializes"));
    e.u32(f.models.len());
    for m in &f.models {
        match m {
            Regressor::Gbrt(g) => {
                e.u8(KIND_GBRT);
                e.scalar(g.base);
                e.scalar(g.learning_rate);
                e.u32(g.n_features);
                e.scalars(&g.train_loss);
                e.u32(g.trees.len());
                for t in &g.trees {
                    e.u32(t.nodes.len());
                    for n in &t.nodes {
                        match *n {
                            Node::Leaf { value } => {
                                e.u8(NODE_LEAF);
                                e.scalar(value);
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                e.u8(NODE_SPLIT);
                                e.u32(feature);
                                e.scalar(threshold);
                                e.u32(left);
                                e.u32(right);
                            }
                        }
                    }
                }
            }
            Regressor::Linear(l) => {
                e.u8(KIND_LINEAR);
                e.scalar(l.intercept);
                e.scalars(&l.coef);
            }
            Regressor::Persistence => e.u8(KIND_PERSISTENCE),
        }
    }
    e.finish()
}

pub fn decode_forecaster<T: Scalar>(data: &[u8]) -> Result<GlobalForecaster<T>> {
    let (mut d, _) = Dec::open::<T>(data, MAGIC, VERSION, "forecaster")?;
    let recipe: Recipe = serde_json::from_str(&d.str()?).map_err(|e| d.error(format!("recipe: {e}")))?;
    let width = recipe.layout.width();
    let n_models = d.u32()?;
    if n_models != recipe.mode.horizons().len() {
        return Err(d.error(format!("{n_models} models for {} horizons", recipe.mode.horizons().len())));
    }
    let mut models = Vec::with_capacity(n_models);
    for _ in 0..n_models {
        let m = match d.u8()? {
            KIND_GBRT => {
                let base = d.scalar()?;
                let learning_rate = d.scalar()?;
                let n_features = d.u32()?;
                let train_loss = d.scalars()?;
                let n_trees = d.u32()?;
                let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
                for _ in 0..n_trees {
                    let n_nodes = d.u32()?;
                    let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
                    for _ in 0..n_nodes {
                        nodes.push(match d.u8()? {
                            NODE_LEAF => Node::Leaf { value: d.scalar()? },
                            NODE_SPLIT => Node::Split {
                                feature: d.u32()?,
                                threshold: d.scalar()?,
                                left: d.u32()?,
                                right: d.u32()?,
                            },
                            t => return Err(d.error(format!("unknown node tag {t}"))),
                        });
                    }
                    trees.push(RegressionTree { nodes });
                }
                let g = GbrtModel {
                    base,
                    learning_rate,
                    n_features,
                    trees,
                    train_loss,
                };
                if n_features != width {
                    return Err(d.error(format!("model has {n_features} features, layout {width}")));
                }
                g.validate()?;
                Regressor::Gbrt(g)
            }
            KIND_LINEAR => {
                let intercept = d.scalar()?;
                let coef = d.scalars()?;
                if coef.len() != width {
                    return Err(d.error(format!("{} coefficients for {width} features", coef.len())));
                }
                Regressor::Linear(LinearModel { intercept, coef })
            }
            KIND_PERSISTENCE => Regressor::Persistence,
            k => return Err(d.error(format!("unknown model kind {k}"))),
        };
        models.push(m);
    }
    d.done()?;
    Ok(GlobalForecaster { recipe, models })
}

pub fn save_forecaster<T: Scalar>(path: &Path, f: &GlobalForecaster<T>) -> Result<()> {
    write_atomic(path, &encode_forecaster(f))
}

pub fn load_forecaster<T: Scalar>(path: &Path) -> Result<GlobalForecaster<T>> {
    decode_forecaster(&read(path)?).map_err(|e| match e {
        ModelError::Format { what, detail } => ModelError::Format {
            what: format!("{what} {}", path.display()),
            detail,
        },
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{AlignedSeries, LagSpec};
    use crate::learners::{fit_global, GbrtParams, LearnerSpec};
    use chrono::{TimeZone, Utc};
    use twin_core::time::Span;
    use twin_core::SeriesKey;

    fn fitted<T: Scalar>(learner: LearnerSpec) -> GlobalForecaster<T> {
        let v: Vec<T> = (0..60).map(|i| T::lit(((i * 7) % 11) as f64 * 0.37)).collect();
        let s = |st: &str| {
            AlignedSeries::complete(
                SeriesKey::new("src", st, "temperature", "degC"),
                Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap(),
                Span::hours(1),
                &v,
            )
        };
        fit_global(&[s("a"), s("b")], &[], &LagSpec::recursive(3), &learner).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for l in [LearnerSpec::Gbrt(GbrtParams::new(15, 0.2, 3, 1)), LearnerSpec::Linear, LearnerSpec::Persistence] {
            let f = fitted::<f64>(l.clone());
            let bytes = encode_forecaster(&f);
            assert_eq!(decode_forecaster::<f64>(&bytes).unwrap(), f);
            let g = fitted::<f32>(l);
            assert_eq!(decode_forecaster::<f32>(&encode_forecaster(&g)).unwrap(), g);
        }
    }

    #[test]
    fn corruption_and_width_are_detected() {
        let bytes = encode_forecaster(&fitted::<f64>(LearnerSpec::Gbrt(GbrtParams::new(3, 0.2, 2, 1))));
        for i in [0, 5, 6, 20, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x10;
            assert!(decode_forecaster::<f64>(&bad).is_err(), "byte {i}");
        }
        assert!(decode_forecaster::<f32>(&bytes).is_err());
        assert!(decode_forecaster::<f64>(&bytes[..10]).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m/model.lgbt");
        let f = fitted::<f64>(LearnerSpec::Linear);
        save_forecaster(&p, &f).unwrap();
        assert_eq!(load_forecaster::<f64>(&p).unwrap(), f);
    }
}
