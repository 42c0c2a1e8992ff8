//! The `LGLS` weights file: a run-off model's metadata, scalers and
//! network parameters. Layout in `docs/model-format.md`.

use std::path::Path;

use twin_core::Scalar;

use super::lstm::LstmNetwork;
use super::predict::{RunoffMeta, RunoffModel, Scalers};
use crate::binfmt::{read, write_atomic, Dec, Enc};
use crate::error::Result;
use crate::features::RobustScaler;

pub const MAGIC: &[u8; 4] = b"LGLS";
pub const VERSION: u16 = 1;

pub fn encode_runoff<T: Scalar>(m: &RunoffModel<T>) -> Vec<u8> {
    let mut e = Enc::new::<T>(MAGIC, VERSION);
    e.str(&serde_json::to_string(&m.meta).expect("meta serializes"));
    for s in [&m.scalers.features, &m.scalers.target] {
        e.scalars(&s.center);
        e.scalars(&s.scale);
    }
    e.u32(m.net.input_width());
    e.u32(m.net.hidden());
    e.scalars(m.net.params());
    e.finish()
}

pub fn decode_runoff<T: Scalar>(data: &[u8]) -> Result<RunoffModel<T>> {
    let (mut d, _) = Dec::open::<T>(data, MAGIC, VERSION, "run-off model")?;
    let meta: RunoffMeta = serde_json::from_str(&d.str()?).map_err(|e| d.error(format!("metadata: {e}")))?;
    let scaler = |d: &mut Dec| -> Result<RobustScaler<T>> {
        let center = d.scalars()?;
        let scale = d.scalars()?;
        if center.len() != scale.len() {
            return Err(d.error("scaler center and scale differ in length"));
        }
        Ok(RobustScaler { center, scale })
    };
    let features = scaler(&mut d)?;
    let target = scaler(&mut d)?;
    let input = d.u32()?;
    let hidden = d.u32()?;
    let params = d.scalars()?;
    d.done()?;
    if input != meta.columns.len() || features.width() != input || target.width() != 1 {
        return Err(d.error("network, scaler and column widths disagree"));
    }
    let net = LstmNetwork::from_params(input, hidden, params).map_err(|e| d.error(e.to_string()))?;
    Ok(RunoffModel {
        net,
        scalers: Scalers { features, target },
        meta,
    })
}

pub fn save_runoff<T: Scalar>(path: &Path, m: &RunoffModel<T>) -> Result<()> {
    write_atomic(path, &encode_runoff(m))
}

pub fn load_runoff<T: Scalar>(path: &Path) -> Result<RunoffModel<T>> {
    decode_runoff(&read(path)?)
}
