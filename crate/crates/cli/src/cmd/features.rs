use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use twin_models::features::{build_lag_matrix, impute_linear, write_matrix};
use twin_models::pipeline::Regime;

use crate::data::Stores;
use crate::error::CliResult;
use crate::Ctx;

/// Writes the pooled lag matrix for the target's peers. Gaps are filled
/// linearly first.
pub fn dump(ctx: &Ctx, target: &str, regime: Regime, out: Option<PathBuf>) -> CliResult<()> {
    let stores = Stores::open(&ctx.root)?;
    let key = stores.resolve_target(target)?;
    let peers = stores.peers(&key);
    let series = stores
        .aligned(&peers, regime.step())?
        .iter()
        .map(impute_linear)
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = series.iter().map(|s| s.key.id()).collect();
    let matrix = build_lag_matrix(&series, &regime.lag_spec(), &[])?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    write_matrix(&matrix, &ids, &mut sink)?;
    sink.flush()?;
    Ok(())
}
