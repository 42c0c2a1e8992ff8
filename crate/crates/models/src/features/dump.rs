use std::io::Write;

use twin_core::time::rfc3339;
use twin_core::Scalar;

use super::lag::DesignMatrix;

/// Tab-separated export: a `#` header naming the columns, then one line per
/// row with `time`, `series`, `weight`, the features and the targets.
pub fn write_matrix<T: Scalar>(m: &DesignMatrix<T>, series_ids: &[String], out: &mut dyn Write) -> std::io::Result<()> {
    let mut header = vec!["time".to_string(), "series".into(), "weight".into()];
    header.extend(m.feature_names.iter().cloned());
    header.extend(m.horizons.iter().map(|h| format!("target_h{h}")));
    writeln!(out, "# {}", header.join("\t"))?;
    for i in 0..m.rows() {
        let sid = series_ids.get(m.series[i]).cloned().unwrap_or_else(|| m.series[i].to_string());
        write!(out, "{}\t{}\t{}", rfc3339(m.times[i]), sid, m.weights[i])?;
        for v in m.x.row(i).iter().chain(m.y.row(i)) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
