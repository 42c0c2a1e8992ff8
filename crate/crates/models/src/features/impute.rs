use twin_core::Scalar;

use super::aligned::AlignedSeries;
use crate::error::{ModelError, Result};

/// Fills interior gaps by linear interpolation between the nearest present
/// neighbours and edge gaps by holding the nearest present value. Present
/// values are copied untouched.
pub fn impute_linear<T: Scalar>(series: &AlignedSeries<T>) -> Result<AlignedSeries<T>> {
    let present: Vec<usize> = (0..series.len()).filter(|&i| series.values[i].is_some()).collect();
    if present.len() < 2 {
        return Err(ModelError::usage(format!(
            "{} has {} present values; interpolation needs 2",
            series.key.id(),
            present.len()
        )));
    }
    let mut out = series.clone();
    let first = present[0];
    let last = *present.last().expect("non-empty");
    let v = |i: usize| series.values[i].expect("present");
    for i in 0..first {
        out.values[i] = Some(v(first));
        out.imputed[i] = true;
    }
    for i in last + 1..series.len() {
        out.values[i] = Some(v(last));
        out.imputed[i] = true;
    }
    for w in present.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b == a + 1 {
            continue;
        }
        let (ya, yb) = (v(a), v(b));
        let span = T::from_usize_lossy(b - a);
        for i in a + 1..b {
            let frac = T::from_usize_lossy(i - a) / span;
            out.values[i] = Some(ya + (yb - ya) * frac);
            out.imputed[i] = true;
        }
    }
    Ok(out)
}
