use twin_core::Scalar;

use super::lag::DesignMatrix;
use crate::error::{ModelError, Result};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: DesignMatrix<T>,
    pub val: DesignMatrix<T>,
    pub test: DesignMatrix<T>,
}

/// Partition sizes for `n` units: validation and test get the floor of
/// their share, training takes the remainder.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::usage(format!("split fractions {fractions:?} must be >= 0 and sum to 1")));
    }
    // The small slack keeps e.g. 0.7 * 30 from flooring to 20.
    let share = |f: f64| (f * n as f64 + 1e-9).floor() as usize;
    let val = share(fractions[1]);
    let test = share(fractions[2]);
    let train = n - val - test;
    if train == 0 || val == 0 || test == 0 {
        return Err(ModelError::usage(format!(
            "split of {n} units gives an empty partition ({train}/{val}/{test})"
        )));
    }
    Ok([train, val, test])
}

/// Contiguous chronological blocks. The allocation counts distinct row
/// timestamps, so rows that share a timestamp (pooled series) always land
/// in the same partition; with one series this is a row count.
pub fn chrono_split<T: Scalar>(m: &DesignMatrix<T>, fractions: [f64; 3]) -> Result<Split<T>> {
    if m.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ModelError::usage("matrix rows are not sorted by timestamp"));
    }
    let mut distinct = m.times.clone();
    distinct.dedup();
    let [train, val, _] = split_sizes(distinct.len(), fractions)?;
    let val_start = distinct[train];
    let test_start = distinct[train + val];
    let pick = |lo: Option<chrono::DateTime<chrono::Utc>>, hi: Option<chrono::DateTime<chrono::Utc>>| -> Vec<usize> {
        (0..m.rows())
            .filter(|&i| lo.is_none_or(|l| m.times[i] >= l) && hi.is_none_or(|h| m.times[i] < h))
            .collect()
    };
    Ok(Split {
        train: m.select(&pick(None, Some(val_start))),
        val: m.select(&pick(Some(val_start), Some(test_start))),
        test: m.select(&pick(Some(test_start), None)),
    })
}
