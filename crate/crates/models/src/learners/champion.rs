use std::cmp::Ordering;

use twin_core::{MetricReport, Scalar};

use super::backtest::BacktestReport;
use crate::error::{ModelError, Result};

/// Orders candidates by MAE, then CVRMSE (absent sorts last), then id.
pub fn compare_candidates<T: Scalar>(a: (&str, &MetricReport<T>), b: (&str, &MetricReport<T>)) -> Ordering {
    let cv = |m: &MetricReport<T>| m.cvrmse.unwrap_or_else(T::infinity);
    a.1.mae
        .partial_cmp(&b.1.mae)
        .unwrap_or(Ordering::Equal)
        .then(cv(a.1).partial_cmp(&cv(b.1)).unwrap_or(Ordering::Equal))
        .then(a.0.cmp(b.0))
}

pub fn select_champion<T: Scalar>(candidates: &[(&str, MetricReport<T>)]) -> Result<String> {
    candidates
        .iter()
        .min_by(|a, b| compare_candidates((a.0, &a.1), (b.0, &b.1)))
        .map(|c| c.0.to_string())
        .ok_or_else(|| ModelError::usage("no candidates to choose from"))
}

/// Picks the champion at `primary_horizon` and sets its `champion` flag.
pub fn mark_champion<T: Scalar>(reports: &mut [BacktestReport<T>], primary_horizon: usize) -> Result<String> {
    let scored: Vec<(&str, MetricReport<T>)> = reports
        .iter()
        .map(|r| {
            r.at(primary_horizon)
                .map(|m| (r.candidate.as_str(), *m))
                .ok_or_else(|| ModelError::usage(format!("{} has no horizon {primary_horizon}", r.candidate)))
        })
        .collect::<Result<_>>()?;
    let id = select_champion(&scored)?;
    for r in reports.iter_mut() {
        r.champion = r.candidate == id;
    }
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(mae: f64, cvrmse: Option<f64>) -> MetricReport<f64> {
        MetricReport { mae, cvrmse, n: 1 }
    }

    #[test]
    fn lower_mae_wins() {
        assert_eq!(select_champion(&[("A", m(0.617, Some(3.0))), ("B", m(0.704, Some(2.0)))]).unwrap(), "A");
    }

    #[test]
    fn cvrmse_then_id_break_ties() {
        assert_eq!(select_champion(&[("A", m(1.0, Some(5.0))), ("B", m(1.0, Some(4.0)))]).unwrap(), "B");
        assert_eq!(select_champion(&[("A", m(1.0, None)), ("B", m(1.0, Some(4.0)))]).unwrap(), "B");
        assert_eq!(select_champion(&[("b", m(0.0, None)), ("a", m(0.0, None))]).unwrap(), "a");
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(select_champion(&[("only", m(9.0, None))]).unwrap(), "only");
        assert!(select_champion::<f64>(&[]).is_err());
    }
}
