use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats;

/// Per-index aggregate regressed against the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeStatistic {
    MedianByIndex,
    MeanByIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeTest {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// Two-sided p-value for a zero slope.
    pub p_value: f64,
    /// Number of distinct indices regressed.
    pub n: usize,
}

/// Residual variance below which the fit is treated as exact.
const EXACT_FIT_VARIANCE: f64 = 1e-12;

/// Ordinary least squares of `y` on `x` with a t-test on the slope
/// (`n − 2` degrees of freedom). An exact fit gives p = 0 for a non-zero
/// slope and p = 1 otherwise.
pub fn linear_slope_test(points: &[(f64, f64)]) -> Result<SlopeTest> {
    let n = points.len();
    if n < 3 {
        return Err(Error::NotEnoughData(format!(
            "slope test needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::NotEnoughData("all indices identical".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let resid_var = sse / (nf - 2.0);
    let std_error = (resid_var / sxx).sqrt();

    let p_value = if resid_var < EXACT_FIT_VARIANCE {
        if slope.abs() > 1e-12 {
            0.0
        } else {
            1.0
        }
    } else {
        let t = slope / std_error;
        let dist = StudentsT::new(0.0, 1.0, nf - 2.0).expect("df >= 1");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(SlopeTest {
        slope,
        intercept,
        std_error,
        p_value,
        n,
    })
}

/// Aggregates `(index, value)` observations per distinct index with the
/// chosen statistic, then tests the slope of the aggregates against index.
pub fn slope_test(series: &[(f64, f64)], statistic: SlopeStatistic) -> Result<SlopeTest> {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for &(index, value) in series {
        if !index.is_finite() || !value.is_finite() {
            return Err(Error::InvalidArgument("non-finite slope test input".into()));
        }
        // total order key for the f64 index
        let key = if index < 0.0 { !index.to_bits() } else { index.to_bits() | (1 << 63) };
        groups.entry(key).or_insert((index, Vec::new())).1.push(value);
    }
    if groups.len() < 3 {
        return Err(Error::NotEnoughData(format!(
            "slope test needs at least 3 distinct indices, got {}",
            groups.len()
        )));
    }
    let points: Vec<(f64, f64)> = groups
        .values()
        .map(|(index, values)| {
            let agg = match statistic {
                SlopeStatistic::MedianByIndex => stats::median(values),
                SlopeStatistic::MeanByIndex => stats::mean(values),
            };
            (*index, agg.expect("group is non-empty"))
        })
        .collect();
    linear_slope_test(&points)
}
