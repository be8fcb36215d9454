//! RMSE and boxplot summaries of error samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(mean(e²))` over the present errors; `None` entries are skipped.
/// Errors when no error is present.
pub fn rmse<I>(errors: I) -> Result<f64>
where
    I: IntoIterator<Item = Option<f64>>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for e in errors.into_iter().flatten() {
        sum += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("RMSE of an empty group"));
    }
    Ok((sum / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles, 1.5·IQR whiskers and outliers.
pub fn boxplot_stats(data: &[f64]) -> Result<BoxplotStats> {
    if data.is_empty() {
        return Err(Error::invalid("boxplot of an empty group"));
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("boxplot data contains NaN"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
    let whisker_lo = inside.clone().fold(f64::INFINITY, f64::min);
    let whisker_hi = inside.fold(f64::NEG_INFINITY, f64::max);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| !(lo_fence..=hi_fence).contains(v))
        .collect();
    Ok(BoxplotStats {
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rmse_examples() {
        assert_relative_eq!(rmse([Some(0.3), Some(0.4)]).unwrap(), 0.125f64.sqrt(), epsilon = 1e-15);
        assert_eq!(rmse([Some(0.0), Some(0.0)]).unwrap(), 0.0);
        assert_eq!(rmse([Some(0.7)]).unwrap(), 0.7);
        assert_eq!(rmse([Some(0.7), None]).unwrap(), 0.7);
        assert!(rmse(Vec::<Option<f64>>::new()).is_err());
        assert!(rmse([None]).is_err());
    }

    #[test]
    fn five_point_quartiles() {
        let b = boxplot_stats(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((b.median, b.q1, b.q3), (3.0, 2.0, 4.0));
        assert_eq!((b.whisker_lo, b.whisker_hi), (1.0, 5.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn constant_data_is_degenerate() {
        let b = boxplot_stats(&[2.5; 7]).unwrap();
        assert_eq!((b.q1, b.median, b.q3, b.whisker_lo, b.whisker_hi), (2.5, 2.5, 2.5, 2.5, 2.5));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn far_point_is_an_outlier() {
        let mut d: Vec<f64> = (1..=9).map(f64::from).collect();
        d.push(100.0);
        let b = boxplot_stats(&d).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_hi, 9.0);
        assert!(boxplot_stats(&[]).is_err());
    }

    #[test]
    fn interpolated_quantile() {
        assert_relative_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }
}
