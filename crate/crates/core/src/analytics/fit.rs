//! Least-squares fits on log-transformed data.
//!
//! Power laws are fitted to log2-bucketed counts. For a density
//! `p(x) ~ x^-alpha`, the number of observations in `[2^k, 2^(k+1))`
//! scales as `2^(k(1 - alpha))`, so the fitted bucket slope is
//! `-(alpha - 1)` and the implied density exponent is `1 - slope`.

use std::fmt;

use thiserror::Error;

use super::histogram::BucketedHistogram;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Smallest and largest x actually used.
    pub fit_range: (i64, i64),
}

impl FitResult {
    /// Density exponent implied by a bucket-count slope.
    pub fn implied_alpha(&self) -> f64 {
        1.0 - self.slope
    }

    /// Growth factor per twelve steps of a fit on natural-log counts, i.e.
    /// the yearly multiplier of a monthly series.
    pub fn yearly_multiplier(&self) -> f64 {
        (12.0 * self.slope).exp()
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slope={:.6} intercept={:.6} r2={:.6} n={} range={}..{}",
            self.slope,
            self.intercept,
            self.r_squared,
            self.n_points,
            self.fit_range.0,
            self.fit_range.1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("need at least 2 usable points, found {0}")]
    TooFewPoints(usize),
    #[error("all points share the same x value")]
    DegenerateX,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(points: &[(f64, f64)]) -> Result<(f64, f64, f64), FitError> {
    let n = points.len();
    if n < 2 {
        return Err(FitError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

fn fit_points(points: &[(f64, f64)]) -> Result<FitResult, FitError> {
    let (slope, intercept, r_squared) = ols(points)?;
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
        fit_range: (lo.floor() as i64, hi.ceil() as i64),
    })
}

/// Fits `log2(count)` against bucket index over the occupied buckets in
/// `[min_bucket, max_bucket]`. Empty buckets are skipped.
pub fn fit_power_law(
    h: &BucketedHistogram,
    min_bucket: i32,
    max_bucket: i32,
) -> Result<FitResult, FitError> {
    let points: Vec<(f64, f64)> = h
        .iter()
        .filter(|(k, c)| (min_bucket..=max_bucket).contains(k) && *c > 0)
        .map(|(k, c)| (f64::from(k), (c as f64).log2()))
        .collect();
    fit_points(&points)
}

/// Fits `ln(count)` against month index; months with a zero count are
/// skipped. See [`FitResult::yearly_multiplier`].
pub fn fit_exponential_growth(series: &[(i64, u64)]) -> Result<FitResult, FitError> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|&(t, c)| (t as f64, (c as f64).ln()))
        .collect();
    fit_points(&points)
}

/// Fits `log2(y)` against `log2(x)` for positive pairs, e.g. term
/// frequency against rank.
pub fn fit_log_log(pairs: &[(f64, f64)]) -> Result<FitResult, FitError> {
    let points: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log2(), y.log2()))
        .collect();
    let mut fit = fit_points(&points)?;
    let xs = pairs.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|p| p.0);
    let lo = xs.clone().fold(f64::INFINITY, f64::min);
    let hi = xs.fold(f64::NEG_INFINITY, f64::max);
    fit.fit_range = (lo.floor() as i64, hi.ceil() as i64);
    Ok(fit)
}

/// Centered moving average. Near the ends the window shrinks to the
/// values available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(values.len() - 1);
            let slice = &values[lo..=hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_buckets_fit_exactly() {
        let h = BucketedHistogram::from_buckets([(0, 64), (1, 32), (2, 16), (3, 8)]);
        let fit = fit_power_law(&h, 0, 10).unwrap();
        assert_eq!(fit.slope, -1.0);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.n_points, 4);
        assert_eq!(fit.fit_range, (0, 3));
        assert_eq!(fit.implied_alpha(), 2.0);
    }

    #[test]
    fn range_restricts_points() {
        let h = BucketedHistogram::from_buckets([(0, 1000), (1, 32), (2, 16), (3, 8), (9, 1)]);
        let fit = fit_power_law(&h, 1, 3).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let h = BucketedHistogram::from_buckets([(4, 10)]);
        assert_eq!(fit_power_law(&h, 0, 10), Err(FitError::TooFewPoints(1)));
        assert_eq!(fit_exponential_growth(&[(0, 5), (1, 0)]), Err(FitError::TooFewPoints(1)));
    }

    #[test]
    fn doubling_each_year() {
        let series: Vec<(i64, u64)> = (0..36).map(|m| (m, (1000.0 * 2f64.powf(m as f64 / 12.0)).round() as u64)).collect();
        let fit = fit_exponential_growth(&series).unwrap();
        assert!((fit.yearly_multiplier() - 2.0).abs() < 1e-3);
        let exact: Vec<(i64, u64)> = (0..5).map(|y| (12 * y, 1u64 << y)).collect();
        let fit = fit_exponential_growth(&exact).unwrap();
        assert!((fit.yearly_multiplier() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_series() {
        let fit = fit_exponential_growth(&[(0, 7), (1, 7), (2, 7)]).unwrap();
        assert_eq!(fit.yearly_multiplier(), 1.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn smoothing() {
        assert_eq!(moving_average(&[3.0, 6.0, 9.0, 12.0], 3), [4.5, 6.0, 9.0, 10.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), [1.0, 2.0]);
        assert!(moving_average(&[], 3).is_empty());
    }
}
