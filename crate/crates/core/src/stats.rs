//! Small-sample statistics for Monte-Carlo summaries.

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// 95% confidence half-width of the mean.
pub fn half_width(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    Z95 * (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// `log2(1 + sum(num) / sum(den))` with a delta-method half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRate {
    pub ratio: f64,
    pub rate: f64,
    pub half_width: f64,
}

pub fn ratio_rate(num: &[f64], den: &[f64]) -> Result<RatioRate> {
    if num.len() != den.len() || num.is_empty() {
        return Err(Error::dims(format!("{} denominators", num.len()), format!("{}", den.len())));
    }
    let (mn, md) = (mean(num), mean(den));
    if !(md > 0.0) {
        return Err(Error::Numeric("non-positive mean denominator".into()));
    }
    let ratio = mn / md;
    let z: Vec<f64> = num.iter().zip(den).map(|(s, d)| (s - ratio * d) / md).collect();
    let se = (sample_variance(&z) / z.len() as f64).sqrt();
    Ok(RatioRate {
        ratio,
        rate: ratio.ln_1p() / std::f64::consts::LN_2,
        half_width: Z95 * se / ((1.0 + ratio) * std::f64::consts::LN_2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::dims("at least two paired points", format!("{} x, {} y", x.len(), y.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("degenerate abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
