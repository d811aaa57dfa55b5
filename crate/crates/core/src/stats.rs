//! Small statistics toolkit: means, batch-means error bars, least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of batches for batch-means error estimates.
pub const DEFAULT_BATCHES: usize = 30;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// Exact zero with zero error.
    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `NaN` for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean and standard error of independent samples.
pub fn independent_estimate(xs: &[f64]) -> Estimate {
    let m = mean(xs);
    if xs.len() < 2 {
        return Estimate::new(m, f64::NAN);
    }
    Estimate::new(m, (sample_variance(xs) / xs.len() as f64).sqrt())
}

/// Mean of a correlated series with a batch-means standard error.
///
/// The series is cut into `batches` contiguous blocks of equal length (the
/// remainder is spread over the leading blocks); the error is the standard
/// deviation of the block means over `sqrt(batches)`. The returned value is
/// the plain mean of the whole series, not the mean of block means.
pub fn batch_means(series: &[f64], batches: usize) -> Estimate {
    let n = series.len();
    let m = mean(series);
    let b = batches.min(n);
    if b < 2 {
        return Estimate::new(m, f64::NAN);
    }
    let base = n / b;
    let extra = n % b;
    let mut block_means = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < extra);
        block_means.push(mean(&series[start..start + len]));
        start += len;
    }
    let var = sample_variance(&block_means);
    Estimate::new(m, (var / b as f64).sqrt())
}

/// Ordinary least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "linear fit needs at least two points".into(),
        ));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "linear fit needs distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Streaming first and second moments (Welford), mergeable.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}
