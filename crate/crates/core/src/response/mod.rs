//! Stable and unstable contributions, the assembled S3 estimate and the
//! direct-Ruelle baseline.

pub mod direct;
pub mod observable;

use serde::{Deserialize, Serialize};

use crate::dynamics::{generate_trajectory, MapModel, ParamDirection, ParamVector, Trajectory};
use crate::error::{Error, Result};
use crate::export::{sig17, sig17_vec};
use crate::stats::{batch_means, linear_fit, mean, Estimate, DEFAULT_BATCHES};
use crate::tangent::{for_each_frame, FrameRecord};

pub use direct::{direct_ruelle_estimate, DirectRuelleResult};
pub use observable::Observable;

/// How the observable enters the lagged correlations of the unstable part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    /// `J - mean(J)`: same limit, much smaller finite-sample variance.
    #[default]
    Centered,
    /// Raw `J`.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct S3Config {
    /// Run-up `K'` before averaging starts. The recursions forget their
    /// start to round-off within about 100 steps; the longer default also
    /// lets analytically vanishing components underflow to exact zeros.
    pub runup: usize,
    /// Averaging length `N`.
    pub samples: usize,
    /// Number of lag terms `K` in the unstable contribution.
    pub truncation: usize,
    pub seed: u64,
    pub centering: Centering,
    /// Batches for the batch-means error bars.
    pub batches: usize,
}

impl Default for S3Config {
    fn default() -> Self {
        Self {
            runup: 2_000,
            samples: 500_000,
            truncation: 11,
            seed: 0,
            centering: Centering::Centered,
            batches: DEFAULT_BATCHES,
        }
    }
}

impl S3Config {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if self.truncation == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if self.batches == 0 {
            return Err(Error::InvalidArgument("batches must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output of the S3 estimator. `total == stable + unstable` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub s: ParamVector,
    pub direction: ParamDirection,
    #[serde(rename = "K")]
    pub truncation: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seed: u64,
    #[serde(serialize_with = "sig17")]
    pub stable: f64,
    #[serde(serialize_with = "sig17")]
    pub unstable: f64,
    #[serde(serialize_with = "sig17")]
    pub total: f64,
    #[serde(serialize_with = "sig17")]
    pub stderr_stable: f64,
    #[serde(serialize_with = "sig17")]
    pub stderr_unstable: f64,
    /// Batch-means error of the combined per-step integrand.
    #[serde(serialize_with = "sig17")]
    pub stderr_total: f64,
    /// `per_k_terms[k] = -(1/N) sum_n J_{n+k} c_n`.
    #[serde(serialize_with = "sig17_vec")]
    pub per_k_terms: Vec<f64>,
}

impl SensitivityResult {
    /// Least-squares slope of `ln |per_k_terms[k]|` over `k in range`.
    ///
    /// `None` when every term in the range is exactly zero (no unstable
    /// content). Exact zeros among non-zero terms are skipped.
    pub fn truncation_log_slope(&self, range: std::ops::Range<usize>) -> Result<Option<f64>> {
        log_abs_slope(&self.per_k_terms, range)
    }
}

pub(crate) fn log_abs_slope(values: &[f64], range: std::ops::Range<usize>) -> Result<Option<f64>> {
    if range.end > values.len() {
        return Err(Error::InsufficientTrajectory {
            needed: range.end,
            available: values.len(),
        });
    }
    let (ks, logs): (Vec<f64>, Vec<f64>) = range
        .filter(|&k| values[k] != 0.0)
        .map(|k| (k as f64, values[k].abs().ln()))
        .unzip();
    if ks.is_empty() {
        return Ok(None);
    }
    linear_fit(&ks, &logs).map(|(slope, _)| Some(slope))
}

/// Unstable-part evaluation: value, error and the per-lag terms.
#[derive(Clone, Debug, PartialEq)]
pub struct UnstableEstimate {
    pub estimate: Estimate,
    pub per_k_terms: Vec<f64>,
    /// Per-step integrand `-sum_k J_{n+k} c_n`.
    series: Vec<f64>,
}

fn check_frames<const M: usize>(frames: &[FrameRecord<M>]) -> Result<()> {
    if let Some(pos) = frames
        .iter()
        .enumerate()
        .position(|(i, f)| f.n != i as isize)
    {
        return Err(Error::LengthMismatch {
            expected: pos,
            found: frames[pos].n.max(0) as usize,
        });
    }
    Ok(())
}

/// `(1/N) sum_n dJ(x_n) . v_n` with a batch-means error.
pub fn stable_contribution<const M: usize>(
    frames: &[FrameRecord<M>],
    trajectory: &Trajectory<M>,
    observable: &impl Observable<M>,
) -> Result<Estimate> {
    check_frames(frames)?;
    if frames.is_empty() || frames.len() > trajectory.len() {
        return Err(Error::LengthMismatch {
            expected: trajectory.len(),
            found: frames.len(),
        });
    }
    let series: Vec<f64> = frames
        .iter()
        .zip(trajectory.samples())
        .map(|(f, x)| observable.gradient(x).dot(&f.frame.v))
        .collect();
    Ok(batch_means(&series, DEFAULT_BATCHES))
}

/// `-sum_{k<K} (1/N) sum_n J_{n+k} c_n` over the `N = frames.len()` frames.
///
/// The trajectory must reach index `N + K - 2`.
pub fn unstable_contribution<const M: usize>(
    frames: &[FrameRecord<M>],
    trajectory: &Trajectory<M>,
    observable: &impl Observable<M>,
    truncation: usize,
    centering: Centering,
) -> Result<UnstableEstimate> {
    check_frames(frames)?;
    let weights: Vec<f64> = frames.iter().map(|f| f.frame.c).collect();
    let values: Vec<f64> = trajectory
        .samples()
        .iter()
        .map(|x| observable.value(x))
        .collect();
    lagged_correlations(&values, &weights, truncation, centering, DEFAULT_BATCHES)
}

fn lagged_correlations(
    values: &[f64],
    weights: &[f64],
    truncation: usize,
    centering: Centering,
    batches: usize,
) -> Result<UnstableEstimate> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no frames".into()));
    }
    if truncation == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let needed = n + truncation - 1;
    if values.len() < needed {
        return Err(Error::InsufficientTrajectory {
            needed,
            available: values.len(),
        });
    }
    let offset = match centering {
        Centering::Centered => mean(&values[..n]),
        Centering::Raw => 0.0,
    };
    let centered: Vec<f64> = values[..needed].iter().map(|j| j - offset).collect();
    let mut per_k = vec![0.0; truncation];
    let mut series = vec![0.0; n];
    for (i, (&c, term)) in weights.iter().zip(series.iter_mut()).enumerate() {
        if c == 0.0 {
            continue;
        }
        let lagged = &centered[i..i + truncation];
        let mut acc = 0.0;
        for (k, j) in lagged.iter().enumerate() {
            let t = -j * c;
            per_k[k] += t;
            acc += t;
        }
        *term = acc;
    }
    per_k.iter_mut().for_each(|t| *t /= n as f64);
    let mut estimate = batch_means(&series, batches);
    // report the value as the sum of the lag terms, as documented
    estimate.value = per_k.iter().sum();
    Ok(UnstableEstimate {
        estimate,
        per_k_terms: per_k,
        series,
    })
}

/// Full S3 estimate of `d<J>/ds` along `direction` at `s`.
///
/// Generates `x_{-K'} .. x_{N+K-2}` from `config.seed`, runs the tangent
/// stack over the first `N` averaging points and assembles both
/// contributions. Deterministic given the seed.
pub fn s3_sensitivity<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    direction: &ParamDirection,
    observable: &impl Observable<M>,
    config: &S3Config,
) -> Result<SensitivityResult> {
    config.validate()?;
    let n = config.samples;
    let k = config.truncation;
    let trajectory = generate_trajectory(model, s, config.seed, config.runup, n + k - 1)?;

    let mut stable_series = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for_each_frame(
        &trajectory,
        model,
        s,
        direction,
        false,
        n - 1,
        |frame, _, x| {
            stable_series.push(observable.gradient(x).dot(&frame.v));
            weights.push(frame.c);
        },
    )?;
    let values: Vec<f64> = trajectory
        .samples()
        .iter()
        .map(|x| observable.value(x))
        .collect();

    let stable = batch_means(&stable_series, config.batches);
    let unstable = lagged_correlations(&values, &weights, k, config.centering, config.batches)?;
    let combined: Vec<f64> = stable_series
        .iter()
        .zip(&unstable.series)
        .map(|(a, b)| a + b)
        .collect();
    let total_err = batch_means(&combined, config.batches).stderr;

    Ok(SensitivityResult {
        s: s.clone(),
        direction: direction.clone(),
        truncation: k,
        samples: n,
        seed: config.seed,
        stable: stable.value,
        unstable: unstable.estimate.value,
        total: stable.value + unstable.estimate.value,
        stderr_stable: stable.stderr,
        stderr_unstable: unstable.estimate.stderr,
        stderr_total: total_err,
        per_k_terms: unstable.per_k_terms,
    })
}
