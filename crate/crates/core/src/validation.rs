//! Independent ground truth for the sensitivity estimates.
//!
//! Everything here uses only forward iteration of the map: ensemble averages
//! of the observable, central finite differences of those averages, response
//! curves over parameter grids, and log-log convergence regressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{MapModel, ParamDirection, ParamVector, State};
use crate::error::{Error, Result};
use crate::export::{sig17, sig17_vec};
use crate::response::{Observable, SensitivityResult};
use crate::rng;
use crate::stats::{batch_means, independent_estimate, linear_fit, Estimate, DEFAULT_BATCHES};

/// How ensemble averages are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub orbits: usize,
    pub orbit_length: usize,
    pub runup: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            orbits: 200,
            orbit_length: 100_000,
            runup: 100,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orbits == 0 || self.orbit_length == 0 {
            return Err(Error::InvalidArgument(
                "sampling needs at least one orbit of length at least one".into(),
            ));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.orbits * self.orbit_length
    }
}

fn orbit_values<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    observable: &impl Observable<M>,
    sampling: &SamplingConfig,
    orbit: usize,
    mut sink: impl FnMut(f64),
) -> Result<()> {
    let mut rng = rng::stream(
        rng::derive_seed(sampling.seed, orbit as u64),
        rng::STREAM_STATE,
    );
    let mut x: State<M> = model.sample_uniform(&mut rng);
    for _ in 0..sampling.runup {
        x = model.apply(&x, s);
    }
    for n in 0..sampling.orbit_length {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidState {
                step: n as isize,
                coords: x.iter().copied().collect(),
            });
        }
        sink(observable.value(&x));
        x = model.apply(&x, s);
    }
    Ok(())
}

/// Time average of `J` along each orbit, in orbit order.
pub fn orbit_means<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    observable: &impl Observable<M>,
    sampling: &SamplingConfig,
) -> Result<Vec<f64>> {
    sampling.validate()?;
    if s.len() != model.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.param_dim(),
            found: s.len(),
        });
    }
    (0..sampling.orbits)
        .into_par_iter()
        .map(|i| {
            let mut sum = 0.0;
            orbit_values(model, s, observable, sampling, i, |j| sum += j)?;
            Ok(sum / sampling.orbit_length as f64)
        })
        .collect()
}

/// `<J>_s` over independent orbits; the error comes from the spread of the
/// orbit means, or from batch means along the orbit when there is only one.
pub fn ensemble_average<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    observable: &impl Observable<M>,
    sampling: &SamplingConfig,
) -> Result<Estimate> {
    if sampling.orbits == 1 {
        sampling.validate()?;
        let mut values = Vec::with_capacity(sampling.orbit_length);
        orbit_values(model, s, observable, sampling, 0, |j| values.push(j))?;
        return Ok(batch_means(&values, DEFAULT_BATCHES));
    }
    let means = orbit_means(model, s, observable, sampling)?;
    let mut est = independent_estimate(&means);
    if est.stderr.is_nan() {
        est.stderr = 0.0;
    }
    Ok(est)
}

/// `(<J>(s + delta d) - <J>(s - delta d)) / (2 delta)`.
///
/// Both sides use the same orbit seeds; the error is computed from the
/// per-orbit differences, which accounts for the correlation between sides.
pub fn central_difference<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    direction: &ParamDirection,
    delta: f64,
    observable: &impl Observable<M>,
    sampling: &SamplingConfig,
) -> Result<Estimate> {
    if !delta.is_finite() || delta == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be finite and non-zero, got {delta}"
        )));
    }
    if sampling.orbits < 2 {
        return Err(Error::InvalidArgument(
            "central difference needs at least two orbits per side".into(),
        ));
    }
    let plus = orbit_means(model, &s.shifted(direction, delta)?, observable, sampling)?;
    let minus = orbit_means(model, &s.shifted(direction, -delta)?, observable, sampling)?;
    let diffs: Vec<f64> = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * delta))
        .collect();
    Ok(independent_estimate(&diffs))
}

/// `<J>` sampled along `base + t * direction` for each `t` in `grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub base: ParamVector,
    pub direction: ParamDirection,
    #[serde(serialize_with = "sig17_vec")]
    pub grid: Vec<f64>,
    #[serde(serialize_with = "sig17_vec")]
    pub means: Vec<f64>,
    #[serde(serialize_with = "sig17_vec")]
    pub stderrs: Vec<f64>,
    pub samples_per_point: usize,
}

pub fn response_curve<const M: usize>(
    model: &impl MapModel<M>,
    base: &ParamVector,
    direction: &ParamDirection,
    grid: &[f64],
    observable: &impl Observable<M>,
    sampling: &SamplingConfig,
) -> Result<ResponseCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[0].is_nan() || w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    let mut means = Vec::with_capacity(grid.len());
    let mut stderrs = Vec::with_capacity(grid.len());
    for &t in grid {
        let est = ensemble_average(model, &base.shifted(direction, t)?, observable, sampling)?;
        means.push(est.value);
        stderrs.push(est.stderr);
    }
    Ok(ResponseCurve {
        base: base.clone(),
        direction: direction.clone(),
        grid: grid.to_vec(),
        means,
        stderrs,
        samples_per_point: sampling.total_samples(),
    })
}

/// Least-squares slope of `ln |error|` against `ln N`.
pub fn convergence_slope(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "convergence slope needs at least 3 points, got {}",
            pairs.len()
        )));
    }
    if let Some((n, e)) = pairs
        .iter()
        .find(|(n, e)| n.is_nan() || *n <= 0.0 || *e == 0.0 || !e.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "convergence pair ({n}, {e}) has no finite logarithm"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(n, e)| (n.ln(), e.abs().ln())).unzip();
    linear_fit(&xs, &ys).map(|(slope, _)| slope)
}

/// One row of a validation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub s: ParamVector,
    #[serde(serialize_with = "sig17")]
    pub s3_total: f64,
    #[serde(serialize_with = "sig17")]
    pub s3_stderr: f64,
    #[serde(serialize_with = "sig17")]
    pub fd: f64,
    #[serde(serialize_with = "sig17")]
    pub fd_stderr: f64,
    #[serde(serialize_with = "sig17")]
    pub tol: f64,
    pub pass: bool,
}

/// Relative allowance for the O(delta^2) bias of the secant.
pub const CURVATURE_ALLOWANCE: f64 = 0.02;

/// Accept when `|s3 - fd| <= 3 (stderr_s3 + stderr_fd) + 0.02 |fd|`.
pub fn compare(result: &SensitivityResult, fd: &Estimate) -> Comparison {
    let tol = 3.0 * (result.stderr_total + fd.stderr) + CURVATURE_ALLOWANCE * fd.value.abs();
    Comparison {
        s: result.s.clone(),
        s3_total: result.total,
        s3_stderr: result.stderr_total,
        fd: fd.value,
        fd_stderr: fd.stderr,
        tol,
        pass: (result.total - fd.value).abs() <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PerturbedBaker;
    use crate::response::observable::{Constant, FourierMode};

    fn quick(seed: u64) -> SamplingConfig {
        SamplingConfig {
            orbits: 20,
            orbit_length: 5_000,
            runup: 50,
            seed,
        }
    }

    #[test]
    fn constant_average_is_exact() {
        let s = ParamVector::new(vec![0.1, 0.1, 0.1, 0.1]).unwrap();
        let e = ensemble_average(&PerturbedBaker, &s, &Constant(1.0), &quick(0)).unwrap();
        assert_eq!((e.value, e.stderr), (1.0, 0.0));
        let single = SamplingConfig {
            orbits: 1,
            ..quick(0)
        };
        let e = ensemble_average(&PerturbedBaker, &s, &Constant(1.0), &single).unwrap();
        assert_eq!((e.value, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn unperturbed_average_vanishes() {
        let e = ensemble_average(
            &PerturbedBaker,
            &ParamVector::zeros(4),
            &FourierMode::cos_4x2(),
            &quick(1),
        )
        .unwrap();
        assert!(e.value.abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn central_difference_is_antisymmetric_in_delta() {
        let s = ParamVector::new(vec![0.05, 0.0, 0.0, 0.1]).unwrap();
        let dir = ParamDirection::single(4, 3).unwrap();
        let j = FourierMode::cos_4x2();
        let a = central_difference(&PerturbedBaker, &s, &dir, 0.05, &j, &quick(2)).unwrap();
        let b = central_difference(&PerturbedBaker, &s, &dir, -0.05, &j, &quick(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn central_difference_rejects_zero_step() {
        let dir = ParamDirection::single(4, 0).unwrap();
        let err = central_difference(
            &PerturbedBaker,
            &ParamVector::zeros(4),
            &dir,
            0.0,
            &Constant(1.0),
            &quick(0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn inactive_parameter_has_zero_derivative() {
        let dir = ParamDirection::from_weights(vec![0.0; 4]).unwrap();
        let fd = central_difference(
            &PerturbedBaker,
            &ParamVector::zeros(4),
            &dir,
            0.05,
            &FourierMode::cos_4x2(),
            &quick(3),
        )
        .unwrap();
        assert_eq!((fd.value, fd.stderr), (0.0, 0.0));
    }

    #[test]
    fn response_curve_checks_grid() {
        let dir = ParamDirection::single(4, 0).unwrap();
        let j = FourierMode::cos_4x2();
        let s = ParamVector::zeros(4);
        assert!(response_curve(&PerturbedBaker, &s, &dir, &[0.1, 0.1], &j, &quick(0)).is_err());
        assert!(response_curve(&PerturbedBaker, &s, &dir, &[], &j, &quick(0)).is_err());
        let c = response_curve(&PerturbedBaker, &s, &dir, &[0.1], &j, &quick(0)).unwrap();
        assert_eq!(c.means.len(), 1);
        assert_eq!(c.samples_per_point, 100_000);
        let again = response_curve(&PerturbedBaker, &s, &dir, &[0.1], &j, &quick(0)).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn convergence_slope_examples() {
        let pairs: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n: &f64| (n, n.powf(-0.5)))
            .collect();
        assert!((convergence_slope(&pairs).unwrap() + 0.5).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|&n| (n, 0.3)).collect();
        assert!(convergence_slope(&flat).unwrap().abs() < 1e-12);
        assert!(convergence_slope(&pairs[..2]).is_err());
        assert!(convergence_slope(&[(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }
}
