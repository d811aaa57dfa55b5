//! Direct evaluation of Ruelle's series with conventional tangents.
//!
//! Term `k` is the ensemble average of `dJ(x_k) . (d phi^k) chi_0`. The
//! integrand grows like `exp(lambda_1 k)`, so the sample variance of term `k`
//! grows like `exp(2 lambda_1 k)`; this module exists as the baseline that
//! exhibits that growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{MapModel, ParamDirection, ParamVector, State};
use crate::error::{Error, Result};
use crate::export::{sig17, sig17_vec};
use crate::response::{log_abs_slope, Observable};
use crate::rng;
use crate::stats::Moments;

/// Ensemble members per deterministic work unit.
const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectRuelleResult {
    /// Sum of the per-term ensemble means.
    #[serde(serialize_with = "sig17")]
    pub value: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub per_k_mean: Vec<f64>,
    #[serde(serialize_with = "sig17_vec")]
    pub per_k_variance: Vec<f64>,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl DirectRuelleResult {
    /// Least-squares slope of `ln variance` against `k` over `range`.
    pub fn variance_log_slope(&self, range: std::ops::Range<usize>) -> Result<f64> {
        log_abs_slope(&self.per_k_variance, range)?
            .ok_or_else(|| Error::InvalidArgument("all variances are zero".into()))
    }
}

/// Per-term samples for one ensemble member.
#[allow(clippy::too_many_arguments)]
fn member_terms<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    direction: &ParamDirection,
    observable: &impl Observable<M>,
    truncation: usize,
    runup: usize,
    seed: u64,
    out: &mut [f64],
) -> Result<()> {
    let mut rng = rng::stream(seed, rng::STREAM_STATE);
    let mut x: State<M> = model.sample_uniform(&mut rng);
    for _ in 0..runup {
        x = model.apply(&x, s);
    }
    // x is x_{-1}; chi_0 lives at its image
    let mut zeta = model.directional_velocity(&x, s, direction);
    x = model.apply(&x, s);
    for (k, term) in out.iter_mut().enumerate().take(truncation) {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidState {
                step: k as isize,
                coords: x.iter().copied().collect(),
            });
        }
        *term = observable.gradient(&x).dot(&zeta);
        zeta = model.jacobian(&x, s) * zeta;
        x = model.apply(&x, s);
    }
    Ok(())
}

/// Truncated Ruelle series from `ensemble_size` independent SRB samples.
///
/// Member `i` starts from a uniform draw seeded by `derive_seed(seed, i)` and
/// is run up for `runup` steps before the perturbation is applied.
/// Results are independent of the thread count.
#[allow(clippy::too_many_arguments)]
pub fn direct_ruelle_estimate<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    direction: &ParamDirection,
    observable: &impl Observable<M>,
    truncation: usize,
    ensemble_size: usize,
    runup: usize,
    seed: u64,
) -> Result<DirectRuelleResult> {
    if ensemble_size < 2 {
        return Err(Error::InvalidArgument(
            "direct Ruelle estimate needs at least two ensemble members".into(),
        ));
    }
    if truncation == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if s.len() != model.param_dim() || direction.len() != model.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.param_dim(),
            found: if s.len() != model.param_dim() {
                s.len()
            } else {
                direction.len()
            },
        });
    }
    let chunks = ensemble_size.div_ceil(CHUNK);
    let partials: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut moments = vec![Moments::default(); truncation];
            let mut terms = vec![0.0; truncation];
            let end = ((c + 1) * CHUNK).min(ensemble_size);
            for i in c * CHUNK..end {
                member_terms(
                    model,
                    s,
                    direction,
                    observable,
                    truncation,
                    runup,
                    rng::derive_seed(seed, i as u64),
                    &mut terms,
                )?;
                moments.iter_mut().zip(&terms).for_each(|(m, &t)| m.push(t));
            }
            Ok(moments)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Moments::default(); truncation];
    for part in &partials {
        total.iter_mut().zip(part).for_each(|(t, p)| t.merge(p));
    }
    let per_k_mean: Vec<f64> = total.iter().map(Moments::mean).collect();
    Ok(DirectRuelleResult {
        value: per_k_mean.iter().sum(),
        per_k_variance: total.iter().map(Moments::variance).collect(),
        per_k_mean,
        ensemble_size,
        seed,
    })
}
