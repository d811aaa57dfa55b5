//! Parameterized maps, trajectory sampling and empirical SRB histograms.

pub mod baker;

pub use baker::PerturbedBaker;

use std::f64::consts::TAU;

use nalgebra::{SMatrix, SVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A point of the phase space, in ambient coordinates.
pub type State<const M: usize> = SVector<f64, M>;
/// An `M x M` derivative matrix.
pub type Jacobian<const M: usize> = SMatrix<f64, M, M>;

/// Parameter values `s` at which a map is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "parameter values must be finite, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `s + t * direction`.
    pub fn shifted(&self, direction: &ParamDirection, t: f64) -> Result<Self> {
        if direction.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: direction.len(),
            });
        }
        let values = self
            .0
            .iter()
            .zip(direction.weights())
            .map(|(s, d)| s + t * d)
            .collect();
        Self::new(values)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Direction in parameter space along which the response is differentiated.
///
/// A single parameter `s_k` is the unit vector `e_k`; a joint sweep such as
/// `s1 = s3 = t` is `e_1 + e_3`. All tangent quantities are linear in the
/// perturbation field, so a direction costs the same as a single parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamDirection(Vec<f64>);

impl ParamDirection {
    /// Unit direction along the parameter with zero-based index `k`.
    pub fn single(param_dim: usize, k: usize) -> Result<Self> {
        if k >= param_dim {
            return Err(Error::InvalidArgument(format!(
                "parameter index {k} out of range for {param_dim} parameters"
            )));
        }
        let mut w = vec![0.0; param_dim];
        w[k] = 1.0;
        Ok(Self(w))
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "direction weights must be finite".into(),
            ));
        }
        Ok(Self(weights))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// Indices with non-zero weight, paired with the weight.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, w)| (k, *w))
    }
}

/// A parameterized family of maps with hand-coded derivatives.
///
/// Implementations return raw values; the checked free functions
/// ([`apply_map`], [`jacobian`], ...) validate inputs and outputs.
pub trait MapModel<const M: usize>: Send + Sync {
    fn name(&self) -> &str;

    fn param_dim(&self) -> usize;

    /// Image `phi_s(x)`, reduced into the fundamental domain.
    fn apply(&self, x: &State<M>, s: &ParamVector) -> State<M>;

    /// `d phi_s` at `x`.
    fn jacobian(&self, x: &State<M>, s: &ParamVector) -> Jacobian<M>;

    /// `d^2 phi_s(u, v)` at `x`; bilinear and symmetric.
    fn second_derivative(
        &self,
        x: &State<M>,
        s: &ParamVector,
        u: &State<M>,
        v: &State<M>,
    ) -> State<M>;

    /// `d phi_s / d s_k` at `x`. Along an orbit this is the perturbation
    /// field at the image point, `chi_{n+1}`.
    fn parameter_velocity(&self, x: &State<M>, s: &ParamVector, k: usize) -> State<M>;

    /// `d/ds_k (d phi_s)` at `x`.
    fn mixed_derivative(&self, x: &State<M>, s: &ParamVector, k: usize) -> Jacobian<M>;

    /// Uniform (Lebesgue) draw from the fundamental domain.
    fn sample_uniform(&self, rng: &mut dyn RngCore) -> State<M>;

    /// Shortest displacement `to - from` (accounts for periodic wrap).
    fn displacement(&self, from: &State<M>, to: &State<M>) -> State<M> {
        to - from
    }

    /// Identifier of the smooth branch containing `x`; points on different
    /// branches cannot be joined by a finite difference.
    fn branch(&self, _x: &State<M>) -> usize {
        0
    }

    /// Combined parameter velocity `sum_k w_k d phi / d s_k`.
    fn directional_velocity(
        &self,
        x: &State<M>,
        s: &ParamVector,
        direction: &ParamDirection,
    ) -> State<M> {
        direction.active().fold(State::<M>::zeros(), |acc, (k, w)| {
            acc + self.parameter_velocity(x, s, k) * w
        })
    }

    /// Combined mixed derivative `sum_k w_k d/ds_k (d phi)`.
    fn directional_mixed(
        &self,
        x: &State<M>,
        s: &ParamVector,
        direction: &ParamDirection,
    ) -> Jacobian<M> {
        direction
            .active()
            .fold(Jacobian::<M>::zeros(), |acc, (k, w)| {
                acc + self.mixed_derivative(x, s, k) * w
            })
    }
}

fn check_state<const M: usize>(x: &State<M>, step: isize) -> Result<()> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidState {
            step,
            coords: x.iter().copied().collect(),
        })
    }
}

fn check_params<const M: usize>(model: &impl MapModel<M>, s: &ParamVector) -> Result<()> {
    if s.len() != model.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.param_dim(),
            found: s.len(),
        });
    }
    Ok(())
}

fn check_index<const M: usize>(model: &impl MapModel<M>, k: usize) -> Result<()> {
    if k >= model.param_dim() {
        return Err(Error::InvalidArgument(format!(
            "parameter index {k} out of range for {} parameters",
            model.param_dim()
        )));
    }
    Ok(())
}

pub fn apply_map<const M: usize>(
    model: &impl MapModel<M>,
    x: &State<M>,
    s: &ParamVector,
) -> Result<State<M>> {
    check_params(model, s)?;
    check_state(x, 0)?;
    let y = model.apply(x, s);
    check_state(&y, 1)?;
    Ok(y)
}

pub fn jacobian<const M: usize>(
    model: &impl MapModel<M>,
    x: &State<M>,
    s: &ParamVector,
) -> Result<Jacobian<M>> {
    check_params(model, s)?;
    check_state(x, 0)?;
    Ok(model.jacobian(x, s))
}

pub fn second_derivative<const M: usize>(
    model: &impl MapModel<M>,
    x: &State<M>,
    s: &ParamVector,
    u: &State<M>,
    v: &State<M>,
) -> Result<State<M>> {
    check_params(model, s)?;
    check_state(x, 0)?;
    Ok(model.second_derivative(x, s, u, v))
}

pub fn parameter_velocity<const M: usize>(
    model: &impl MapModel<M>,
    x: &State<M>,
    s: &ParamVector,
    k: usize,
) -> Result<State<M>> {
    check_params(model, s)?;
    check_index(model, k)?;
    check_state(x, 0)?;
    Ok(model.parameter_velocity(x, s, k))
}

pub fn mixed_derivative<const M: usize>(
    model: &impl MapModel<M>,
    x: &State<M>,
    s: &ParamVector,
    k: usize,
) -> Result<Jacobian<M>> {
    check_params(model, s)?;
    check_index(model, k)?;
    check_state(x, 0)?;
    Ok(model.mixed_derivative(x, s, k))
}

/// An orbit `x_{-K'}, ..., x_{N-1}` with `x_{n+1} = phi_s(x_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<const M: usize> {
    points: Vec<State<M>>,
    runup: usize,
    seed: u64,
}

impl<const M: usize> Trajectory<M> {
    /// Number of post-run-up points `N`.
    pub fn len(&self) -> usize {
        self.points.len() - self.runup
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn runup(&self) -> usize {
        self.runup
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Point with signed index `n` in `-K' ..= N-1`.
    pub fn at(&self, n: isize) -> Option<&State<M>> {
        let i = n + self.runup as isize;
        if i < 0 {
            return None;
        }
        self.points.get(i as usize)
    }

    /// All points from `x_{-K'}` on.
    pub fn all(&self) -> &[State<M>] {
        &self.points
    }

    /// Run-up points `x_{-K'} .. x_{-1}`.
    pub fn burn_in(&self) -> &[State<M>] {
        &self.points[..self.runup]
    }

    /// Averaging window `x_0 .. x_{N-1}`.
    pub fn samples(&self) -> &[State<M>] {
        &self.points[self.runup..]
    }

    /// Signed index of the `i`-th stored point.
    pub fn index_of(&self, i: usize) -> isize {
        i as isize - self.runup as isize
    }
}

/// Draw `x_{-K'}` uniformly from the seeded stream and iterate the map.
pub fn generate_trajectory<const M: usize>(
    model: &impl MapModel<M>,
    s: &ParamVector,
    seed: u64,
    runup: usize,
    length: usize,
) -> Result<Trajectory<M>> {
    check_params(model, s)?;
    if length == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be at least 1".into(),
        ));
    }
    let total = runup + length;
    let mut rng = rng::stream(seed, rng::STREAM_STATE);
    let mut x = model.sample_uniform(&mut rng);
    let mut points = Vec::with_capacity(total);
    for i in 0..total {
        check_state(&x, i as isize - runup as isize)?;
        points.push(x);
        if i + 1 < total {
            x = model.apply(&x, s);
        }
    }
    Ok(Trajectory {
        points,
        runup,
        seed,
    })
}

/// Occupancy histogram of a planar trajectory on `[0, 2 pi)^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins_x: usize,
    pub bins_y: usize,
    /// Row-major in `x1`: entry `ix * bins_y + iy`.
    pub probabilities: Vec<f64>,
    pub samples: usize,
}

impl Histogram {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.probabilities[ix * self.bins_y + iy]
    }

    /// Center of bin `(ix, iy)`.
    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as f64 + 0.5) * TAU / self.bins_x as f64,
            (iy as f64 + 0.5) * TAU / self.bins_y as f64,
        )
    }
}

/// Normalized occupancy of the averaging window over `bins_x x bins_y`
/// cells of the torus `[0, 2 pi)^2`.
pub fn srb_histogram<const M: usize>(
    trajectory: &Trajectory<M>,
    bins_x: usize,
    bins_y: usize,
) -> Result<Histogram> {
    if M != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: M,
        });
    }
    if bins_x == 0 || bins_y == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin per axis".into(),
        ));
    }
    let bin = |c: f64, bins: usize| -> usize {
        let i = (c.rem_euclid(TAU) / TAU * bins as f64).floor() as usize;
        i.min(bins - 1)
    };
    let mut counts = vec![0u64; bins_x * bins_y];
    for x in trajectory.samples() {
        counts[bin(x[0], bins_x) * bins_y + bin(x[1], bins_y)] += 1;
    }
    let n = trajectory.len();
    Ok(Histogram {
        bins_x,
        bins_y,
        probabilities: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        samples: n,
    })
}
