//! Perturbed Baker's map on the torus `[0, 2 pi)^2`.
//!
//! ```text
//! x1' = 2 x1 + (s1 + s2 sin(2 x2) / 2) sin x1                     (mod 2 pi)
//! x2' = (x2 + (s4 + s3 sin x1) sin(2 x2)) / 2 + pi floor(x1 / pi)
//! ```
//!
//! At `s = 0` this is the standard Baker's map: uniform doubling along `x1`,
//! halving along `x2`, two branches split at `x1 = pi`. `s1` and `s4` keep
//! the unstable/stable directions axis-aligned, `s2` bends the stable
//! direction and `s3` bends the unstable one.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, RngCore};

use super::{Jacobian, MapModel, ParamVector, State};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PerturbedBaker;

pub const PARAM_DIM: usize = 4;

/// Reduce an angle into `[0, 2 pi)`.
pub fn wrap_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2 pi for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn wrap_signed(t: f64) -> f64 {
    let r = wrap_angle(t + PI) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[inline]
fn params(s: &ParamVector) -> (f64, f64, f64, f64) {
    let s = s.as_slice();
    (s[0], s[1], s[2], s[3])
}

/// Trig values shared by all derivative evaluations at one point.
struct Local {
    sin1: f64,
    cos1: f64,
    sin2: f64,
    cos2: f64,
}

impl Local {
    #[inline]
    fn at(x: &State<2>) -> Self {
        let (sin1, cos1) = x[0].sin_cos();
        let (sin2, cos2) = (2.0 * x[1]).sin_cos();
        Self {
            sin1,
            cos1,
            sin2,
            cos2,
        }
    }
}

impl PerturbedBaker {
    pub fn new() -> Self {
        Self
    }

    /// `floor(x1 / pi)` on the half-open branches `[0, pi)` and `[pi, 2 pi)`.
    #[inline]
    pub fn branch_index(x1: f64) -> f64 {
        if wrap_angle(x1) >= PI {
            1.0
        } else {
            0.0
        }
    }
}

impl MapModel<2> for PerturbedBaker {
    fn name(&self) -> &str {
        "baker"
    }

    fn param_dim(&self) -> usize {
        PARAM_DIM
    }

    fn apply(&self, x: &State<2>, s: &ParamVector) -> State<2> {
        let (s1, s2, s3, s4) = params(s);
        let l = Local::at(x);
        let y1 = 2.0 * x[0] + (s1 + s2 * l.sin2 / 2.0) * l.sin1;
        let y2 = (x[1] + (s4 + s3 * l.sin1) * l.sin2) / 2.0 + PI * Self::branch_index(x[0]);
        Vector2::new(wrap_angle(y1), wrap_angle(y2))
    }

    fn jacobian(&self, x: &State<2>, s: &ParamVector) -> Jacobian<2> {
        let (s1, s2, s3, s4) = params(s);
        let l = Local::at(x);
        Matrix2::new(
            2.0 + (s1 + s2 * l.sin2 / 2.0) * l.cos1,
            s2 * l.cos2 * l.sin1,
            s3 * l.cos1 * l.sin2 / 2.0,
            0.5 + (s4 + s3 * l.sin1) * l.cos2,
        )
    }

    fn second_derivative(
        &self,
        x: &State<2>,
        s: &ParamVector,
        u: &State<2>,
        v: &State<2>,
    ) -> State<2> {
        let (s1, s2, s3, s4) = params(s);
        let l = Local::at(x);
        // Hessians of the two components
        let h1_11 = -(s1 + s2 * l.sin2 / 2.0) * l.sin1;
        let h1_12 = s2 * l.cos2 * l.cos1;
        let h1_22 = -2.0 * s2 * l.sin2 * l.sin1;
        let h2_11 = -s3 * l.sin1 * l.sin2 / 2.0;
        let h2_12 = s3 * l.cos1 * l.cos2;
        let h2_22 = -2.0 * (s4 + s3 * l.sin1) * l.sin2;
        let form = |a11: f64, a12: f64, a22: f64| {
            a11 * u[0] * v[0] + a12 * (u[0] * v[1] + u[1] * v[0]) + a22 * u[1] * v[1]
        };
        Vector2::new(form(h1_11, h1_12, h1_22), form(h2_11, h2_12, h2_22))
    }

    fn parameter_velocity(&self, x: &State<2>, _s: &ParamVector, k: usize) -> State<2> {
        let l = Local::at(x);
        match k {
            0 => Vector2::new(l.sin1, 0.0),
            1 => Vector2::new(l.sin2 / 2.0 * l.sin1, 0.0),
            2 => Vector2::new(0.0, l.sin1 * l.sin2 / 2.0),
            3 => Vector2::new(0.0, l.sin2 / 2.0),
            _ => panic!("baker map has {PARAM_DIM} parameters, got index {k}"),
        }
    }

    fn mixed_derivative(&self, x: &State<2>, _s: &ParamVector, k: usize) -> Jacobian<2> {
        let l = Local::at(x);
        match k {
            0 => Matrix2::new(l.cos1, 0.0, 0.0, 0.0),
            1 => Matrix2::new(l.sin2 / 2.0 * l.cos1, l.cos2 * l.sin1, 0.0, 0.0),
            2 => Matrix2::new(0.0, 0.0, l.cos1 * l.sin2 / 2.0, l.sin1 * l.cos2),
            3 => Matrix2::new(0.0, 0.0, 0.0, l.cos2),
            _ => panic!("baker map has {PARAM_DIM} parameters, got index {k}"),
        }
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> State<2> {
        Vector2::new(rng.random::<f64>() * TAU, rng.random::<f64>() * TAU)
    }

    fn displacement(&self, from: &State<2>, to: &State<2>) -> State<2> {
        Vector2::new(wrap_signed(to[0] - from[0]), wrap_signed(to[1] - from[1]))
    }

    fn branch(&self, x: &State<2>) -> usize {
        Self::branch_index(x[0]) as usize
    }
}
