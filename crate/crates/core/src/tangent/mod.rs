//! First- and second-order tangent recursions along an orbit.
//!
//! Starting from arbitrary initial values at `x_{-K'}`, each step from `x_n`
//! to `x_{n+1}` advances:
//!
//! - `q, alpha`: normalized push-forward of the unstable direction;
//! - `v, a`: regularized tangent solution, kept orthogonal to `q`;
//! - `p`: unprojected curvature recursion;
//! - `y, c`: unstable derivative of `v` and the weight `c = a g + b`.
//!
//! With diagnostics enabled the stack also carries the projected curvature
//! `w`, `gamma` (unstable derivative of `alpha`), the log-density gradient `g`
//! and `b` (unstable derivative of `a`), the latter from its own copy of the
//! `y` recursion driven by `w` instead of `p`. The two paths agree in exact
//! arithmetic (`p = w - g q`), which makes `c - (a g + b)` a useful
//! consistency check.
//!
//! All recursions forget their initialization exponentially, so after the
//! run-up the frames approximate the true fields along the orbit.

use crate::dynamics::{Jacobian, MapModel, ParamDirection, ParamVector, State, Trajectory};
use crate::error::{Error, Result};
use crate::rng;

/// Smallest admissible `|D q|` before the direction is considered lost.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Per-step values of the production recursions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentFrame<const M: usize> {
    /// Unit vector along the unstable direction.
    pub q: State<M>,
    /// One-step expansion `|D_{n-1} q_{n-1}|`; `1` on the initial frame.
    pub alpha: f64,
    /// Regularized tangent solution, orthogonal to `q`.
    pub v: State<M>,
    /// Unstable coefficient removed from `v` on the last step.
    pub a: f64,
    pub p: State<M>,
    /// Unstable derivative of `v`; satisfies `y . q = -v . p`.
    pub y: State<M>,
    /// Unstable-contribution weight `a g + b`.
    pub c: f64,
}

impl<const M: usize> TangentFrame<M> {
    /// Initial frame: given direction, everything else zero.
    pub fn initial(q: State<M>) -> Self {
        Self {
            q,
            alpha: 1.0,
            v: State::zeros(),
            a: 0.0,
            p: State::zeros(),
            y: State::zeros(),
            c: 0.0,
        }
    }
}

/// Per-step values of the diagnostic recursions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticFrame<const M: usize> {
    /// Curvature of the unstable manifold, orthogonal to `q`.
    pub w: State<M>,
    /// Unstable derivative of `alpha`.
    pub gamma: f64,
    /// Unstable derivative of the log conditional SRB density.
    pub g: f64,
    /// Unstable derivative of `a`.
    pub b: f64,
    /// `y` as produced by the `w`-driven recursion.
    pub y_w: State<M>,
}

impl<const M: usize> DiagnosticFrame<M> {
    pub fn zeros() -> Self {
        Self {
            w: State::zeros(),
            gamma: 0.0,
            g: 0.0,
            b: 0.0,
            y_w: State::zeros(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameRecord<const M: usize> {
    pub n: isize,
    pub frame: TangentFrame<M>,
    pub diagnostics: Option<DiagnosticFrame<M>>,
}

/// `q_{n+1} = D q_n / |D q_n|`, `alpha_{n+1} = |D q_n|`.
///
/// The error's `step` field is 0; [`TangentStack`] rewrites it with the
/// orbit index.
pub fn step_unstable_direction<const M: usize>(
    q: &State<M>,
    d: &Jacobian<M>,
) -> Result<(State<M>, f64)> {
    let pushed = d * q;
    let norm = pushed.norm();
    if norm.is_nan() || norm < DEGENERATE_NORM {
        return Err(Error::DegenerateTangent { step: 0, norm });
    }
    Ok((pushed / norm, norm))
}

/// Regularized tangent step: returns `(v_{n+1}, a_{n+1})` with
/// `a = q' . (D v + chi)` and `v' = D v + chi - a q'`.
pub fn step_regularized_tangent<const M: usize>(
    v: &State<M>,
    d: &Jacobian<M>,
    chi_next: &State<M>,
    q_next: &State<M>,
) -> (State<M>, f64) {
    let u = d * v + chi_next;
    let a = q_next.dot(&u);
    (u - q_next * a, a)
}

/// `p_{n+1} = (d2phi(q, q) + D p_n) / alpha^2`.
pub fn step_p<const M: usize>(
    p: &State<M>,
    d: &Jacobian<M>,
    alpha_next: f64,
    d2phi_qq: &State<M>,
) -> State<M> {
    (d2phi_qq + d * p) / (alpha_next * alpha_next)
}

/// Inputs of one `y` step, all at step `n` unless suffixed `next`.
#[derive(Clone, Copy, Debug)]
pub struct YStep<'a, const M: usize> {
    pub d: &'a Jacobian<M>,
    pub y: &'a State<M>,
    pub alpha_next: f64,
    pub q_next: &'a State<M>,
    pub v_next: &'a State<M>,
    pub a_next: f64,
    pub p_next: &'a State<M>,
    /// `d2phi(q_n, v_n)`.
    pub d2phi_qv: &'a State<M>,
    /// `(d chi)_{n+1} q_{n+1}`.
    pub dchi_q: &'a State<M>,
}

/// Second-order step for `y`; returns `(y_{n+1}, c_{n+1})` with `c` fixed by
/// `y' . q' = -v' . p'`.
pub fn step_y<const M: usize>(inp: YStep<'_, M>) -> (State<M>, f64) {
    let z = (inp.d2phi_qv + inp.d * inp.y) / inp.alpha_next + inp.dchi_q - inp.p_next * inp.a_next;
    let c = z.dot(inp.q_next) + inp.v_next.dot(inp.p_next);
    (z - inp.q_next * c, c)
}

/// `w_{n+1} = (I - q' q'^T)(D w + d2phi(q, q)) / alpha^2`.
pub fn step_w<const M: usize>(
    w: &State<M>,
    d: &Jacobian<M>,
    q_next: &State<M>,
    alpha_next: f64,
    d2phi_qq: &State<M>,
) -> State<M> {
    let u = d * w + d2phi_qq;
    (u - q_next * q_next.dot(&u)) / (alpha_next * alpha_next)
}

/// `gamma_{n+1} = q'^T (D w + d2phi(q, q)) / alpha`.
pub fn step_gamma<const M: usize>(
    w: &State<M>,
    d: &Jacobian<M>,
    q_next: &State<M>,
    alpha_next: f64,
    d2phi_qq: &State<M>,
) -> f64 {
    q_next.dot(&(d * w + d2phi_qq)) / alpha_next
}

/// `g_{n+1} = g_n / alpha - gamma / alpha`.
pub fn step_g(g: f64, alpha_next: f64, gamma_next: f64) -> f64 {
    g / alpha_next - gamma_next / alpha_next
}

/// The `w`-driven `y` step; returns `(y_{n+1}, b_{n+1})` with `b` fixed by
/// `y' . q' = -v' . w'`.
pub fn step_b<const M: usize>(inp: YStep<'_, M>, w_next: &State<M>) -> (State<M>, f64) {
    let z = (inp.d2phi_qv + inp.d * inp.y) / inp.alpha_next + inp.dchi_q - w_next * inp.a_next;
    let b = z.dot(inp.q_next) + inp.v_next.dot(w_next);
    (z - inp.q_next * b, b)
}

/// Streaming driver for the tangent recursions along one orbit.
pub struct TangentStack<'m, const M: usize, F: MapModel<M>> {
    model: &'m F,
    s: ParamVector,
    direction: ParamDirection,
    index: isize,
    frame: TangentFrame<M>,
    diagnostics: Option<DiagnosticFrame<M>>,
}

impl<'m, const M: usize, F: MapModel<M>> TangentStack<'m, M, F> {
    /// Fresh stack at orbit index `start`, with initial direction `q0`
    /// (normalized here) and all other states zero.
    pub fn new(
        model: &'m F,
        s: &ParamVector,
        direction: &ParamDirection,
        q0: State<M>,
        start: isize,
        diagnostics: bool,
    ) -> Result<Self> {
        let norm = q0.norm();
        if norm.is_nan() || norm < DEGENERATE_NORM {
            return Err(Error::DegenerateTangent { step: start, norm });
        }
        Self::from_state(
            model,
            s,
            direction,
            start,
            TangentFrame::initial(q0 / norm),
            diagnostics.then(DiagnosticFrame::zeros),
        )
    }

    /// Stack resuming from explicit states.
    pub fn from_state(
        model: &'m F,
        s: &ParamVector,
        direction: &ParamDirection,
        start: isize,
        frame: TangentFrame<M>,
        diagnostics: Option<DiagnosticFrame<M>>,
    ) -> Result<Self> {
        if s.len() != model.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.param_dim(),
                found: s.len(),
            });
        }
        if direction.len() != model.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.param_dim(),
                found: direction.len(),
            });
        }
        Ok(Self {
            model,
            s: s.clone(),
            direction: direction.clone(),
            index: start,
            frame,
            diagnostics,
        })
    }

    pub fn index(&self) -> isize {
        self.index
    }

    pub fn frame(&self) -> &TangentFrame<M> {
        &self.frame
    }

    pub fn diagnostics(&self) -> Option<&DiagnosticFrame<M>> {
        self.diagnostics.as_ref()
    }

    pub fn record(&self) -> FrameRecord<M> {
        FrameRecord {
            n: self.index,
            frame: self.frame,
            diagnostics: self.diagnostics,
        }
    }

    /// Advance from `x_n` (the orbit point at the current index) to `n + 1`.
    pub fn advance(&mut self, x: &State<M>) -> Result<()> {
        let step = self.index + 1;
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidState {
                step: self.index,
                coords: x.iter().copied().collect(),
            });
        }
        let model = self.model;
        let s = &self.s;
        let cur = self.frame;

        let d = model.jacobian(x, s);
        let chi_next = model.directional_velocity(x, s, &self.direction);
        let dchi = model.directional_mixed(x, s, &self.direction);

        let (q_next, alpha_next) = step_unstable_direction(&cur.q, &d).map_err(|e| match e {
            Error::DegenerateTangent { norm, .. } => Error::DegenerateTangent { step, norm },
            other => other,
        })?;
        let (v_next, a_next) = step_regularized_tangent(&cur.v, &d, &chi_next, &q_next);
        let d2phi_qq = model.second_derivative(x, s, &cur.q, &cur.q);
        let p_next = step_p(&cur.p, &d, alpha_next, &d2phi_qq);
        let d2phi_qv = model.second_derivative(x, s, &cur.q, &cur.v);
        // (d chi)_{n+1} q_{n+1} = (d_s D)(x_n) D^{-1} q_{n+1} = (d_s D)(x_n) q_n / alpha
        let dchi_q = dchi * cur.q / alpha_next;

        let y_step = YStep {
            d: &d,
            y: &cur.y,
            alpha_next,
            q_next: &q_next,
            v_next: &v_next,
            a_next,
            p_next: &p_next,
            d2phi_qv: &d2phi_qv,
            dchi_q: &dchi_q,
        };
        let (y_next, c_next) = step_y(y_step);

        if let Some(diag) = self.diagnostics.as_mut() {
            let w_next = step_w(&diag.w, &d, &q_next, alpha_next, &d2phi_qq);
            let gamma_next = step_gamma(&diag.w, &d, &q_next, alpha_next, &d2phi_qq);
            let g_next = step_g(diag.g, alpha_next, gamma_next);
            let (y_w_next, b_next) = step_b(
                YStep {
                    y: &diag.y_w,
                    ..y_step
                },
                &w_next,
            );
            *diag = DiagnosticFrame {
                w: w_next,
                gamma: gamma_next,
                g: g_next,
                b: b_next,
                y_w: y_w_next,
            };
        }

        self.frame = TangentFrame {
            q: q_next,
            alpha: alpha_next,
            v: v_next,
            a: a_next,
            p: p_next,
            y: y_next,
            c: c_next,
        };
        self.index = step;
        Ok(())
    }
}

/// Initial unstable-direction guess for an orbit generated from `seed`.
pub fn initial_direction<const M: usize>(seed: u64) -> State<M> {
    rng::unit_sphere(&mut rng::stream(seed, rng::STREAM_DIRECTION))
}

/// Run the stack over `trajectory` from `x_{-K'}` and hand every frame with
/// index `0 ..= last` to `visit`, in order.
pub fn for_each_frame<const M: usize, F: MapModel<M>>(
    trajectory: &Trajectory<M>,
    model: &F,
    s: &ParamVector,
    direction: &ParamDirection,
    diagnostics: bool,
    last: usize,
    mut visit: impl FnMut(&TangentFrame<M>, Option<&DiagnosticFrame<M>>, &State<M>),
) -> Result<()> {
    if last >= trajectory.len() {
        return Err(Error::InsufficientTrajectory {
            needed: last + 1,
            available: trajectory.len(),
        });
    }
    let runup = trajectory.runup() as isize;
    let mut stack = TangentStack::new(
        model,
        s,
        direction,
        initial_direction(trajectory.seed()),
        -runup,
        diagnostics,
    )?;
    let points = &trajectory.all()[..trajectory.runup() + last + 1];
    for (i, x) in points.iter().enumerate() {
        if i >= trajectory.runup() {
            visit(stack.frame(), stack.diagnostics(), x);
        }
        if i + 1 < points.len() {
            stack.advance(x)?;
        }
    }
    Ok(())
}

/// Frames for indices `0 .. N` of `trajectory`.
pub fn run_tangent_stack<const M: usize, F: MapModel<M>>(
    trajectory: &Trajectory<M>,
    model: &F,
    s: &ParamVector,
    direction: &ParamDirection,
    diagnostics: bool,
) -> Result<Vec<FrameRecord<M>>> {
    let mut out = Vec::with_capacity(trajectory.len());
    let mut n = 0isize;
    for_each_frame(
        trajectory,
        model,
        s,
        direction,
        diagnostics,
        trajectory.len() - 1,
        |frame, diag, _| {
            out.push(FrameRecord {
                n,
                frame: *frame,
                diagnostics: diag.copied(),
            });
            n += 1;
        },
    )?;
    Ok(out)
}
