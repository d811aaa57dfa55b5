//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use s3_core::dynamics::baker::wrap_angle;
use s3_core::rng;
use s3_core::tangent::{initial_direction, DiagnosticFrame, TangentFrame, TangentStack};
use s3_core::*;

pub const COMPANION_STEPS: usize = 10;

pub fn baker_params(values: [f64; 4]) -> ParamVector {
    ParamVector::new(values.to_vec()).unwrap()
}

pub fn single(k: usize) -> ParamDirection {
    ParamDirection::single(4, k).unwrap()
}

/// Parameters drawn uniformly from `[-bound, bound]^4`.
pub fn random_params(seed: u64, bound: f64) -> ParamVector {
    let mut r = rng::stream(seed, 7);
    ParamVector::new((0..4).map(|_| r.random_range(-bound..=bound)).collect()).unwrap()
}

fn wrap(x: State<2>) -> State<2> {
    State::<2>::new(wrap_angle(x[0]), wrap_angle(x[1]))
}

/// Largest deviation of each algebraic invariant over a run.
#[derive(Debug, Default, Clone, Copy)]
pub struct InvariantResiduals {
    pub q_norm: f64,
    pub v_dot_q: f64,
    pub w_dot_q: f64,
    pub y_dot_q: f64,
    pub c_split: f64,
    pub p_split: f64,
}

impl InvariantResiduals {
    fn absorb(&mut self, f: &TangentFrame<2>, d: &DiagnosticFrame<2>) {
        let upd = |slot: &mut f64, x: f64| *slot = slot.max(x.abs());
        upd(&mut self.q_norm, f.q.norm() - 1.0);
        upd(&mut self.v_dot_q, f.v.dot(&f.q));
        upd(&mut self.w_dot_q, d.w.dot(&f.q));
        upd(&mut self.y_dot_q, f.y.dot(&f.q) + f.v.dot(&f.p));
        upd(&mut self.c_split, f.c - (f.a * d.g + d.b));
        upd(&mut self.p_split, (f.p - (d.w - f.q * d.g)).norm());
    }
}

pub fn invariant_residuals(
    s: &ParamVector,
    direction: &ParamDirection,
    seed: u64,
    steps: usize,
) -> InvariantResiduals {
    let traj = generate_trajectory(&PerturbedBaker, s, seed, 100, steps).unwrap();
    let mut out = InvariantResiduals::default();
    tangent::for_each_frame(
        &traj,
        &PerturbedBaker,
        s,
        direction,
        true,
        steps - 1,
        |f, d, _| out.absorb(f, d.unwrap()),
    )
    .unwrap();
    out
}

/// Differences between a stack started from the usual initial state and one
/// started from random states, step by step, for the quantities
/// `q, v, a, p, y, c, w, g, b`.
pub fn forgetting_profile(
    s: &ParamVector,
    direction: &ParamDirection,
    seed: u64,
    steps: usize,
) -> Vec<[f64; 9]> {
    let traj = generate_trajectory(&PerturbedBaker, s, seed, 0, steps + 1).unwrap();
    let model = PerturbedBaker;
    let mut a = TangentStack::new(&model, s, direction, initial_direction(seed), 0, true).unwrap();
    let mut r = rng::stream(seed ^ 0x5eed, 9);
    let mut vec = || rng::unit_sphere::<2>(&mut r);
    let frame = TangentFrame {
        q: vec(),
        alpha: 1.0,
        v: vec(),
        a: 0.0,
        p: vec(),
        y: vec(),
        c: 0.0,
    };
    let diag = DiagnosticFrame {
        w: vec(),
        gamma: 0.0,
        g: 0.7,
        b: 0.0,
        y_w: vec(),
    };
    let mut b = TangentStack::from_state(&model, s, direction, 0, frame, Some(diag)).unwrap();
    let mut out = Vec::with_capacity(steps);
    for x in traj.samples().iter().take(steps) {
        a.advance(x).unwrap();
        b.advance(x).unwrap();
        let (fa, fb) = (a.frame(), b.frame());
        let (da, db) = (a.diagnostics().unwrap(), b.diagnostics().unwrap());
        // q is a direction; quantities odd in q flip with it
        let sign = fa.q.dot(&fb.q).signum();
        out.push([
            (fa.q - fb.q * sign).norm(),
            (fa.v - fb.v).norm(),
            (fa.a - fb.a * sign).abs(),
            (fa.p - fb.p).norm(),
            (fa.y - fb.y * sign).norm(),
            (fa.c - fb.c).abs(),
            (da.w - db.w).norm(),
            (da.g - db.g * sign).abs(),
            (da.b - db.b).abs(),
        ]);
    }
    out
}

/// Fitted log-decay rate per step of a difference series, using the points
/// above the round-off floor.
pub fn decay_slope(diffs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = diffs
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, d)| **d > 1e-12)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(stats::linear_fit(&xs, &ys).unwrap().0)
}

/// Worst decay rate over all quantities; a quantity that is already at the
/// round-off floor after one step counts as forgotten.
pub fn worst_forgetting_slope(profile: &[[f64; 9]]) -> f64 {
    (0..9)
        .filter_map(|i| decay_slope(&profile.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Unstable derivatives of `alpha_n` and `a_n` at one orbit point, by
/// central differences between two companion orbits.
#[derive(Debug, Clone, Copy)]
pub struct CompanionSample {
    pub n: usize,
    pub gamma: f64,
    pub gamma_fd: f64,
    pub b: f64,
    pub b_fd: f64,
}

/// Companion orbits start `COMPANION_STEPS` before `n`, displaced along `q`
/// so that the separation at `n` is about `h`, and carry their own `q` and
/// `v` (normalized and projected at every step). Returns `None` when either
/// companion changes smooth branch on the way.
pub fn companion_sample(
    traj: &Trajectory<2>,
    records: &[tangent::FrameRecord<2>],
    s: &ParamVector,
    direction: &ParamDirection,
    n: usize,
    h: f64,
) -> Option<CompanionSample> {
    let model = PerturbedBaker;
    let m = n - COMPANION_STEPS;
    let start = &records[m].frame;
    let growth: f64 = records[m + 1..=n].iter().map(|r| r.frame.alpha).product();
    let eps = h / growth;
    let q_n = records[n].frame.q;

    let run = |sign: f64| -> Option<(f64, f64, f64)> {
        let frame = TangentFrame {
            v: start.v,
            ..TangentFrame::initial(start.q)
        };
        let mut stack =
            TangentStack::from_state(&model, s, direction, m as isize, frame, None).unwrap();
        let mut x = wrap(traj.samples()[m] + start.q * (sign * eps));
        for k in m..n {
            let sep = model.displacement(&traj.samples()[k], &x).norm();
            if sep > 10.0 * h {
                return None;
            }
            stack.advance(&x).ok()?;
            x = model.apply(&x, s);
        }
        let d = model.displacement(&traj.samples()[n], &x);
        if d.norm() > 10.0 * h {
            return None;
        }
        Some((d.dot(&q_n), stack.frame().alpha, stack.frame().a))
    };
    let (xi_p, alpha_p, a_p) = run(1.0)?;
    let (xi_m, alpha_m, a_m) = run(-1.0)?;
    let diag = records[n].diagnostics.unwrap();
    Some(CompanionSample {
        n,
        gamma: diag.gamma,
        gamma_fd: (alpha_p - alpha_m) / (xi_p - xi_m),
        b: diag.b,
        b_fd: (a_p - a_m) / (xi_p - xi_m),
    })
}

/// Up to `count` companion samples spread along one orbit.
pub fn companion_samples(
    s: &ParamVector,
    direction: &ParamDirection,
    seed: u64,
    count: usize,
    h: f64,
) -> Vec<CompanionSample> {
    let len = 40 * count + COMPANION_STEPS + 1;
    let traj = generate_trajectory(&PerturbedBaker, s, seed, 200, len).unwrap();
    let records = tangent::run_tangent_stack(&traj, &PerturbedBaker, s, direction, true).unwrap();
    (COMPANION_STEPS..len)
        .step_by(13)
        .filter_map(|n| companion_sample(&traj, &records, s, direction, n, h))
        .take(count)
        .collect()
}
