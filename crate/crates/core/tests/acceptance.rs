//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Heavy by design (tens of seconds in an optimized build).

mod common;

use std::f64::consts::LN_2;
use std::process::ExitCode;

use common::*;
use rayon::prelude::*;
use s3_core::rng::derive_seed;
use s3_core::validation::{central_difference, compare, convergence_slope, SamplingConfig};
use s3_core::*;

const FD_DELTA: f64 = 0.05;

type Check = Box<dyn FnOnce(&mut Vec<SensitivityResult>) -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn s3_config(seed: u64) -> S3Config {
    S3Config {
        seed,
        ..S3Config::default()
    }
}

fn validate_point(
    s: [f64; 4],
    direction: &ParamDirection,
    log: &mut Vec<String>,
    runs: &mut Vec<SensitivityResult>,
) -> bool {
    let s = baker_params(s);
    let j = FourierMode::cos_4x2();
    let r = s3_sensitivity(&PerturbedBaker, &s, direction, &j, &s3_config(0)).unwrap();
    let sampling = SamplingConfig {
        seed: 1,
        ..SamplingConfig::default()
    };
    assert!(sampling.total_samples() >= 20_000_000);
    let fd = central_difference(&PerturbedBaker, &s, direction, FD_DELTA, &j, &sampling).unwrap();
    let c = compare(&r, &fd);
    log.push(format!(
        "s={:?} s3={:.5}(+-{:.5}) [stable {:.5}, unstable {:.5}] fd={:.5}(+-{:.5}) |diff|={:.5} tol={:.5}",
        s.as_slice(),
        r.total,
        r.stderr_total,
        r.stable,
        r.unstable,
        fd.value,
        fd.stderr,
        (r.total - fd.value).abs(),
        c.tol
    ));
    runs.push(r);
    c.pass
}

fn sweep(
    direction: ParamDirection,
    point: impl Fn(f64) -> [f64; 4],
    runs: &mut Vec<SensitivityResult>,
) -> (bool, Vec<String>) {
    let mut log = Vec::new();
    let mut pass = true;
    for t in [-0.1, 0.0, 0.1] {
        pass &= validate_point(point(t), &direction, &mut log, runs);
    }
    (pass, log)
}

fn criterion_1(runs: &mut Vec<SensitivityResult>) -> Outcome {
    let (pass, log) = sweep(single(0), |t| [t, 0.0, 0.0, 0.0], runs);
    Outcome {
        pass,
        detail: log.join("; "),
    }
}

fn criterion_2(runs: &mut Vec<SensitivityResult>) -> Outcome {
    let (mut pass, mut log) = sweep(single(3), |t| [0.0, 0.0, 0.0, t], runs);
    let at_zero = runs
        .iter()
        .rev()
        .find(|r| r.s.as_slice().iter().all(|x| *x == 0.0))
        .unwrap();
    let exact = at_zero.unstable == 0.0 && at_zero.per_k_terms.iter().all(|t| *t == 0.0);
    log.push(format!("unstable at s=0 is {:e}", at_zero.unstable));
    pass &= exact;
    Outcome {
        pass,
        detail: log.join("; "),
    }
}

fn criterion_3(runs: &mut Vec<SensitivityResult>) -> Outcome {
    let direction = ParamDirection::from_weights(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let (mut pass, mut log) = sweep(direction.clone(), |t| [t, 0.0, t, 0.0], runs);
    // Non-vanishing of each part is judged on a longer run so the check is
    // not at the edge of the statistical error.
    let long = S3Config {
        samples: 4_000_000,
        ..s3_config(2)
    };
    for t in [-0.1, 0.1] {
        let s = baker_params([t, 0.0, t, 0.0]);
        let r = s3_sensitivity(
            &PerturbedBaker,
            &s,
            &direction,
            &FourierMode::cos_4x2(),
            &long,
        )
        .unwrap();
        let zs = r.stable.abs() / r.stderr_stable;
        let zu = r.unstable.abs() / r.stderr_unstable;
        log.push(format!(
            "t={t}: stable {:.5} ({zs:.1} se), unstable {:.5} ({zu:.1} se)",
            r.stable, r.unstable
        ));
        pass &= zs > 4.0 && zu > 4.0;
    }
    Outcome {
        pass,
        detail: log.join("; "),
    }
}

fn criterion_4() -> Outcome {
    // d<cos 4 x2>/ds4 at s = 0 is exactly -1
    let reference = -1.0;
    let s = baker_params([0.0; 4]);
    let j = FourierMode::cos_4x2();
    let pairs: Vec<(f64, f64)> = [1_000usize, 10_000, 100_000, 1_000_000]
        .into_iter()
        .map(|n| {
            let sq: Vec<f64> = (0..16u64)
                .into_par_iter()
                .map(|i| {
                    let cfg = S3Config {
                        samples: n,
                        seed: derive_seed(4, i),
                        ..S3Config::default()
                    };
                    let r = s3_sensitivity(&PerturbedBaker, &s, &single(3), &j, &cfg).unwrap();
                    (r.total - reference).powi(2)
                })
                .collect();
            (n as f64, (sq.iter().sum::<f64>() / sq.len() as f64).sqrt())
        })
        .collect();
    let slope = convergence_slope(&pairs).unwrap();
    Outcome {
        pass: (-0.65..=-0.35).contains(&slope),
        detail: format!(
            "slope {slope:.3}; rms errors {}",
            pairs
                .iter()
                .map(|(n, e)| format!("N={n:.0e}:{e:.2e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
}

fn criterion_5() -> Outcome {
    let s = baker_params([0.05, 0.0, 0.05, 0.0]);
    let r = direct_ruelle_estimate(
        &PerturbedBaker,
        &s,
        &single(0),
        &FourierMode::cos_4x2(),
        9,
        100_000,
        100,
        5,
    )
    .unwrap();
    let slope = r.variance_log_slope(2..9).unwrap();
    let target = 2.0 * LN_2;
    Outcome {
        pass: (slope - target).abs() <= 0.25 * target,
        detail: format!(
            "slope {slope:.3} vs {target:.3}; variances {}",
            r.per_k_variance[2..9]
                .iter()
                .map(|v| format!("{v:.2e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut worst = InvariantResiduals::default();
    let mut slowest = f64::NEG_INFINITY;
    for i in 0..8u64 {
        let s = random_params(derive_seed(6, i), 0.2);
        let dir = single(i as usize % 4);
        let r = invariant_residuals(&s, &dir, derive_seed(60, i), 100_000);
        worst.q_norm = worst.q_norm.max(r.q_norm);
        worst.v_dot_q = worst.v_dot_q.max(r.v_dot_q);
        worst.w_dot_q = worst.w_dot_q.max(r.w_dot_q);
        worst.y_dot_q = worst.y_dot_q.max(r.y_dot_q);
        worst.c_split = worst.c_split.max(r.c_split);
        let profile = forgetting_profile(&s, &dir, derive_seed(61, i), 80);
        slowest = slowest.max(worst_forgetting_slope(&profile));
    }
    pass &= worst.q_norm <= 1e-12;
    pass &= worst.v_dot_q <= 1e-10 && worst.w_dot_q <= 1e-10;
    pass &= worst.y_dot_q <= 1e-10;
    pass &= worst.c_split <= 1e-8;
    pass &= slowest < -0.1;
    Outcome {
        pass,
        detail: format!(
            "max ||q|-1|={:.1e} |v.q|={:.1e} |w.q|={:.1e} |y.q+v.p|={:.1e} |c-(ag+b)|={:.1e}; slowest forgetting {slowest:.3}/step",
            worst.q_norm, worst.v_dot_q, worst.w_dot_q, worst.y_dot_q, worst.c_split
        ),
    }
}

fn criterion_7() -> Outcome {
    let h = 1e-5;
    let mut samples = Vec::new();
    for i in 0..4u64 {
        let s = if i == 0 {
            baker_params([0.1, 0.0, 0.1, 0.0])
        } else {
            random_params(derive_seed(7, i), 0.2)
        };
        samples.extend(companion_samples(
            &s,
            &single(i as usize % 4),
            derive_seed(70, i),
            25,
            h,
        ));
    }
    let tol = |x: f64| 10.0 * h * (1.0 + x.abs()) + 1e-4;
    let (mut eg, mut eb) = (0.0f64, 0.0f64);
    let (mut sg, mut sb) = (0.0f64, 0.0f64);
    let mut pass = samples.len() == 100;
    for c in &samples {
        pass &= (c.gamma - c.gamma_fd).abs() <= tol(c.gamma);
        pass &= (c.b - c.b_fd).abs() <= tol(c.b);
        eg = eg.max((c.gamma - c.gamma_fd).abs());
        eb = eb.max((c.b - c.b_fd).abs());
        sg = sg.max(c.gamma.abs());
        sb = sb.max(c.b.abs());
    }
    Outcome {
        pass,
        detail: format!(
            "{} steps; max |gamma-fd|={eg:.1e} (max |gamma|={sg:.2}), max |b-fd|={eb:.1e} (max |b|={sb:.2})",
            samples.len()
        ),
    }
}

fn criterion_8(runs: &[SensitivityResult]) -> Outcome {
    let mut pass = !runs.is_empty();
    let mut parts = Vec::new();
    for r in runs {
        match r.truncation_log_slope(2..11).unwrap() {
            Some(slope) => {
                pass &= slope < 0.0;
                parts.push(format!("{slope:.2}"));
            }
            None => parts.push("none".into()),
        }
    }
    Outcome {
        pass,
        detail: format!(
            "{} runs, log-slopes [{}] (none = no unstable content)",
            runs.len(),
            parts.join(" ")
        ),
    }
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let criteria: Vec<(&str, Check)> = vec![
        ("unstable perturbation vs FD", Box::new(criterion_1)),
        ("stable perturbation vs FD", Box::new(criterion_2)),
        ("mixed perturbation vs FD", Box::new(criterion_3)),
        ("O(1/sqrt N) convergence", Box::new(|_| criterion_4())),
        ("direct Ruelle variance growth", Box::new(|_| criterion_5())),
        ("tangent invariants", Box::new(|_| criterion_6())),
        ("companion-orbit oracle", Box::new(|_| criterion_7())),
        ("truncation decay", Box::new(|runs| criterion_8(runs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = std::time::Instant::now();
        let out = check(&mut runs);
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
