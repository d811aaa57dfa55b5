//! Linear response of chaotic maps with a one-dimensional unstable manifold.
//!
//! The space-split sensitivity (S3) estimator splits Ruelle's response series
//! into a stable part, computed as an ergodic average of `dJ · v` along a
//! regularized tangent solution `v`, and an unstable part, computed as lagged
//! correlations of the observable with a scalar weight `c` produced by a
//! second-order tangent recursion. Both parts have uniformly bounded
//! integrands, so plain trajectory averages converge at the Monte Carlo rate.
//!
//! Crate layout:
//!
//! - [`dynamics`]: the map abstraction, the perturbed Baker's map, trajectory
//!   sampling and empirical histograms.
//! - [`tangent`]: the coupled first/second-order tangent recursions.
//! - [`response`]: stable/unstable contributions, the full estimator and the
//!   direct-Ruelle baseline.
//! - [`validation`]: finite-difference ground truth, response curves and
//!   convergence regressions.
//! - [`export`]: CSV/JSON writers.

pub mod dynamics;
pub mod error;
pub mod export;
pub mod response;
pub mod rng;
pub mod stats;
pub mod tangent;
pub mod validation;

pub use dynamics::baker::PerturbedBaker;
pub use dynamics::{
    apply_map, generate_trajectory, jacobian, mixed_derivative, parameter_velocity,
    second_derivative, srb_histogram, Histogram, Jacobian, MapModel, ParamDirection, ParamVector,
    State, Trajectory,
};
pub use error::{Error, Result};
pub use response::observable::{Constant, FourierMode, Observable};
pub use response::{
    direct_ruelle_estimate, s3_sensitivity, stable_contribution, unstable_contribution, Centering,
    DirectRuelleResult, S3Config, SensitivityResult,
};
pub use stats::Estimate;
pub use tangent::{run_tangent_stack, DiagnosticFrame, FrameRecord, TangentFrame, TangentStack};
