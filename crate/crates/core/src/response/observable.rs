//! Observables `J: M -> R` with analytic gradients.

use crate::dynamics::State;

pub trait Observable<const M: usize>: Send + Sync {
    fn value(&self, x: &State<M>) -> f64;
    fn gradient(&self, x: &State<M>) -> State<M>;
}

/// `J(x) = cos(k . x)` for a fixed wavevector `k`.
///
/// `FourierMode::new([0.0, 4.0])` is the benchmark objective `cos 4 x2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierMode<const M: usize> {
    pub wavevector: [f64; M],
}

impl<const M: usize> FourierMode<M> {
    pub fn new(wavevector: [f64; M]) -> Self {
        Self { wavevector }
    }

    fn phase(&self, x: &State<M>) -> f64 {
        self.wavevector
            .iter()
            .zip(x.iter())
            .map(|(k, c)| k * c)
            .sum()
    }
}

impl FourierMode<2> {
    /// `cos 4 x2`.
    pub fn cos_4x2() -> Self {
        Self::new([0.0, 4.0])
    }
}

impl<const M: usize> Observable<M> for FourierMode<M> {
    fn value(&self, x: &State<M>) -> f64 {
        self.phase(x).cos()
    }

    fn gradient(&self, x: &State<M>) -> State<M> {
        let s = -self.phase(x).sin();
        State::<M>::from_fn(|i, _| s * self.wavevector[i])
    }
}

/// A constant observable; its response is identically zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl<const M: usize> Observable<M> for Constant {
    fn value(&self, _x: &State<M>) -> f64 {
        self.0
    }

    fn gradient(&self, _x: &State<M>) -> State<M> {
        State::zeros()
    }
}
