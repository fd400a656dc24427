use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic interface shared by plain `f64` evaluation and the reverse-mode
/// tape variables used inside the optimal-control transcription.
///
/// Model dynamics, output conversions, and stage costs are written once,
/// generically over `Scalar`, so the simulated plant and the differentiated
/// predictor are the same code path by construction.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Current numeric value.
    fn value(self) -> f64;

    /// `c - self`.
    fn rsub(self, c: f64) -> Self;

    /// `c / self`.
    fn rdiv(self, c: f64) -> Self;

    fn exp(self) -> Self;

    fn ln(self) -> Self;

    fn tanh(self) -> Self;

    /// `max(0, self)` with derivative 0 at the kink.
    fn relu(self) -> Self;

    /// Small non-negative integer power.
    fn powi(self, n: u32) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn rsub(self, c: f64) -> Self {
        c - self
    }

    #[inline]
    fn rdiv(self, c: f64) -> Self {
        c / self
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }

    #[inline]
    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }
}
