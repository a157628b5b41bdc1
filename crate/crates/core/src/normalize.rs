//! Streaming amplitude normalizer: subtract an exponential moving mean and
//! divide by the log of an exponentially discounted sum of `exp(x)`.
//!
//! ```text
//! E(t) = E(t-1) e^{-1/τ} + e^{x(t)}      S(t) = ln E(t)
//! M(t) = Σ w x / Σ w,   w(t') = e^{(t'-t)/τ}
//! out(t) = (x(t) - M(t)) / S(t)
//! ```
//!
//! `E` is carried as `ln E` so long runs of large inputs cannot overflow.

use crate::error::{invalid, Result};

/// Below this the divisor is treated as zero and the output forced to 0.
pub const DIVISOR_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxNormalizer {
    tau: f64,
    decay: f64,
    /// `ln E`; `-inf` before the first sample.
    log_e: f64,
    mean_num: f64,
    mean_den: f64,
}

/// One normalized window.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Steps whose divisor fell below [`DIVISOR_EPS`].
    pub degenerate_steps: usize,
}

impl SoftmaxNormalizer {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid(format!(
                "normalizer time constant must be positive, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            decay: (-1.0 / tau).exp(),
            log_e: f64::NEG_INFINITY,
            mean_num: 0.0,
            mean_den: 0.0,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Current `S = ln E`.
    pub fn log_sum(&self) -> f64 {
        self.log_e
    }

    /// Current moving mean `M`.
    pub fn mean(&self) -> f64 {
        if self.mean_den > 0.0 {
            self.mean_num / self.mean_den
        } else {
            0.0
        }
    }

    /// Consumes one sample; returns the normalized value, or `None` when
    /// the divisor is degenerate.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        let decayed = self.log_e - 1.0 / self.tau;
        self.log_e = if decayed == f64::NEG_INFINITY {
            x
        } else {
            let (hi, lo) = if decayed > x {
                (decayed, x)
            } else {
                (x, decayed)
            };
            hi + (lo - hi).exp().ln_1p()
        };
        self.mean_num = self.mean_num * self.decay + x;
        self.mean_den = self.mean_den * self.decay + 1.0;
        let s = self.log_e;
        (s > DIVISOR_EPS).then(|| (x - self.mean()) / s)
    }

    pub fn normalize(&mut self, xs: &[f64]) -> Normalized {
        let mut degenerate_steps = 0;
        let values = xs
            .iter()
            .map(|&x| {
                self.push(x).unwrap_or_else(|| {
                    degenerate_steps += 1;
                    0.0
                })
            })
            .collect();
        Normalized {
            values,
            degenerate_steps,
        }
    }
}

/// Normalizes a whole series from a fresh state.
pub fn softmax_normalize(series: &[f64], tau: f64) -> Result<Normalized> {
    Ok(SoftmaxNormalizer::new(tau)?.normalize(series))
}
