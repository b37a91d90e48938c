use serde::{Deserialize, Serialize};

use crate::network::ParamGradient;
use crate::{Error, Result};

/// Triangular cyclic learning rate: rises linearly from `low` to `high` over
/// `half_cycle` steps, then falls back, and repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicLr {
    pub low: f64,
    pub high: f64,
    pub half_cycle: usize,
}

impl CyclicLr {
    pub fn new(low: f64, high: f64, half_cycle: usize) -> Result<Self> {
        if !(low > 0.0 && low < high && high.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cyclic learning rate needs 0 < low < high, got {low}, {high}"
            )));
        }
        if half_cycle == 0 {
            return Err(Error::InvalidArgument("half cycle must be positive".into()));
        }
        Ok(Self { low, high, half_cycle })
    }

    pub fn rate(&self, step: usize) -> f64 {
        let half = self.half_cycle as f64;
        let s = step as f64;
        let cycle = (1.0 + s / (2.0 * half)).floor();
        let x = (s / half - 2.0 * cycle + 1.0).abs();
        self.low + (self.high - self.low) * (1.0 - x).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, params: AdamParams) -> Self {
        Self {
            params,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `theta` in place. A non-finite
    /// gradient leaves `theta` and the moments untouched.
    pub fn step(&mut self, theta: &mut [f64], grad: &ParamGradient, lr: f64) -> Result<()> {
        if grad.len() != theta.len() || theta.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: grad.len(),
            });
        }
        if let Some(i) = grad.0.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient component {i} is {} at Adam step {}",
                grad.0[i],
                self.t + 1
            )));
        }
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in theta.iter_mut().zip(&grad.0).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }
}
