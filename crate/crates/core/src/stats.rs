//! Small reductions shared by the analysis code.
//!
//! All sums run in a fixed order with Neumaier compensation, so results do
//! not depend on how trajectories were scheduled.

use serde::{Deserialize, Serialize};

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs.iter().copied()) / xs.len() as f64
}

/// Population variance (divides by the sample count).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

/// Unbiased sample variance (divides by `n - 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    variance(xs) * n / (n - 1.0)
}

/// An ensemble-averaged quantity with its standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub sem: f64,
}

impl Estimate {
    /// Mean and `sem = [var / (M - 1)]^{1/2}` with `var` the population
    /// variance over the `M` samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len();
        let sem = if m < 2 {
            f64::NAN
        } else {
            (variance(xs) / (m as f64 - 1.0)).sqrt()
        };
        Estimate {
            mean: mean(xs),
            sem,
        }
    }

    /// True when `|mean - target| <= k * sem`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.sem
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy = sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = sum(x.iter().map(|a| (a - mx) * (a - mx)));
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_slope(&lx, &ly)
}

/// Quadratic mean.
pub fn rms(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    let mut n = 0usize;
    for x in xs {
        acc.add(x * x);
        n += 1;
    }
    (acc.value() / n as f64).sqrt()
}
