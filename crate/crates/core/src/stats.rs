//! Mergeable accumulators for Monte Carlo reductions.

use crate::math::{exp, ln, sqrt};

/// Streaming estimate of `log E[exp(w)]` from log-weights `w`.
///
/// Keeps a running maximum and the shifted sums `Σ e^{w-m}`, `Σ e^{2(w-m)}`,
/// so nothing overflows however large the weights get.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeanAccumulator {
    max: f64,
    sum: f64,
    sum_sq: f64,
    count: u64,
    flagged: u64,
}

impl Default for LogMeanAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogMeanAccumulator {
    pub const fn new() -> Self {
        LogMeanAccumulator {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            sum_sq: 0.0,
            count: 0,
            flagged: 0,
        }
    }

    /// Adds one log-weight. Non-finite values are counted as flagged and
    /// otherwise ignored.
    pub fn push(&mut self, w: f64) {
        if !w.is_finite() {
            self.flagged += 1;
            return;
        }
        if w > self.max {
            let s = exp(self.max - w);
            self.sum = self.sum * s + 1.0;
            self.sum_sq = self.sum_sq * s * s + 1.0;
            self.max = w;
        } else {
            let a = exp(w - self.max);
            self.sum += a;
            self.sum_sq += a * a;
        }
        self.count += 1;
    }

    /// Folds `other` into `self`. Merging in a fixed order gives a fixed
    /// result.
    pub fn merge(&mut self, other: &Self) {
        self.flagged += other.flagged;
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            let flagged = self.flagged;
            *self = *other;
            self.flagged = flagged;
            return;
        }
        let m = self.max.max(other.max);
        let sa = exp(self.max - m);
        let sb = exp(other.max - m);
        self.sum = self.sum * sa + other.sum * sb;
        self.sum_sq = self.sum_sq * sa * sa + other.sum_sq * sb * sb;
        self.max = m;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn flagged(&self) -> u64 {
        self.flagged
    }

    /// `log` of the sample mean of `exp(w)`.
    pub fn log_mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.max + ln(self.sum / self.count as f64)
    }

    /// Delta-method standard error of [`Self::log_mean`]:
    /// `sd(e^w) / (√S · mean(e^w))`. Zero when fewer than two samples.
    pub fn stderr_log(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let s = self.count as f64;
        let mean = self.sum / s;
        let var = ((self.sum_sq / s - mean * mean) * s / (s - 1.0)).max(0.0);
        sqrt(var / s) / mean
    }
}

/// Mean and variance by Welford's update, mergeable by Chan's rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            sqrt(self.variance() / self.count as f64)
        }
    }
}

/// Frequency of an event with its binomial standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HitCounter {
    pub hits: u64,
    pub trials: u64,
}

impl HitCounter {
    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn merge(&mut self, other: &Self) {
        self.hits += other.hits;
        self.trials += other.trials;
    }

    pub fn p_hat(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.hits as f64 / self.trials as f64
    }

    /// `sqrt(p̃(1-p̃)/n)` with the Laplace-smoothed `p̃ = (k+1)/(n+2)`, so an
    /// all-miss or all-hit run still reports a nonzero uncertainty.
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        let n = self.trials as f64;
        let p = (self.hits as f64 + 1.0) / (n + 2.0);
        sqrt(p * (1.0 - p) / n)
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
