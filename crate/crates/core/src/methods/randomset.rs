//! Conformal region over fitted `(theta_hat, t)` pairs for the random-set
//! methods, mean-residual variant.
//!
//! For a candidate pair `(theta, t)` appended to the `k` fitted pairs, the
//! conformity score standardizes both coordinates by the augmented sample:
//!
//! ```text
//! R_i = |theta_i - theta_bar| / s1 + |t_i - t_bar| / s2
//! ```
//!
//! with means and standard deviations recomputed for every candidate. The
//! region `B = {(theta, t) : pi(theta, t) >= eps}` is traversed one `t`-slice
//! at a time: a coarse scan locates the qualifying theta window and its edges
//! are refined by bisection.

use crate::conformal::PValue;
use crate::solver;

/// Grid of density thresholds for the Gaussian working model, 0.001..=0.398;
/// the peak of the unit-variance Gaussian density is just under 0.399.
pub(crate) fn gaussian_t_grid() -> Vec<f64> {
    (1..=398).map(|i| i as f64 * 0.001).collect()
}

/// Grid of probability thresholds for the logistic working model, 0..=1 in
/// steps of 0.01 (t = 0 keeps the full support, t = 1 empties it).
pub(crate) fn logistic_t_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.01).collect()
}

const THETA_SCAN_POINTS: usize = 64;

pub(crate) struct PairCloud {
    thetas: Vec<f64>,
    ts: Vec<f64>,
    theta_mean: f64,
    theta_ssq: f64,
    t_mean: f64,
    t_ssq: f64,
    theta_lo: f64,
    theta_hi: f64,
}

fn mean_ssq(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ssq = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ssq)
}

/// Sample standard deviation of the `k + 1` augmented values given the
/// centered precomputations of the original `k`; `c0` is the candidate in
/// centered coordinates. Zero spread is replaced by machine epsilon.
fn augmented_sd(ssq: f64, k: usize, c0: f64) -> f64 {
    let d = c0 / (k + 1) as f64;
    let total = ssq + k as f64 * d * d + (c0 - d) * (c0 - d);
    let sd = (total / k as f64).sqrt();
    if sd == 0.0 {
        f64::EPSILON
    } else {
        sd
    }
}

impl PairCloud {
    pub(crate) fn new(pairs: &[crate::models::LevelSetPair]) -> Self {
        let thetas: Vec<f64> = pairs.iter().map(|p| p.theta_hat).collect();
        let ts: Vec<f64> = pairs.iter().map(|p| p.t).collect();
        let (theta_mean, theta_ssq) = mean_ssq(&thetas);
        let (t_mean, t_ssq) = mean_ssq(&ts);
        let theta_lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
        let theta_hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            thetas,
            ts,
            theta_mean,
            theta_ssq,
            t_mean,
            t_ssq,
            theta_lo,
            theta_hi,
        }
    }

    pub(crate) fn k(&self) -> usize {
        self.thetas.len()
    }

    /// Conformal p-value of a candidate `(theta, t)` pair.
    pub(crate) fn pvalue(&self, theta: f64, t: f64) -> PValue {
        let k = self.k();
        let denom = (k + 1) as f64;
        let c_theta = theta - self.theta_mean;
        let c_t = t - self.t_mean;

        let theta_bar = self.theta_mean + c_theta / denom;
        let t_bar = self.t_mean + c_t / denom;
        let s1 = augmented_sd(self.theta_ssq, k, c_theta);
        let s2 = augmented_sd(self.t_ssq, k, c_t);

        let r_new = (theta - theta_bar).abs() / s1 + (t - t_bar).abs() / s2;
        let count = self
            .thetas
            .iter()
            .zip(self.ts.iter())
            .filter(|&(&th, &tt)| (th - theta_bar).abs() / s1 + (tt - t_bar).abs() / s2 >= r_new)
            .count();
        PValue::new(count + 1, k + 1)
    }

    /// Min and max theta with `pi(theta, t) >= eps` on one `t`-slice, or
    /// `None` when the slice misses the region.
    pub(crate) fn theta_span_at(&self, t: f64, epsilon: f64) -> Option<(f64, f64)> {
        let spread = (self.theta_hi - self.theta_lo).max(1e-6);
        let lo = self.theta_lo - spread;
        let hi = self.theta_hi + spread;
        solver::scan_span(
            |theta| self.pvalue(theta, t).at_least(epsilon),
            lo,
            hi,
            THETA_SCAN_POINTS,
        )
    }
}
