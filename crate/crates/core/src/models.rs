//! Parametric working models and related estimators.
//!
//! The working models are deliberately simple: a unit-variance Gaussian with
//! unknown mean, and an intercept-free one-parameter logistic regression with
//! an optional Student-t prior. Conformal validity never depends on these
//! being correct; they only shape the conformity scores and level sets.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::sample::RealSample;

/// Peak of the unit-variance Gaussian density, `1/sqrt(2 pi)`.
pub const GAUSSIAN_DENSITY_MAX: f64 = 0.3989422804014327;

const SQRT_TWO_PI: f64 = 2.5066282746310002;

/// `N(theta_hat, 1)` working model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianModel {
    pub theta_hat: f64,
}

impl GaussianModel {
    pub fn density(&self, y: f64) -> f64 {
        let d = y - self.theta_hat;
        (-0.5 * d * d).exp() / SQRT_TWO_PI
    }
}

/// One-parameter logistic model `P(Y=1 | x) = exp(theta x) / (1 + exp(theta x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticModel {
    pub theta_hat: f64,
}

impl LogisticModel {
    pub fn prob_one(&self, x: f64) -> f64 {
        sigmoid(self.theta_hat * x)
    }

    /// Conditional density of a binary outcome: `p(y | x; theta)`.
    pub fn cond_density(&self, y: u8, x: f64) -> f64 {
        let p = self.prob_one(x);
        if y == 1 {
            p
        } else {
            1.0 - p
        }
    }
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^u)` without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Student-t prior on the logistic parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TPrior {
    pub df: f64,
    pub scale: f64,
    pub location: f64,
}

impl Default for TPrior {
    /// The usual weakly-informative choice for logistic coefficients:
    /// Cauchy (df = 1) with scale 2.5 centered at zero.
    fn default() -> Self {
        Self {
            df: 1.0,
            scale: 2.5,
            location: 0.0,
        }
    }
}

impl TPrior {
    /// Log density up to an additive constant; constants never affect the
    /// optimizer or the score comparisons downstream.
    fn log_density_unnorm(&self, theta: f64) -> f64 {
        let z = (theta - self.location) / self.scale;
        -0.5 * (self.df + 1.0) * (z * z / self.df).ln_1p()
    }

    fn d_log_density(&self, theta: f64) -> f64 {
        let z = (theta - self.location) / self.scale;
        -(self.df + 1.0) * z / ((self.df + z * z) * self.scale)
    }

    fn d2_log_density(&self, theta: f64) -> f64 {
        let z = (theta - self.location) / self.scale;
        let denom = self.df + z * z;
        -(self.df + 1.0) * (self.df - z * z) / (denom * denom * self.scale * self.scale)
    }
}

/// Fitted parameter plus density threshold for one group's level set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSetPair {
    pub theta_hat: f64,
    pub t: f64,
}

/// MLE of the Gaussian mean: the sample mean.
pub fn fit_gaussian_mean(sample: &RealSample) -> GaussianModel {
    GaussianModel {
        theta_hat: sample.mean(),
    }
}

/// Analytic inversion of `{y : p(y; theta_hat) >= t}` for the `N(theta, 1)`
/// working model: `[theta - r, theta + r]` with `r = sqrt(-2 ln(t sqrt(2 pi)))`.
/// Empty above the density peak; the single point `theta_hat` at it. A few
/// ulps of slack absorb the round trip through a computed density value.
pub fn gaussian_level_interval(pair: &LevelSetPair) -> IntervalSet {
    let a = pair.t * SQRT_TWO_PI;
    if a > 1.0 + 8.0 * f64::EPSILON {
        return IntervalSet::empty();
    }
    let r = (-2.0 * a.min(1.0).ln()).sqrt();
    IntervalSet::single(pair.theta_hat - r, pair.theta_hat + r)
}

/// Density threshold `Z_(m)` with `m = floor(n * beta)`: the beta-quantile of
/// the fitted density values, so `{y : p(y) >= t}` holds mass about `1 - beta`.
pub fn level_set_threshold(density_values: &RealSample, beta: f64) -> Result<f64> {
    let n = density_values.len();
    let m = (n as f64 * beta).floor() as usize;
    if m == 0 || m > n {
        return Err(Error::LevelOutOfRange { m, n });
    }
    let mut sorted = density_values.values().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[m - 1])
}

/// Split-conformal level set for one group under the Gaussian working model.
///
/// Indices are randomly partitioned into halves; the first half (which takes
/// the extra element for odd sizes) fits `theta_hat`, the second half selects
///
/// ```text
/// t = min { p(y_i) : #{l in I2 : p(y_l) <= p(y_i)} > (|I2| + 1) delta - 1 }
/// ```
pub fn split_level_set(group: &[f64], delta: f64, rng: &mut impl Rng) -> Result<LevelSetPair> {
    if group.len() < 2 {
        return Err(Error::GroupTooSmall {
            index: 0,
            got: group.len(),
            required: 2,
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidRate {
            name: "delta",
            value: delta,
        });
    }
    let mut idx: Vec<usize> = (0..group.len()).collect();
    idx.shuffle(rng);
    let n_fit = group.len().div_ceil(2);
    let (fit_idx, calib_idx) = idx.split_at(n_fit);

    let theta_hat = fit_idx.iter().map(|&i| group[i]).sum::<f64>() / n_fit as f64;
    let model = GaussianModel { theta_hat };

    let mut densities: Vec<f64> = calib_idx.iter().map(|&i| model.density(group[i])).collect();
    densities.sort_unstable_by(f64::total_cmp);
    let n2 = densities.len();
    let bound = (n2 + 1) as f64 * delta - 1.0;
    for j in 0..n2 {
        let count_le = densities.partition_point(|&d| d <= densities[j]);
        if count_le as f64 > bound {
            return Ok(LevelSetPair {
                theta_hat,
                t: densities[j],
            });
        }
    }
    // The largest density always qualifies for delta < 1.
    unreachable!("level-set threshold selection found no qualifying density")
}

/// Split-conformal threshold over conditional densities `p(y_i | x_i; theta)`,
/// the supervised analog of [`split_level_set`]'s selection rule.
pub(crate) fn conditional_threshold(densities: &mut [f64], delta: f64) -> f64 {
    densities.sort_unstable_by(f64::total_cmp);
    let n2 = densities.len();
    let bound = (n2 + 1) as f64 * delta - 1.0;
    for j in 0..n2 {
        let count_le = densities.partition_point(|&d| d <= densities[j]);
        if count_le as f64 > bound {
            return densities[j];
        }
    }
    unreachable!("threshold selection found no qualifying density")
}

const THETA_DIVERGENCE_LIMIT: f64 = 1e3;
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 100;

/// How to fit the one-parameter logistic model inside conformal scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogisticFitter {
    /// Plain maximum likelihood; fails on separated or degenerate data.
    Mle,
    /// Posterior mode under a Student-t prior; total.
    Map(TPrior),
}

impl LogisticFitter {
    pub fn default_map() -> Self {
        Self::Map(TPrior::default())
    }

    pub fn fit(&self, pairs: &[(f64, u8)]) -> Result<LogisticModel> {
        match self {
            Self::Mle => fit_logistic_mle(pairs),
            Self::Map(prior) => Ok(fit_logistic_map(pairs, prior)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mle => "mle",
            Self::Map(_) => "map",
        }
    }
}

fn objective(pairs: &[(f64, u8)], prior: Option<&TPrior>, theta: f64) -> f64 {
    let loglik: f64 = pairs
        .iter()
        .map(|&(x, y)| {
            let u = theta * x;
            y as f64 * u - log1p_exp(u)
        })
        .sum();
    loglik + prior.map_or(0.0, |p| p.log_density_unnorm(theta))
}

fn gradient(pairs: &[(f64, u8)], prior: Option<&TPrior>, theta: f64) -> f64 {
    let g: f64 = pairs
        .iter()
        .map(|&(x, y)| x * (y as f64 - sigmoid(theta * x)))
        .sum();
    g + prior.map_or(0.0, |p| p.d_log_density(theta))
}

fn hessian(pairs: &[(f64, u8)], prior: Option<&TPrior>, theta: f64) -> f64 {
    let h: f64 = pairs
        .iter()
        .map(|&(x, _)| {
            let s = sigmoid(theta * x);
            -x * x * s * (1.0 - s)
        })
        .sum();
    h + prior.map_or(0.0, |p| p.d2_log_density(theta))
}

/// Newton iteration with step halving. `None` when it diverges or stalls.
fn newton(pairs: &[(f64, u8)], prior: Option<&TPrior>, start: f64) -> Option<f64> {
    let mut theta = start;
    for _ in 0..MAX_NEWTON_ITERS {
        let g = gradient(pairs, prior, theta);
        if g.abs() < GRAD_TOL {
            return Some(theta);
        }
        let h = hessian(pairs, prior, theta);
        // Fall back to an uphill unit step where the objective is not concave.
        let mut step = if h < 0.0 { -g / h } else { g.signum() };
        let f0 = objective(pairs, prior, theta);
        let mut advanced = false;
        for _ in 0..60 {
            let cand = theta + step;
            if objective(pairs, prior, cand) > f0 {
                theta = cand;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced || !theta.is_finite() || theta.abs() > THETA_DIVERGENCE_LIMIT {
            return None;
        }
    }
    None
}

/// Golden-section maximization of the penalized objective on `[-1e3, 1e3]`.
fn golden_section(pairs: &[(f64, u8)], prior: Option<&TPrior>) -> f64 {
    const INV_PHI: f64 = 0.6180339887498949;
    let (mut a, mut b) = (-THETA_DIVERGENCE_LIMIT, THETA_DIVERGENCE_LIMIT);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(pairs, prior, c);
    let mut fd = objective(pairs, prior, d);
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(pairs, prior, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(pairs, prior, d);
        }
    }
    0.5 * (a + b)
}

/// Beyond this magnitude the fitted probabilities are saturated to within
/// 1e-13 at |x| = 1; an unpenalized optimum out here means the likelihood is
/// climbing its separation asymptote rather than a genuine interior maximum.
const MLE_SATURATION_LIMIT: f64 = 30.0;

/// Maximum-likelihood fit. Separation drives the optimum to infinity, which
/// surfaces as [`Error::MleDiverged`].
pub fn fit_logistic_mle(pairs: &[(f64, u8)]) -> Result<LogisticModel> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    match newton(pairs, None, 0.0) {
        Some(theta_hat) if theta_hat.abs() <= MLE_SATURATION_LIMIT => {
            Ok(LogisticModel { theta_hat })
        }
        _ => Err(Error::MleDiverged),
    }
}

/// Posterior-mode fit under a Student-t prior. The prior keeps the optimum
/// finite, so this is total: Newton with step halving first, bounded
/// golden-section search if Newton cycles on the non-concave objective.
pub fn fit_logistic_map(pairs: &[(f64, u8)], prior: &TPrior) -> LogisticModel {
    let theta_hat = newton(pairs, Some(prior), prior.location)
        .unwrap_or_else(|| golden_section(pairs, Some(prior)));
    LogisticModel { theta_hat }
}

/// Positive-part James-Stein shrinkage of group means toward the grand mean,
/// with known within-group variance `sigma2 / n_per_group`:
///
/// ```text
/// mu_j = gbar + max(0, 1 - (k-3) * (sigma2/n) / S) * (ybar_j - gbar),
/// S = sum_j (ybar_j - gbar)^2
/// ```
///
/// All means collapse to the grand mean when `S = 0`.
pub fn james_stein(group_means: &RealSample, sigma2: f64, n_per_group: usize) -> Result<Vec<f64>> {
    let k = group_means.len();
    if k < 4 {
        return Err(Error::TooFewGroups {
            required: 4,
            got: k,
        });
    }
    let grand = group_means.mean();
    let s: f64 = group_means.iter().map(|&m| (m - grand).powi(2)).sum();
    if s == 0.0 {
        return Ok(vec![grand; k]);
    }
    let noise = sigma2 / n_per_group as f64;
    let factor = (1.0 - (k - 3) as f64 * noise / s).max(0.0);
    Ok(group_means
        .iter()
        .map(|&m| grand + factor * (m - grand))
        .collect())
}
