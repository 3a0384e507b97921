//! Exchangeability-based conformal machinery.
//!
//! The unsupervised score is the absolute deviation from the augmented mean:
//! with data `Y_1..Y_m` augmented by a candidate `y`, the p-value is
//!
//! ```text
//! pi(y) = (m+1)^-1 * #{ i <= m+1 : |Y_i - Ybar_y| >= |y - Ybar_y| }
//! ```
//!
//! where `Ybar_y` is the mean of the augmented sample. `pi` is unimodal about
//! the sample mean `c` with `pi(c) = 1`, which justifies inverting the test by
//! bracketing outward from `c` and bisecting. Ties use `>=` exactly as
//! written, so ties inflate the p-value; there is no randomized tie-breaking.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::models::LogisticFitter;
use crate::sample::RealSample;
use crate::solver;

/// A conformal p-value: a rational `j / (m+1)` with `j >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PValue {
    numerator: usize,
    denominator: usize,
}

impl PValue {
    pub(crate) fn new(numerator: usize, denominator: usize) -> Self {
        debug_assert!(numerator >= 1 && numerator <= denominator);
        Self {
            numerator,
            denominator,
        }
    }

    pub fn numerator(&self) -> usize {
        self.numerator
    }

    pub fn denominator(&self) -> usize {
        self.denominator
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Test `pi >= level`.
    pub fn at_least(&self, level: f64) -> bool {
        self.value() >= level
    }
}

/// Subset of the binary label space `{0, 1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelSet {
    pub contains_zero: bool,
    pub contains_one: bool,
}

impl LabelSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self {
            contains_zero: true,
            contains_one: true,
        }
    }

    pub fn contains(&self, label: u8) -> bool {
        match label {
            0 => self.contains_zero,
            1 => self.contains_one,
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        usize::from(self.contains_zero) + usize::from(self.contains_one)
    }

    pub fn is_full(&self) -> bool {
        self.contains_zero && self.contains_one
    }

    pub fn intersect(&self, other: &LabelSet) -> LabelSet {
        LabelSet {
            contains_zero: self.contains_zero && other.contains_zero,
            contains_one: self.contains_one && other.contains_one,
        }
    }
}

/// Evaluator for the mean-residual conformal p-value over one sample.
///
/// Sorting once makes each query `O(log m)`: counting
/// `|Y_i - c| >= r` splits into two binary searches, one per arm of the
/// absolute value. `fl(c - v)` is monotone in `v` and `fl(v - c) = -fl(c - v)`
/// exactly, so the counts match a direct evaluation of the definition
/// bit-for-bit.
#[derive(Clone, Debug)]
pub struct MeanConformal {
    sorted: Vec<f64>,
    sum: f64,
}

impl MeanConformal {
    pub fn new(sample: &RealSample) -> Self {
        let mut sorted = sample.values().to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let sum = sorted.iter().sum();
        Self { sorted, sum }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.sorted.len() as f64
    }

    fn range(&self) -> f64 {
        self.sorted[self.sorted.len() - 1] - self.sorted[0]
    }

    /// `#{i <= m : |Y_i - c| >= r}` over the unaugmented sample.
    fn count_abs_dev_at_least(&self, c: f64, r: f64) -> usize {
        let m = self.sorted.len();
        let left = self.sorted.partition_point(|&v| c - v >= r);
        let right = m - self.sorted.partition_point(|&v| v - c < r);
        if r == 0.0 {
            // Both arms count elements equal to c; drop the double count.
            let eq = self.sorted.partition_point(|&v| v - c <= 0.0)
                - self.sorted.partition_point(|&v| v - c < 0.0);
            left + right - eq
        } else {
            left + right
        }
    }

    /// Conformal p-value for the hypothesis `Y_{m+1} = y`.
    pub fn pvalue(&self, y: f64) -> PValue {
        let m = self.sorted.len();
        if m == 1 {
            // Both residuals equal |y - Y_1| / 2 identically, so pi is 1 for
            // every y. Evaluating through the rounded augmented mean would
            // break this exact tie at ulp scale.
            return PValue::new(2, 2);
        }
        let mean_aug = (self.sum + y) / (m + 1) as f64;
        let r = (y - mean_aug).abs();
        // The augmented point always satisfies its own indicator.
        PValue::new(self.count_abs_dev_at_least(mean_aug, r) + 1, m + 1)
    }

    /// Invert the test: `{y : pi(y) >= alpha}`, a single interval around the
    /// sample mean. Whole line whenever `alpha <= 1/(m+1)`.
    pub fn interval(&self, alpha: f64) -> IntervalSet {
        assert!(
            alpha > 0.0 && alpha < 1.0,
            "alpha must lie in (0, 1), got {alpha}"
        );
        let m = self.sorted.len();
        if alpha <= 1.0 / (m + 1) as f64 {
            return IntervalSet::whole_line();
        }
        let center = self.mean();
        let scale = self.range() + 1.0;
        let pred = |y: f64| self.pvalue(y).at_least(alpha);
        let lo = solver::boundary_from(pred, center, -1.0, scale);
        let hi = solver::boundary_from(pred, center, 1.0, scale);
        IntervalSet::single(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
    }
}

/// Conformal p-value with the mean residual for a single candidate `y`.
///
/// Builds the sorted evaluator each call; use [`MeanConformal`] directly for
/// repeated queries against one sample.
pub fn conformal_pvalue_mean(sample: &RealSample, y: f64) -> PValue {
    MeanConformal::new(sample).pvalue(y)
}

/// Full conformal interval `{y : pi(y) >= alpha}` for the mean residual.
pub fn conformal_interval_mean(sample: &RealSample, alpha: f64) -> IntervalSet {
    MeanConformal::new(sample).interval(alpha)
}

/// Split-conformal score threshold: the `m`-th order statistic with
/// `m = ceil(n * (1 - alpha))`. The set `{y : score(y) <= t}` then covers at
/// rate `>= 1 - alpha` for exchangeable data.
pub fn split_conformal_threshold(scores: &RealSample, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::InvalidRate {
            name: "alpha",
            value: alpha,
        });
    }
    let n = scores.len();
    let m = (n as f64 * (1.0 - alpha)).ceil() as usize;
    if m == 0 || m > n {
        // alpha too small for n: no order statistic gives the requested level,
        // the caller must widen to the full support.
        return Err(Error::LevelOutOfRange { m, n });
    }
    let mut sorted = scores.values().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[m - 1])
}

/// Full conformal prediction set for a binary response at `x_star`.
///
/// For each candidate label the augmented sample is refit with the supplied
/// logistic fitter and the residuals are `R_i = |mu_hat(X_i) - Y_i|`; the
/// label enters the set iff its p-value reaches `alpha`.
pub fn binary_conformal_set(
    pairs: &[(f64, u8)],
    x_star: f64,
    alpha: f64,
    fitter: &LogisticFitter,
) -> Result<LabelSet> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut set = LabelSet::empty();
    let mut augmented = Vec::with_capacity(pairs.len() + 1);
    for label in [0u8, 1u8] {
        augmented.clear();
        augmented.extend_from_slice(pairs);
        augmented.push((x_star, label));
        let pv = binary_pvalue(&augmented, fitter)?;
        if pv.at_least(alpha) {
            match label {
                0 => set.contains_zero = true,
                _ => set.contains_one = true,
            }
        }
    }
    Ok(set)
}

/// p-value for the last element of an already-augmented sample.
fn binary_pvalue(augmented: &[(f64, u8)], fitter: &LogisticFitter) -> Result<PValue> {
    let model = fitter.fit(augmented)?;
    let residual = |&(x, y): &(f64, u8)| (model.prob_one(x) - y as f64).abs();
    let r_new = residual(augmented.last().expect("nonempty"));
    let count = augmented.iter().filter(|p| residual(p) >= r_new).count();
    Ok(PValue::new(count, augmented.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sample(values: &[f64]) -> RealSample {
        RealSample::new(values.to_vec()).unwrap()
    }

    /// Direct evaluation of the p-value definition, kept independent of the
    /// sorted fast path it checks.
    fn pvalue_by_definition(values: &[f64], y: f64) -> f64 {
        let m = values.len();
        let mean_aug = (values.iter().sum::<f64>() + y) / (m + 1) as f64;
        let r_new = (y - mean_aug).abs();
        let count = values
            .iter()
            .map(|v| (v - mean_aug).abs())
            .chain(std::iter::once(r_new))
            .filter(|&r| r >= r_new)
            .count();
        count as f64 / (m + 1) as f64
    }

    #[test]
    fn pvalue_at_mean_is_one() {
        for values in [vec![0.0], vec![1.0, 2.0, 4.0], vec![-3.0, 0.5, 0.5, 9.0]] {
            let s = sample(&values);
            assert_eq!(conformal_pvalue_mean(&s, s.mean()).value(), 1.0);
        }
    }

    #[test]
    fn pvalue_singleton_at_its_value() {
        assert_eq!(conformal_pvalue_mean(&sample(&[0.0]), 0.0).value(), 1.0);
    }

    #[test]
    fn pvalue_outlier_hand_computed() {
        // Ybar = 3.25, residuals {3.25, 2.25, 1.25, 6.75}: only the candidate
        // itself reaches 6.75.
        let pv = conformal_pvalue_mean(&sample(&[0.0, 1.0, 2.0]), 10.0);
        assert_eq!(pv.numerator(), 1);
        assert_eq!(pv.denominator(), 4);
    }

    #[test]
    fn pvalue_is_one_everywhere_for_single_observation() {
        let s = sample(&[3.7]);
        let eng = MeanConformal::new(&s);
        for y in [-1e9, -3.7, 0.0, 3.7, 1e-12, 1e9] {
            assert_eq!(eng.pvalue(y).value(), 1.0);
        }
        assert!(eng.interval(0.9).is_whole_line());
    }

    #[test]
    fn pvalue_matches_definition_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.random_range(2..40);
            let values: Vec<f64> = (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
                .collect();
            let s = sample(&values);
            let eng = MeanConformal::new(&s);
            for _ in 0..20 {
                let y: f64 = if rng.random_bool(0.3) {
                    // Exercise exact ties.
                    values[rng.random_range(0..m)]
                } else {
                    rng.sample::<f64, _>(StandardNormal) * 5.0
                };
                assert_eq!(eng.pvalue(y).value(), pvalue_by_definition(&values, y));
            }
            assert_eq!(eng.pvalue(s.mean()).value(), 1.0);
        }
    }

    #[test]
    fn interval_whole_line_when_alpha_below_floor() {
        // m = 3: floor is 1/4.
        let s = sample(&[0.0, 1.0, 2.0]);
        assert!(conformal_interval_mean(&s, 0.25).is_whole_line());
        assert!(conformal_interval_mean(&s, 0.1).is_whole_line());
        // A single observation always yields the whole line (all residuals tie).
        assert!(conformal_interval_mean(&sample(&[5.0]), 0.9).is_whole_line());
    }

    #[test]
    fn interval_contains_mean() {
        let s = sample(&[0.0, 1.0, 2.0]);
        let set = conformal_interval_mean(&s, 0.9);
        assert!(set.contains(1.0));
    }

    #[test]
    fn interval_endpoints_match_grid_brute_force() {
        let s = sample(&[0.0, 1.0, 2.0]);
        let alpha = 0.5;
        let set = conformal_interval_mean(&s, alpha);
        let iv = set.intervals()[0];

        // Oracle: evaluate pi on a fine grid and take the extreme qualifying y.
        let eng = MeanConformal::new(&s);
        let mut grid_lo = f64::INFINITY;
        let mut grid_hi = f64::NEG_INFINITY;
        let step = 1e-4;
        let mut y = -10.0;
        while y <= 10.0 {
            if eng.pvalue(y).at_least(alpha) {
                grid_lo = grid_lo.min(y);
                grid_hi = grid_hi.max(y);
            }
            y += step;
        }
        assert!((iv.lo - grid_lo).abs() <= 1e-3, "{} vs {}", iv.lo, grid_lo);
        assert!((iv.hi - grid_hi).abs() <= 1e-3, "{} vs {}", iv.hi, grid_hi);
    }

    #[test]
    fn inversion_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = rng.random_range(3..30);
            let values: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let s = sample(&values);
            let alpha = rng.random_range(0.3..0.8);
            let set = conformal_interval_mean(&s, alpha);
            if set.is_whole_line() {
                continue;
            }
            let eng = MeanConformal::new(&s);
            let iv = set.intervals()[0];
            let c = s.mean();
            // Just inside (toward the center) passes, 1e-3 outside fails.
            if iv.lo + 1e-3 < c {
                assert!(eng.pvalue(iv.lo + 1e-3).at_least(alpha));
            }
            if iv.hi - 1e-3 > c {
                assert!(eng.pvalue(iv.hi - 1e-3).at_least(alpha));
            }
            assert!(!eng.pvalue(iv.lo - 1e-3).at_least(alpha));
            assert!(!eng.pvalue(iv.hi + 1e-3).at_least(alpha));
        }
    }

    #[test]
    fn marginal_coverage_sandwich() {
        // 2000 replicates of n = 20 iid N(0,1) plus an independent test point:
        // empirical coverage of the 90% interval lands in [0.88, 0.95], the
        // lower edge from validity and the upper from the 1 - alpha + 1/(n+1)
        // anti-conservativeness bound.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut covered = 0usize;
        let reps = 2000;
        for _ in 0..reps {
            let values: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
            let test: f64 = rng.sample(StandardNormal);
            let set = conformal_interval_mean(&sample(&values), 0.1);
            if set.contains(test) {
                covered += 1;
            }
        }
        let rate = covered as f64 / reps as f64;
        assert!((0.88..=0.95).contains(&rate), "coverage {rate}");
    }

    #[test]
    fn split_threshold_order_statistics() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(split_conformal_threshold(&s, 0.2).unwrap(), 4.0);
        assert_eq!(
            split_conformal_threshold(&sample(&[7.0]), 0.5).unwrap(),
            7.0
        );
    }

    #[test]
    fn split_threshold_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let s = sample(&values);
        let t = split_conformal_threshold(&s, 0.1).unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(t, sorted[89]);
        let below = values.iter().filter(|&&v| v <= t).count();
        assert!(below as f64 / 100.0 >= 0.9);
    }

    proptest! {
        #[test]
        fn split_threshold_equals_sorted_index(
            n in 1usize..100,
            alpha_ix in 1usize..20,
            seed in 0u64..1000,
        ) {
            let alpha = alpha_ix as f64 * 0.04;
            prop_assume!(alpha < 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s = sample(&values);
            let m = (n as f64 * (1.0 - alpha)).ceil() as usize;
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(split_conformal_threshold(&s, alpha).unwrap(), sorted[m - 1]);
        }

        #[test]
        fn pvalue_range_and_unimodality(
            values in prop::collection::vec(-100.0f64..100.0, 1..30),
            seed in 0u64..500,
        ) {
            let s = sample(&values);
            let eng = MeanConformal::new(&s);
            let c = s.mean();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m1 = s.len() as f64 + 1.0;
            // Range bound everywhere.
            for _ in 0..20 {
                let y = rng.random_range(-200.0..200.0);
                let p = eng.pvalue(y).value();
                prop_assert!(p >= 1.0 / m1 - 1e-15 && p <= 1.0);
            }
            // Non-decreasing left of the mean, non-increasing right of it.
            let grid: Vec<f64> = (0..=80).map(|i| c - 40.0 + i as f64).collect();
            let ps: Vec<f64> = grid.iter().map(|&y| eng.pvalue(y).value()).collect();
            for i in 1..ps.len() {
                if grid[i] <= c {
                    prop_assert!(ps[i] + 1e-15 >= ps[i - 1]);
                }
                if grid[i - 1] >= c {
                    prop_assert!(ps[i] <= ps[i - 1] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn split_threshold_rejects_degenerate_levels() {
        let s = sample(&[1.0, 2.0]);
        assert!(matches!(
            split_conformal_threshold(&s, -0.5),
            Err(Error::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            split_conformal_threshold(&s, 1.0),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn binary_set_small_sample_is_full() {
        // With m+1 <= 1/alpha augmented points the p-value floor 1/(m+1)
        // already reaches alpha, so both labels are kept.
        let pairs = vec![(0.3, 1u8), (-0.2, 0u8)];
        let set = binary_conformal_set(&pairs, 0.1, 0.1, &LogisticFitter::default_map()).unwrap();
        assert!(set.is_full());
    }

    #[test]
    fn binary_set_keeps_consistent_label() {
        let pairs: Vec<(f64, u8)> = (1..=20).map(|i| (i as f64 / 4.0, 1u8)).collect();
        let set = binary_conformal_set(&pairs, 5.0, 0.5, &LogisticFitter::default_map()).unwrap();
        assert!(set.contains_one);
    }

    #[test]
    fn binary_set_agrees_with_pvalue_oracle() {
        // Independent recomputation of pi(0), pi(1) from the definition.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let theta = 5.0;
        let pairs: Vec<(f64, u8)> = (0..20)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let p = 1.0 / (1.0 + (-theta * x).exp());
                (x, u8::from(rng.random::<f64>() < p))
            })
            .collect();
        let x_star = 2.0;
        let alpha = 0.1;
        let fitter = LogisticFitter::default_map();
        let set = binary_conformal_set(&pairs, x_star, alpha, &fitter).unwrap();

        for label in [0u8, 1u8] {
            let mut aug = pairs.clone();
            aug.push((x_star, label));
            let model = fitter.fit(&aug).unwrap();
            let res: Vec<f64> = aug
                .iter()
                .map(|&(x, y)| (model.prob_one(x) - y as f64).abs())
                .collect();
            let r_new = res[res.len() - 1];
            let pi = res.iter().filter(|&&r| r >= r_new).count() as f64 / aug.len() as f64;
            assert_eq!(set.contains(label), pi >= alpha);
        }
    }
}
