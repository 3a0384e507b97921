//! Supervised (binary-response) prediction sets for a new group.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::conformal::{binary_conformal_set, LabelSet};
use crate::error::{Error, Result};
use crate::kde::Kde2d;
use crate::methods::randomset::{logistic_t_grid, PairCloud};
use crate::methods::{pvalue_floor_reaches, LabelPrediction, RandomSetVariant};
use crate::models::{conditional_threshold, LevelSetPair, LogisticFitter, LogisticModel};
use crate::sample::GroupedPairs;

/// Naive method: pool all pairs across groups and run full conformal with the
/// logistic-residual score.
pub fn naive_sup(
    data: &GroupedPairs,
    x_star: f64,
    alpha: f64,
    fitter: &LogisticFitter,
) -> Result<LabelPrediction> {
    let pooled = data.pooled();
    let guaranteed_full = pvalue_floor_reaches(pooled.len(), alpha);
    let set = binary_conformal_set(&pooled, x_star, alpha, fitter)?;
    Ok(LabelPrediction {
        set,
        guaranteed_full,
        degenerate: false,
    })
}

/// Method I: one pair per group per round, each round tested at `alpha / N`,
/// rounds intersected.
pub fn subsample_sup(
    data: &GroupedPairs,
    x_star: f64,
    alpha: f64,
    n_subsamples: u32,
    fitter: &LogisticFitter,
    rng: &mut impl Rng,
) -> Result<LabelPrediction> {
    assert!(n_subsamples >= 1, "need at least one subsampling round");
    let k = data.k();
    let level = alpha / n_subsamples as f64;
    if pvalue_floor_reaches(k, level) {
        return Ok(LabelPrediction::full_by_arithmetic());
    }
    let mut set = LabelSet::full();
    for _ in 0..n_subsamples {
        let draws: Vec<(f64, u8)> = data
            .groups()
            .iter()
            .map(|g| g[rng.random_range(0..g.len())])
            .collect();
        let round = binary_conformal_set(&draws, x_star, level, fitter)?;
        set = set.intersect(&round);
    }
    Ok(LabelPrediction::plain(set))
}

/// Split-fit one `(theta_hat, t)` pair per group: the first half of a random
/// split fits the logistic parameter, the second half selects the threshold
/// over conditional densities `p(y_i | x_i; theta_hat)`.
fn fit_pairs(
    data: &GroupedPairs,
    delta: f64,
    fitter: &LogisticFitter,
    rng: &mut impl Rng,
) -> Result<Vec<LevelSetPair>> {
    data.groups()
        .iter()
        .enumerate()
        .map(|(index, g)| {
            if g.len() < 2 {
                return Err(Error::GroupTooSmall {
                    index,
                    got: g.len(),
                    required: 2,
                });
            }
            let mut idx: Vec<usize> = (0..g.len()).collect();
            idx.shuffle(rng);
            let n_fit = g.len().div_ceil(2);
            let (fit_idx, calib_idx) = idx.split_at(n_fit);
            let fit_pairs: Vec<(f64, u8)> = fit_idx.iter().map(|&i| g[i]).collect();
            let model = fitter.fit(&fit_pairs)?;
            let mut densities: Vec<f64> = calib_idx
                .iter()
                .map(|&i| {
                    let (x, y) = g[i];
                    model.cond_density(y, x)
                })
                .collect();
            let t = conditional_threshold(&mut densities, delta);
            Ok(LevelSetPair {
                theta_hat: model.theta_hat,
                t,
            })
        })
        .collect()
}

/// Larger of `p(y | x_star; theta)` over `theta` in `[theta_min, theta_max]`.
/// The logistic probability is monotone in `theta`, so only the endpoints
/// matter.
fn max_cond_density(y: u8, x_star: f64, theta_min: f64, theta_max: f64) -> f64 {
    let at = |theta: f64| LogisticModel { theta_hat: theta }.cond_density(y, x_star);
    at(theta_min).max(at(theta_max))
}

/// Method II for binary responses: level sets `{y : p(y | x; theta) > t}`
/// with the region over `(theta_hat, t)` built by the chosen variant. A label
/// enters the set iff some pair in the region assigns it conditional density
/// strictly above its threshold.
pub fn randomset_sup(
    data: &GroupedPairs,
    x_star: f64,
    delta: f64,
    epsilon: f64,
    variant: RandomSetVariant,
    fitter: &LogisticFitter,
    rng: &mut impl Rng,
) -> Result<LabelPrediction> {
    let required = match variant {
        RandomSetVariant::Mean => 2,
        RandomSetVariant::Kde => 4,
    };
    if data.k() < required {
        return Err(Error::TooFewGroups {
            required,
            got: data.k(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidRate {
            name: "epsilon",
            value: epsilon,
        });
    }
    if pvalue_floor_reaches(data.k(), epsilon) {
        return Ok(LabelPrediction::full_by_arithmetic());
    }
    let pairs = fit_pairs(data, delta, fitter, rng)?;
    let mut set = LabelSet::empty();
    let mut nonempty_region = false;

    match variant {
        RandomSetVariant::Mean => {
            // Traverse the fixed thresholds plus the fitted ones, so the
            // region is visited even when the pair spread collapses.
            let mut grid = logistic_t_grid();
            grid.extend(pairs.iter().map(|p| p.t));
            grid.sort_unstable_by(f64::total_cmp);
            grid.dedup();
            let cloud = PairCloud::new(&pairs);
            for &t in &grid {
                if set.is_full() {
                    break;
                }
                if let Some((theta_min, theta_max)) = cloud.theta_span_at(t, epsilon) {
                    nonempty_region = true;
                    if max_cond_density(1, x_star, theta_min, theta_max) > t {
                        set.contains_one = true;
                    }
                    if max_cond_density(0, x_star, theta_min, theta_max) > t {
                        set.contains_zero = true;
                    }
                }
            }
        }
        RandomSetVariant::Kde => {
            let grid = logistic_t_grid();
            let points: Vec<(f64, f64)> = pairs.iter().map(|p| (p.theta_hat, p.t)).collect();
            let kde = Kde2d::new(points)?;
            let b_eps = kde.mass_level(epsilon).b_eps;
            for (theta, t_min) in kde.region_theta_scan(b_eps, 0.01, &grid) {
                nonempty_region = true;
                let model = LogisticModel { theta_hat: theta };
                if model.cond_density(1, x_star) > t_min {
                    set.contains_one = true;
                }
                if model.cond_density(0, x_star) > t_min {
                    set.contains_zero = true;
                }
                if set.is_full() {
                    break;
                }
            }
        }
    }
    Ok(LabelPrediction {
        set,
        guaranteed_full: false,
        degenerate: !nonempty_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn logistic_design(k: usize, n: usize, mu: f64, tau: f64, seed: u64) -> GroupedPairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = (0..k)
            .map(|_| {
                let theta = mu + tau * rng.sample::<f64, _>(StandardNormal);
                (0..n)
                    .map(|_| {
                        let x: f64 = rng.sample(StandardNormal);
                        (x, u8::from(rng.random::<f64>() < sigmoid(theta * x)))
                    })
                    .collect()
            })
            .collect();
        GroupedPairs::supervised(groups).unwrap()
    }

    #[test]
    fn naive_single_group_matches_binary_set() {
        let data = logistic_design(1, 3, 1.0, 0.1, 1);
        let fitter = LogisticFitter::default_map();
        let direct = binary_conformal_set(&data.pooled(), 0.5, 0.3, &fitter).unwrap();
        let pred = naive_sup(&data, 0.5, 0.3, &fitter).unwrap();
        assert_eq!(pred.set, direct);
        // 4 augmented points and alpha = 0.1: the floor forces {0, 1}.
        let small = naive_sup(&data, 0.5, 0.1, &fitter).unwrap();
        assert!(small.guaranteed_full && small.set.is_full());
    }

    #[test]
    fn subsample_guard_and_monotonicity() {
        let fitter = LogisticFitter::default_map();
        let data = logistic_design(5, 4, 0.0, 1.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred = subsample_sup(&data, 0.3, 0.1, 1, &fitter, &mut rng).unwrap();
        assert!(pred.guaranteed_full);

        // Intersection is contained in its first round (same rng replayed).
        let data = logistic_design(120, 6, 1.0, 0.1, 4);
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let both = subsample_sup(&data, 0.8, 0.2, 2, &fitter, &mut rng_a).unwrap();
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<(f64, u8)> = data
            .groups()
            .iter()
            .map(|g| g[rng_b.random_range(0..g.len())])
            .collect();
        let round = binary_conformal_set(&draws, 0.8, 0.1, &fitter).unwrap();
        assert_eq!(both.set.intersect(&round), both.set);
    }

    #[test]
    fn randomset_sup_guard_and_full_at_diffuse_design() {
        let fitter = LogisticFitter::default_map();
        let data = logistic_design(12, 8, 0.0, 1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pred = randomset_sup(
            &data,
            0.4,
            0.05,
            0.05,
            RandomSetVariant::Mean,
            &fitter,
            &mut rng,
        )
        .unwrap();
        assert!(pred.guaranteed_full && pred.set.is_full());

        // mu = 0, tau = 1: the method returns {0, 1} essentially always.
        let data = logistic_design(60, 20, 0.0, 1.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pred = randomset_sup(
            &data,
            0.4,
            0.05,
            0.05,
            RandomSetVariant::Mean,
            &fitter,
            &mut rng,
        )
        .unwrap();
        assert!(pred.set.is_full());
    }

    #[test]
    fn randomset_sup_kde_runs_and_covers_consistent_label() {
        let fitter = LogisticFitter::default_map();
        let data = logistic_design(60, 30, 1.0, 0.1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pred = randomset_sup(
            &data,
            2.0,
            0.05,
            0.05,
            RandomSetVariant::Kde,
            &fitter,
            &mut rng,
        )
        .unwrap();
        // theta near 1 and x_star = 2: label 1 is the consistent one.
        assert!(pred.set.contains_one);
    }

    #[test]
    fn randomset_sup_requires_group_count() {
        let fitter = LogisticFitter::default_map();
        let data = logistic_design(3, 10, 1.0, 0.1, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        assert!(randomset_sup(
            &data,
            0.0,
            0.05,
            0.05,
            RandomSetVariant::Kde,
            &fitter,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn t_zero_slice_admits_both_labels() {
        // With the t = 0 slice in the region, every label has positive
        // conditional density, so the set is {0, 1}.
        let fitter = LogisticFitter::default_map();
        let data = logistic_design(40, 10, 0.0, 1.0, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pred = randomset_sup(
            &data,
            0.0,
            0.2,
            0.2,
            RandomSetVariant::Mean,
            &fitter,
            &mut rng,
        )
        .unwrap();
        assert!(!pred.degenerate);
        assert!(pred.set.is_full());
    }
}
