//! Unsupervised prediction sets for a new group's observation.

use rand::Rng;

use crate::conformal::MeanConformal;
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};
use crate::kde::Kde2d;
use crate::methods::randomset::{gaussian_t_grid, PairCloud};
use crate::methods::{pvalue_floor_reaches, IntervalPrediction};
use crate::models::{gaussian_level_interval, split_level_set, LevelSetPair};
use crate::sample::{GroupedReal, RealSample};

fn mean_engine(values: Vec<f64>) -> MeanConformal {
    MeanConformal::new(&RealSample::new(values).expect("validated grouped data"))
}

/// Naive method: pool everything and run full conformal as if iid.
///
/// Valid only when the groups really are one distribution; kept as the
/// baseline the other methods are compared against.
pub fn naive_unsup(data: &GroupedReal, alpha: f64) -> IntervalPrediction {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let pooled = data.pooled();
    let m = pooled.len();
    let set = mean_engine(pooled).interval(alpha);
    IntervalPrediction {
        set,
        guaranteed_full: pvalue_floor_reaches(m, alpha),
        degenerate: false,
    }
}

/// Method I: draw one observation per group (an iid sample from the mixture),
/// build a conformal interval at level `1 - alpha/N`, repeat `N` times, and
/// intersect.
pub fn subsample_unsup(
    data: &GroupedReal,
    alpha: f64,
    n_subsamples: u32,
    rng: &mut impl Rng,
) -> IntervalPrediction {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    assert!(n_subsamples >= 1, "need at least one subsampling round");
    let k = data.k();
    let level = alpha / n_subsamples as f64;
    if pvalue_floor_reaches(k, level) {
        return IntervalPrediction::full_by_arithmetic();
    }
    let mut set = IntervalSet::whole_line();
    for _ in 0..n_subsamples {
        let draws: Vec<f64> = data
            .groups()
            .iter()
            .map(|g| g[rng.random_range(0..g.len())])
            .collect();
        let round = mean_engine(draws).interval(level);
        set = set.intersect(&round);
    }
    IntervalPrediction::plain(set)
}

fn fit_level_set_pairs(
    data: &GroupedReal,
    delta: f64,
    rng: &mut impl Rng,
) -> Result<Vec<LevelSetPair>> {
    data.groups()
        .iter()
        .enumerate()
        .map(|(index, g)| {
            split_level_set(g, delta, rng).map_err(|e| match e {
                Error::GroupTooSmall { got, required, .. } => Error::GroupTooSmall {
                    index,
                    got,
                    required,
                },
                other => other,
            })
        })
        .collect()
}

/// Method II, mean variant: split-fit a level-set pair per group, build the
/// conformal region `B` over the pairs with standardized mean residuals, and
/// return the union of the Gaussian level intervals spanned by each `t`-slice
/// of `B`.
pub fn randomset_mean_unsup(
    data: &GroupedReal,
    delta: f64,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<IntervalPrediction> {
    if data.k() < 2 {
        return Err(Error::TooFewGroups {
            required: 2,
            got: data.k(),
        });
    }
    validate_rate("epsilon", epsilon)?;
    if pvalue_floor_reaches(data.k(), epsilon) {
        return Ok(IntervalPrediction::full_by_arithmetic());
    }
    let pairs = fit_level_set_pairs(data, delta, rng)?;
    let cloud = PairCloud::new(&pairs);

    let mut pieces: Vec<Interval> = Vec::new();
    for t in extend_grid(gaussian_t_grid(), &pairs) {
        if let Some((theta_min, theta_max)) = cloud.theta_span_at(t, epsilon) {
            // Union over theta in [min, max] of [theta - r, theta + r].
            if let Some(radius) = level_radius(t) {
                pieces.push(Interval::new(theta_min - radius, theta_max + radius));
            }
        }
    }
    let set = IntervalSet::from_intervals(pieces);
    let degenerate = set.is_empty();
    Ok(IntervalPrediction {
        set,
        guaranteed_full: false,
        degenerate,
    })
}

/// The slice thresholds to traverse: the fixed grid plus the fitted `t_j`
/// values, so the region is visited where the pairs actually sit even when
/// their spread collapses between grid points.
fn extend_grid(mut grid: Vec<f64>, pairs: &[LevelSetPair]) -> Vec<f64> {
    grid.extend(pairs.iter().map(|p| p.t));
    grid.sort_unstable_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Half-width of `{y : phi(y - theta) >= t}`; `None` above the density peak.
fn level_radius(t: f64) -> Option<f64> {
    let set = gaussian_level_interval(&LevelSetPair { theta_hat: 0.0, t });
    set.intervals().first().map(|iv| iv.hi)
}

/// Method II, KDE variant: the region `B` is the `b_eps` super-level set of a
/// bivariate kernel density estimate over the pairs; theta is scanned in
/// steps of 0.01 and each scanned theta contributes the level interval of the
/// smallest qualifying `t`.
pub fn randomset_kde_unsup(
    data: &GroupedReal,
    delta: f64,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<IntervalPrediction> {
    if data.k() < 4 {
        return Err(Error::TooFewGroups {
            required: 4,
            got: data.k(),
        });
    }
    validate_rate("epsilon", epsilon)?;
    if pvalue_floor_reaches(data.k(), epsilon) {
        return Ok(IntervalPrediction::full_by_arithmetic());
    }
    let pairs = fit_level_set_pairs(data, delta, rng)?;
    let points: Vec<(f64, f64)> = pairs.iter().map(|p| (p.theta_hat, p.t)).collect();
    let kde = Kde2d::new(points)?;
    let b_eps = kde.mass_level(epsilon).b_eps;
    let grid = gaussian_t_grid();

    let mut pieces: Vec<Interval> = Vec::new();
    for (theta, t_min) in kde.region_theta_scan(b_eps, 0.01, &grid) {
        if let Some(radius) = level_radius(t_min) {
            pieces.push(Interval::new(theta - radius, theta + radius));
        }
    }
    let set = IntervalSet::from_intervals(pieces);
    let degenerate = set.is_empty();
    Ok(IntervalPrediction {
        set,
        guaranteed_full: false,
        degenerate,
    })
}

fn validate_rate(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate { name, value })
    }
}
