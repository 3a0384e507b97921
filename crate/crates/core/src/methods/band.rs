//! Method III: random distribution functions via an empirical-CDF band.
//!
//! A split-conformal realization: the first half of the groups builds the
//! reference CDF `Fbar` (their averaged empirical CDFs), the second half
//! calibrates a Kolmogorov-Smirnov radius, and the band
//! `{F : d(F, Fbar) <= radius}` has exact envelope functions
//! `u = min(Fbar + radius, 1)` and `l = max(Fbar - radius, 0)`. The returned
//! interval is `[a, b]` with `a = u^-1(beta/2)` and `b = l^-1(1 - beta/2)`,
//! generalized inverses evaluated on the pooled sorted support extended by
//! +-infinity; this keeps `F(a) <= beta/2` and `F(b) >= 1 - beta/2` for every
//! CDF in the band.

use crate::conformal::split_conformal_threshold;
use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::methods::IntervalPrediction;
use crate::sample::{GroupedReal, RealSample};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A right-continuous step CDF with integer jump weights: each observation of
/// group `j` contributes `unit / n_j` weight units with
/// `unit = lcm of the group sizes`, so every cumulative value is a single
/// correctly rounded integer ratio rather than a drifting float sum.
struct StepCdf {
    xs: Vec<f64>,
    cum_units: Vec<u64>,
    total_units: u64,
}

impl StepCdf {
    /// Equal-weight average of the groups' empirical CDFs: each group
    /// contributes total weight `1 / n_groups`, spread over its points.
    fn average_ecdf(groups: &[Vec<f64>]) -> Self {
        // Exact for any realistic size mix; capped so pathological coprime
        // size lists cannot overflow the accumulator (weights then quantize
        // at 2^-40 relative resolution).
        const UNIT_CAP: u64 = 1 << 40;
        let unit = groups
            .iter()
            .map(|g| g.len() as u64)
            .fold(1u64, |acc, n| {
                let l = acc / gcd(acc, n) * n;
                if l > UNIT_CAP {
                    acc
                } else {
                    l
                }
            })
            .min(UNIT_CAP);
        let mut weighted: Vec<(f64, u64)> = Vec::new();
        for g in groups {
            let w = unit / g.len() as u64;
            weighted.extend(g.iter().map(|&v| (v, w)));
        }
        weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs: Vec<f64> = Vec::with_capacity(weighted.len());
        let mut cum_units: Vec<u64> = Vec::with_capacity(weighted.len());
        let mut acc = 0u64;
        for (x, w) in weighted {
            acc += w;
            if xs.last() == Some(&x) {
                *cum_units.last_mut().unwrap() = acc;
            } else {
                xs.push(x);
                cum_units.push(acc);
            }
        }
        Self {
            xs,
            cum_units,
            total_units: unit * groups.len() as u64,
        }
    }

    fn value_at(&self, idx: usize) -> f64 {
        self.cum_units[idx] as f64 / self.total_units as f64
    }

    fn eval(&self, y: f64) -> f64 {
        let idx = self.xs.partition_point(|&x| x <= y);
        if idx == 0 {
            0.0
        } else {
            self.value_at(idx - 1)
        }
    }
}

/// Kolmogorov-Smirnov distance between a group's empirical CDF and a step
/// reference: one merge sweep over the union of jump points, comparing both
/// functions just before and at every jump.
fn ks_distance(sorted_group: &[f64], reference: &StepCdf) -> f64 {
    let n = sorted_group.len() as f64;
    let mut best = 0.0f64;
    let mut i = 0;
    let mut j = 0;
    let (mut f_group, mut f_ref) = (0.0f64, 0.0f64);
    while i < sorted_group.len() || j < reference.xs.len() {
        let gx = sorted_group.get(i).copied().unwrap_or(f64::INFINITY);
        let rx = reference.xs.get(j).copied().unwrap_or(f64::INFINITY);
        let x = gx.min(rx);
        // Left limits at x.
        best = best.max((f_group - f_ref).abs());
        if gx == x {
            while i < sorted_group.len() && sorted_group[i] == x {
                i += 1;
            }
            f_group = i as f64 / n;
        }
        if rx == x {
            f_ref = reference.value_at(j);
            j += 1;
        }
        // Values at x.
        best = best.max((f_group - f_ref).abs());
    }
    best
}

/// CDF-band prediction interval for an observation from a fresh group.
///
/// `beta` is the mass the interval may miss inside the band, `gamma` the
/// conformal level of the band itself; total miscoverage is at most
/// `beta + gamma` plus the empirical-CDF plug-in error. A radius of 1 or more
/// makes the band vacuous: the whole line is returned with the `degenerate`
/// flag set.
pub fn cdf_band(data: &GroupedReal, beta: f64, gamma: f64) -> Result<IntervalPrediction> {
    if data.k() < 4 {
        return Err(Error::TooFewGroups {
            required: 4,
            got: data.k(),
        });
    }
    for (name, value) in [("beta", beta), ("gamma", gamma)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidRate { name, value });
        }
    }
    let n_fit = data.k().div_ceil(2);
    let (fit_groups, calib_groups) = data.groups().split_at(n_fit);
    let fbar = StepCdf::average_ecdf(fit_groups);

    let residuals: Vec<f64> = calib_groups
        .iter()
        .map(|g| {
            let mut sorted = g.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            ks_distance(&sorted, &fbar)
        })
        .collect();
    let radius = split_conformal_threshold(&RealSample::new(residuals).expect("k >= 4"), gamma)?;

    if radius >= 1.0 {
        return Ok(IntervalPrediction {
            set: IntervalSet::whole_line(),
            guaranteed_full: false,
            degenerate: true,
        });
    }

    // Generalized inverses on the pooled sorted support extended by +-inf:
    // a = sup{y : u(y) <= beta/2}, b = inf{y : l(y) >= 1 - beta/2}.
    let mut support = data.pooled();
    support.sort_unstable_by(f64::total_cmp);
    let upper = |y: f64| (fbar.eval(y) + radius).min(1.0);
    let lower = |y: f64| (fbar.eval(y) - radius).max(0.0);

    let half = beta / 2.0;
    let a = support
        .iter()
        .rev()
        .find(|&&y| upper(y) <= half)
        .copied()
        .unwrap_or(f64::NEG_INFINITY);
    let b = support
        .iter()
        .find(|&&y| lower(y) >= 1.0 - half)
        .copied()
        .unwrap_or(f64::INFINITY);

    Ok(IntervalPrediction::plain(IntervalSet::single(a, b)))
}
