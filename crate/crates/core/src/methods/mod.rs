//! Prediction-set constructions for grouped data.
//!
//! Every method here predicts an observation from a brand-new group (or, for
//! [`within_group_conformal`], a new observation on an existing group). Each
//! call is pure given its inputs and seed; replicate-level parallelism is the
//! harness's concern.

mod band;
mod randomset;
mod sup;
mod unsup;
mod within;

pub use band::cdf_band;
pub use sup::{naive_sup, randomset_sup, subsample_sup};
pub use unsup::{naive_unsup, randomset_kde_unsup, randomset_mean_unsup, subsample_unsup};
pub use within::{within_group_conformal, WithinGroupEstimator};

use crate::conformal::LabelSet;
use crate::interval::IntervalSet;

/// Which construction of the random-set region over `(theta_hat, t)` pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomSetVariant {
    /// Conformal p-values from standardized mean deviations of the pairs.
    Mean,
    /// Super-level set of a bivariate kernel density estimate.
    Kde,
}

impl RandomSetVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Kde => "kde",
        }
    }
}

/// An interval prediction set plus bookkeeping flags.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPrediction {
    pub set: IntervalSet,
    /// The parameters force the whole line before any data is touched
    /// (the p-value floor `1/(k+1)` already reaches the test level).
    pub guaranteed_full: bool,
    /// The construction degenerated (empty conformal region, vacuous band).
    pub degenerate: bool,
}

impl IntervalPrediction {
    pub(crate) fn plain(set: IntervalSet) -> Self {
        Self {
            set,
            guaranteed_full: false,
            degenerate: false,
        }
    }

    pub(crate) fn full_by_arithmetic() -> Self {
        Self {
            set: IntervalSet::whole_line(),
            guaranteed_full: true,
            degenerate: false,
        }
    }
}

/// A binary-label prediction set plus bookkeeping flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelPrediction {
    pub set: LabelSet,
    pub guaranteed_full: bool,
    pub degenerate: bool,
}

impl LabelPrediction {
    pub(crate) fn plain(set: LabelSet) -> Self {
        Self {
            set,
            guaranteed_full: false,
            degenerate: false,
        }
    }

    pub(crate) fn full_by_arithmetic() -> Self {
        Self {
            set: LabelSet::full(),
            guaranteed_full: true,
            degenerate: false,
        }
    }
}

/// The guaranteed-full-coverage arithmetic shared by the subsampling and
/// random-set methods: the smallest attainable p-value over `k + 1` items is
/// `1/(k+1)`, so a test at a level at or below it can never exclude anything.
pub(crate) fn pvalue_floor_reaches(k: usize, level: f64) -> bool {
    1.0 / (k + 1) as f64 >= level
}
