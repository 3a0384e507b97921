//! Seeded replicate runner and experiment summaries.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::methods::{
    cdf_band, naive_sup, naive_unsup, randomset_kde_unsup, randomset_mean_unsup, randomset_sup,
    subsample_sup, subsample_unsup, within_group_conformal, IntervalPrediction, LabelPrediction,
    RandomSetVariant, WithinGroupEstimator,
};
use crate::models::LogisticFitter;
use crate::simlab::design::{gen_sup, gen_unsup, GroupSizes, SupDesign, UnsupDesign};
use crate::simlab::trial_rng;

/// A design for either branch of the data model.
#[derive(Clone, Debug, PartialEq)]
pub enum DesignSpec {
    Unsup(UnsupDesign),
    Sup(SupDesign),
}

impl DesignSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Unsup(d) => d.label(),
            Self::Sup(d) => d.label(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::Unsup(d) => d.k,
            Self::Sup(d) => d.k,
        }
    }

    fn sizes(&self) -> &GroupSizes {
        match self {
            Self::Unsup(d) => &d.sizes,
            Self::Sup(d) => &d.sizes,
        }
    }
}

/// A fully parameterized prediction method.
#[derive(Clone, Debug, PartialEq)]
pub enum MethodSpec {
    NaiveUnsup {
        alpha: f64,
    },
    SubsampleUnsup {
        alpha: f64,
        n_subsamples: u32,
    },
    RandomSetUnsup {
        delta: f64,
        epsilon: f64,
        variant: RandomSetVariant,
    },
    CdfBand {
        beta: f64,
        gamma: f64,
    },
    NaiveSup {
        alpha: f64,
        fitter: LogisticFitter,
    },
    SubsampleSup {
        alpha: f64,
        n_subsamples: u32,
        fitter: LogisticFitter,
    },
    RandomSetSup {
        delta: f64,
        epsilon: f64,
        variant: RandomSetVariant,
        fitter: LogisticFitter,
    },
    WithinGroup {
        alpha: f64,
        estimator: WithinGroupEstimator,
        group_index: usize,
    },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NaiveUnsup { .. } => "naive-unsup",
            Self::SubsampleUnsup { .. } => "subsample-unsup",
            Self::RandomSetUnsup { .. } => "randomset-unsup",
            Self::CdfBand { .. } => "cdf-band",
            Self::NaiveSup { .. } => "naive-sup",
            Self::SubsampleSup { .. } => "subsample-sup",
            Self::RandomSetSup { .. } => "randomset-sup",
            Self::WithinGroup { .. } => "within-group",
        }
    }

    pub fn variant_name(&self) -> Option<&'static str> {
        match self {
            Self::RandomSetUnsup { variant, .. } | Self::RandomSetSup { variant, .. } => {
                Some(variant.name())
            }
            Self::WithinGroup { estimator, .. } => Some(estimator.name()),
            _ => None,
        }
    }

    /// Total nominal miscoverage level.
    pub fn alpha_total(&self) -> f64 {
        match *self {
            Self::NaiveUnsup { alpha }
            | Self::SubsampleUnsup { alpha, .. }
            | Self::NaiveSup { alpha, .. }
            | Self::SubsampleSup { alpha, .. }
            | Self::WithinGroup { alpha, .. } => alpha,
            Self::RandomSetUnsup { delta, epsilon, .. }
            | Self::RandomSetSup { delta, epsilon, .. } => delta + epsilon,
            Self::CdfBand { beta, gamma } => beta + gamma,
        }
    }

    /// First split level (delta for random sets, beta for the band).
    pub fn delta(&self) -> Option<f64> {
        match *self {
            Self::RandomSetUnsup { delta, .. } | Self::RandomSetSup { delta, .. } => Some(delta),
            Self::CdfBand { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Second split level (epsilon for random sets, gamma for the band).
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Self::RandomSetUnsup { epsilon, .. } | Self::RandomSetSup { epsilon, .. } => {
                Some(epsilon)
            }
            Self::CdfBand { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    pub fn n_subsamples(&self) -> Option<u32> {
        match *self {
            Self::SubsampleUnsup { n_subsamples, .. } | Self::SubsampleSup { n_subsamples, .. } => {
                Some(n_subsamples)
            }
            _ => None,
        }
    }

    fn is_supervised(&self) -> bool {
        matches!(
            self,
            Self::NaiveSup { .. } | Self::SubsampleSup { .. } | Self::RandomSetSup { .. }
        )
    }
}

/// Outcome of a single trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialResult {
    pub covered: bool,
    pub incorrect_covered: Option<bool>,
    /// Lebesgue measure for intervals, cardinality for label sets; may be
    /// `+inf`.
    pub set_size: f64,
    pub guaranteed_full: bool,
}

/// Aggregated result of one `(design, method)` experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub design: String,
    pub method: String,
    pub variant: Option<String>,
    pub k: usize,
    pub n_per_group: String,
    pub alpha: f64,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_subsamples: Option<u32>,
    pub n_trials: usize,
    pub coverage: f64,
    pub incorrect_coverage: Option<f64>,
    /// Mean over trials with finite sets; `+inf` when every set was unbounded.
    pub mean_size: f64,
    /// Share of trials that returned an unbounded (or full) set.
    pub unbounded_share: f64,
    /// Monte-Carlo standard error of the coverage estimate.
    pub coverage_se: f64,
    /// All trials short-circuited to the full set by the level arithmetic.
    pub full_coverage: bool,
    /// Trials aborted by a fitter failure; excluded from the rates above.
    pub failures: usize,
    pub seed: u64,
}

/// Fixed column order of the CSV output.
pub const CSV_HEADER: &str = "method,variant,k,n_per_group,alpha,delta,epsilon,N,trials,\
coverage,incorrect_coverage,mean_size,full_coverage_flag,failures,seed";

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.6}")
    }
}

impl ExperimentSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.variant.as_deref().unwrap_or(""),
            self.k,
            self.n_per_group,
            fmt_f64(self.alpha),
            self.delta.map(fmt_f64).unwrap_or_default(),
            self.epsilon.map(fmt_f64).unwrap_or_default(),
            self.n_subsamples.map(|n| n.to_string()).unwrap_or_default(),
            self.n_trials,
            fmt_f64(self.coverage),
            self.incorrect_coverage.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.mean_size),
            self.full_coverage,
            self.failures,
            self.seed
        )
    }
}

fn unsup_trial(
    design: &UnsupDesign,
    method: &MethodSpec,
    rng: &mut impl Rng,
) -> Result<TrialResult> {
    let ds = gen_unsup(design, rng);
    let (pred, test_y): (IntervalPrediction, f64) = match method {
        MethodSpec::NaiveUnsup { alpha } => (naive_unsup(&ds.data, *alpha), ds.fresh_y),
        MethodSpec::SubsampleUnsup {
            alpha,
            n_subsamples,
        } => (
            subsample_unsup(&ds.data, *alpha, *n_subsamples, rng),
            ds.fresh_y,
        ),
        MethodSpec::RandomSetUnsup {
            delta,
            epsilon,
            variant,
        } => {
            let pred = match variant {
                RandomSetVariant::Mean => randomset_mean_unsup(&ds.data, *delta, *epsilon, rng)?,
                RandomSetVariant::Kde => randomset_kde_unsup(&ds.data, *delta, *epsilon, rng)?,
            };
            (pred, ds.fresh_y)
        }
        MethodSpec::CdfBand { beta, gamma } => (cdf_band(&ds.data, *beta, *gamma)?, ds.fresh_y),
        MethodSpec::WithinGroup {
            alpha,
            estimator,
            group_index,
        } => {
            // Task 2: the test point comes from an observed group, drawn
            // after the full dataset.
            let y_new =
                ds.thetas[*group_index] + design.sigma * rng.sample::<f64, _>(StandardNormal);
            let set = within_group_conformal(&ds.data, *group_index, *alpha, *estimator)?;
            let full = set.is_whole_line();
            (
                IntervalPrediction {
                    set,
                    guaranteed_full: full,
                    degenerate: false,
                },
                y_new,
            )
        }
        _ => unreachable!("supervised method routed to unsupervised trial"),
    };
    Ok(TrialResult {
        covered: pred.set.contains(test_y),
        incorrect_covered: None,
        set_size: pred.set.lebesgue(),
        guaranteed_full: pred.guaranteed_full,
    })
}

fn sup_trial(design: &SupDesign, method: &MethodSpec, rng: &mut impl Rng) -> Result<TrialResult> {
    let ds = gen_sup(design, rng);
    let pred: LabelPrediction = match method {
        MethodSpec::NaiveSup { alpha, fitter } => naive_sup(&ds.data, ds.x_star, *alpha, fitter)?,
        MethodSpec::SubsampleSup {
            alpha,
            n_subsamples,
            fitter,
        } => subsample_sup(&ds.data, ds.x_star, *alpha, *n_subsamples, fitter, rng)?,
        MethodSpec::RandomSetSup {
            delta,
            epsilon,
            variant,
            fitter,
        } => randomset_sup(&ds.data, ds.x_star, *delta, *epsilon, *variant, fitter, rng)?,
        _ => unreachable!("unsupervised method routed to supervised trial"),
    };
    Ok(TrialResult {
        covered: pred.set.contains(ds.y_star),
        incorrect_covered: Some(pred.set.contains(1 - ds.y_star)),
        set_size: pred.set.size() as f64,
        guaranteed_full: pred.guaranteed_full,
    })
}

fn summarize(
    design: &DesignSpec,
    method: &MethodSpec,
    seed: u64,
    results: Vec<Result<TrialResult>>,
) -> ExperimentSummary {
    let n_trials = results.len();
    let mut failures = 0usize;
    let mut covered = 0usize;
    let mut incorrect = 0usize;
    let mut has_incorrect = false;
    let mut finite_size_sum = 0.0;
    let mut finite_sizes = 0usize;
    let mut unbounded = 0usize;
    let mut all_full = n_trials > 0;
    let mut completed = 0usize;
    for r in results {
        match r {
            Err(_) => {
                failures += 1;
                all_full = false;
            }
            Ok(t) => {
                completed += 1;
                covered += t.covered as usize;
                if let Some(inc) = t.incorrect_covered {
                    has_incorrect = true;
                    incorrect += inc as usize;
                }
                if t.set_size.is_finite() {
                    finite_size_sum += t.set_size;
                    finite_sizes += 1;
                } else {
                    unbounded += 1;
                }
                all_full &= t.guaranteed_full;
            }
        }
    }
    let denom = completed.max(1) as f64;
    let coverage = covered as f64 / denom;
    ExperimentSummary {
        design: design.label(),
        method: method.name().to_string(),
        variant: method.variant_name().map(str::to_string),
        k: design.k(),
        n_per_group: design.sizes().describe(design.k()),
        alpha: method.alpha_total(),
        delta: method.delta(),
        epsilon: method.epsilon(),
        n_subsamples: method.n_subsamples(),
        n_trials,
        coverage,
        incorrect_coverage: has_incorrect.then(|| incorrect as f64 / denom),
        mean_size: if finite_sizes > 0 {
            finite_size_sum / finite_sizes as f64
        } else {
            f64::INFINITY
        },
        unbounded_share: unbounded as f64 / denom,
        coverage_se: (coverage * (1.0 - coverage) / denom).sqrt(),
        full_coverage: all_full,
        failures,
        seed,
    }
}

/// Run `n_trials` independent replicates of one `(design, method)` pair.
///
/// Trials run in parallel; each derives its generator from `(seed, index)`,
/// and the aggregation is ordered by index, so the summary is identical for
/// any thread count.
pub fn run_experiment(
    design: &DesignSpec,
    method: &MethodSpec,
    n_trials: usize,
    seed: u64,
) -> Result<ExperimentSummary> {
    let results: Vec<Result<TrialResult>> = match (design, method.is_supervised()) {
        (DesignSpec::Unsup(d), false) => (0..n_trials as u64)
            .into_par_iter()
            .map(|i| unsup_trial(d, method, &mut trial_rng(seed, i)))
            .collect(),
        (DesignSpec::Sup(d), true) => (0..n_trials as u64)
            .into_par_iter()
            .map(|i| sup_trial(d, method, &mut trial_rng(seed, i)))
            .collect(),
        (DesignSpec::Unsup(_), true) => {
            return Err(Error::MethodDesignMismatch(
                "supervised method on unsupervised design",
            ))
        }
        (DesignSpec::Sup(_), false) => {
            return Err(Error::MethodDesignMismatch(
                "unsupervised method on supervised design",
            ))
        }
    };
    Ok(summarize(design, method, seed, results))
}

/// Within-group (Task 2) data set-ups: unit centers with within-group
/// variance 1 or 100, ten observations per group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShrinkageSetup {
    Setup1,
    Setup2,
}

impl ShrinkageSetup {
    pub fn sigma2(&self) -> f64 {
        match self {
            Self::Setup1 => 1.0,
            Self::Setup2 => 100.0,
        }
    }

    pub fn design(&self, k: usize) -> UnsupDesign {
        UnsupDesign {
            k,
            sizes: GroupSizes::Uniform(10),
            mu: 0.0,
            tau: 1.0,
            sigma: self.sigma2().sqrt(),
        }
    }
}

/// Paired comparison of the two within-group estimators on identical
/// datasets: each trial generates one dataset and one test draw (a new
/// observation on group 0) and evaluates both conformal sets on it.
pub fn shrinkage_experiment(
    setup: ShrinkageSetup,
    k: usize,
    n_trials: usize,
    seed: u64,
) -> Result<(ExperimentSummary, ExperimentSummary)> {
    let design = setup.design(k);
    let sigma2 = setup.sigma2();
    let estimators = [
        WithinGroupEstimator::GroupMean,
        WithinGroupEstimator::JamesStein { sigma2 },
    ];
    let results: Vec<[Result<TrialResult>; 2]> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let ds = gen_unsup(&design, &mut rng);
            let y_new = ds.thetas[0] + design.sigma * rng.sample::<f64, _>(StandardNormal);
            estimators.map(|est| {
                within_group_conformal(&ds.data, 0, 0.1, est).map(|set| TrialResult {
                    covered: set.contains(y_new),
                    incorrect_covered: None,
                    set_size: set.lebesgue(),
                    guaranteed_full: set.is_whole_line(),
                })
            })
        })
        .collect();

    let spec = DesignSpec::Unsup(design);
    let mut split: [Vec<Result<TrialResult>>; 2] = [Vec::new(), Vec::new()];
    for pair in results {
        let [a, b] = pair;
        split[0].push(a);
        split[1].push(b);
    }
    let [mean_results, js_results] = split;
    let mean_method = MethodSpec::WithinGroup {
        alpha: 0.1,
        estimator: WithinGroupEstimator::GroupMean,
        group_index: 0,
    };
    let js_method = MethodSpec::WithinGroup {
        alpha: 0.1,
        estimator: WithinGroupEstimator::JamesStein { sigma2 },
        group_index: 0,
    };
    Ok((
        summarize(&spec, &mean_method, seed, mean_results),
        summarize(&spec, &js_method, seed, js_results),
    ))
}
