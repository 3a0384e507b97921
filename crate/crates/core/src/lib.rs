//! Distribution-free conformal prediction sets for grouped data.
//!
//! Observations arrive in `k` groups, each group drawn iid from its own
//! distribution, with the group distributions themselves drawn from a common
//! hyper-distribution. Pooling such data and running ordinary conformal
//! prediction (the naive method) loses exchangeability and can undercover
//! arbitrarily badly. This crate implements constructions that stay valid:
//!
//! * subsampling one observation per group and intersecting the resulting
//!   conformal intervals ([`methods::subsample_unsup`]);
//! * random level sets built from parametric working models, combined either
//!   through standardized mean residuals or through a bivariate kernel
//!   density estimate over the fitted `(theta_hat, t)` pairs
//!   ([`methods::randomset_mean_unsup`], [`methods::randomset_kde_unsup`]);
//! * a nonparametric CDF-band method using Kolmogorov-Smirnov residuals
//!   ([`methods::cdf_band`]);
//! * supervised binary counterparts of the above; and
//! * within-group prediction with shrinkage residuals
//!   ([`methods::within_group_conformal`]).
//!
//! [`simlab`] contains seeded data generators and a replicate runner for the
//! coverage and set-size experiments, and [`acceptance`] packages the checks
//! the `conformal-re check` subcommand runs.

pub mod acceptance;
pub mod conformal;
pub mod error;
pub mod interval;
pub mod kde;
pub mod methods;
pub mod models;
pub mod sample;
pub mod simlab;
mod solver;

pub use conformal::{LabelSet, MeanConformal, PValue};
pub use error::{Error, Result};
pub use interval::{Interval, IntervalSet};
pub use sample::{Grouped, GroupedPairs, GroupedReal, RealSample};
