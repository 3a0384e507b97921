//! Simulation designs and seeded data generators.
//!
//! Unsupervised: group centers `theta_j ~ N(mu, tau^2)`, observations
//! `Y ~ N(theta_j, sigma^2)`, plus one held-out `(theta, Y)` from a fresh
//! group. Supervised: `theta_j ~ N(mu, tau^2)`, covariates `X ~ N(0, 1)`,
//! labels Bernoulli with logit `theta_j * x`, plus a held-out
//! `(x*, theta*, y*)`.
//!
//! Draw order is part of the reproducibility contract: all `theta_j` first,
//! then each group's observations in group order (for pairs, `x` before its
//! label draw), then the held-out quantities.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::models::sigmoid;
use crate::sample::{GroupedPairs, GroupedReal};

/// Per-group sample sizes: one shared size or an explicit ragged list.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupSizes {
    Uniform(usize),
    PerGroup(Vec<usize>),
}

impl GroupSizes {
    pub fn resolve(&self, k: usize) -> Vec<usize> {
        match self {
            Self::Uniform(n) => vec![*n; k],
            Self::PerGroup(list) => {
                assert_eq!(list.len(), k, "per-group size list must have k entries");
                list.clone()
            }
        }
    }

    /// Compact descriptor for output files ("500", or "1000/5x19").
    pub fn describe(&self, k: usize) -> String {
        match self {
            Self::Uniform(n) => n.to_string(),
            Self::PerGroup(list) => {
                assert_eq!(list.len(), k);
                let mut parts: Vec<String> = Vec::new();
                let mut i = 0;
                while i < list.len() {
                    let mut j = i;
                    while j < list.len() && list[j] == list[i] {
                        j += 1;
                    }
                    if j - i == 1 {
                        parts.push(list[i].to_string());
                    } else {
                        parts.push(format!("{}x{}", list[i], j - i));
                    }
                    i = j;
                }
                parts.join("/")
            }
        }
    }
}

/// Reading of the dispersion parameters in the one-large-group example,
/// which quotes `N(0, 10)` centers and `N(mu_j, .1)` observations without
/// saying whether 10 and .1 are variances or standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathologicalConvention {
    /// 10 and .1 are variances: tau = sqrt(10), sigma = sqrt(0.1).
    Variance,
    /// 10 and .1 are standard deviations: tau = 10, sigma = 0.1.
    StdDev,
}

impl PathologicalConvention {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Variance => "variance",
            Self::StdDev => "sd",
        }
    }
}

/// Unsupervised random-effects design. `tau` and `sigma` are standard
/// deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct UnsupDesign {
    pub k: usize,
    pub sizes: GroupSizes,
    pub mu: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl UnsupDesign {
    /// The baseline simulation design: `mu = 0`, `tau = 1`, `sigma = 1`.
    pub fn standard(k: usize, n_per_group: usize) -> Self {
        Self {
            k,
            sizes: GroupSizes::Uniform(n_per_group),
            mu: 0.0,
            tau: 1.0,
            sigma: 1.0,
        }
    }

    /// The dominant-group example: `k = 20`, one group of 1000 observations
    /// and nineteen of 5, with widely spread centers and tiny within-group
    /// noise. The naive method collapses here.
    pub fn pathological(convention: PathologicalConvention) -> Self {
        let (tau, sigma) = match convention {
            PathologicalConvention::Variance => (10.0f64.sqrt(), 0.1f64.sqrt()),
            PathologicalConvention::StdDev => (10.0, 0.1),
        };
        let mut sizes = vec![5usize; 20];
        sizes[0] = 1000;
        Self {
            k: 20,
            sizes: GroupSizes::PerGroup(sizes),
            mu: 0.0,
            tau,
            sigma,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "unsup(k={},n={},mu={},tau={},sigma={})",
            self.k,
            self.sizes.describe(self.k),
            self.mu,
            self.tau,
            self.sigma
        )
    }
}

/// Supervised logistic design; covariates are standard normal. `tau` is a
/// standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct SupDesign {
    pub k: usize,
    pub sizes: GroupSizes,
    pub mu: f64,
    pub tau: f64,
}

impl SupDesign {
    pub fn new(k: usize, n_per_group: usize, mu: f64, tau: f64) -> Self {
        Self {
            k,
            sizes: GroupSizes::Uniform(n_per_group),
            mu,
            tau,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "sup(k={},n={},mu={},tau={})",
            self.k,
            self.sizes.describe(self.k),
            self.mu,
            self.tau
        )
    }
}

/// One generated unsupervised dataset plus its held-out test pair.
#[derive(Clone, Debug)]
pub struct UnsupDataset {
    pub data: GroupedReal,
    pub thetas: Vec<f64>,
    pub fresh_theta: f64,
    pub fresh_y: f64,
}

/// One generated supervised dataset plus its held-out test triple.
#[derive(Clone, Debug)]
pub struct SupDataset {
    pub data: GroupedPairs,
    pub thetas: Vec<f64>,
    pub x_star: f64,
    pub theta_star: f64,
    pub y_star: u8,
}

pub fn gen_unsup(design: &UnsupDesign, rng: &mut impl Rng) -> UnsupDataset {
    assert!(design.tau > 0.0 && design.sigma > 0.0, "tau, sigma > 0");
    let sizes = design.sizes.resolve(design.k);
    let thetas: Vec<f64> = (0..design.k)
        .map(|_| design.mu + design.tau * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let groups: Vec<Vec<f64>> = thetas
        .iter()
        .zip(sizes.iter())
        .map(|(&theta, &n)| {
            (0..n)
                .map(|_| theta + design.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let fresh_theta = design.mu + design.tau * rng.sample::<f64, _>(StandardNormal);
    let fresh_y = fresh_theta + design.sigma * rng.sample::<f64, _>(StandardNormal);
    UnsupDataset {
        data: GroupedReal::unsupervised(groups).expect("generated groups are valid"),
        thetas,
        fresh_theta,
        fresh_y,
    }
}

pub fn gen_sup(design: &SupDesign, rng: &mut impl Rng) -> SupDataset {
    assert!(design.tau > 0.0, "tau > 0");
    let sizes = design.sizes.resolve(design.k);
    let thetas: Vec<f64> = (0..design.k)
        .map(|_| design.mu + design.tau * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let groups: Vec<Vec<(f64, u8)>> = thetas
        .iter()
        .zip(sizes.iter())
        .map(|(&theta, &n)| {
            (0..n)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    let y = u8::from(rng.random::<f64>() < sigmoid(theta * x));
                    (x, y)
                })
                .collect()
        })
        .collect();
    let x_star: f64 = rng.sample(StandardNormal);
    let theta_star = design.mu + design.tau * rng.sample::<f64, _>(StandardNormal);
    let y_star = u8::from(rng.random::<f64>() < sigmoid(theta_star * x_star));
    SupDataset {
        data: GroupedPairs::supervised(groups).expect("generated groups are valid"),
        thetas,
        x_star,
        theta_star,
        y_star,
    }
}

/// FNV-1a over the bit patterns of everything the dataset contains; used to
/// verify that paired experiment arms really consume identical data.
pub fn dataset_fingerprint(ds: &UnsupDataset) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |v: f64| {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01B3);
        }
    };
    for g in ds.data.groups() {
        for &v in g {
            eat(v);
        }
    }
    for &t in &ds.thetas {
        eat(t);
    }
    eat(ds.fresh_theta);
    eat(ds.fresh_y);
    h
}
