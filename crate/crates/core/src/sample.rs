//! Input data containers: flat real samples and grouped data.

use crate::error::{Error, Result};

/// A nonempty list of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSample {
    values: Vec<f64>,
}

impl RealSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Deref for RealSample {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// `k >= 1` groups of observations with ragged sizes; every group is nonempty.
///
/// `T = f64` for unsupervised data, `T = (f64, u8)` for supervised pairs with
/// binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Grouped<T> {
    groups: Vec<Vec<T>>,
}

pub type GroupedReal = Grouped<f64>;
pub type GroupedPairs = Grouped<(f64, u8)>;

impl<T: Clone> Grouped<T> {
    fn check_shape(groups: &[Vec<T>]) -> Result<()> {
        if groups.is_empty() {
            return Err(Error::TooFewGroups {
                required: 1,
                got: 0,
            });
        }
        for (index, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::GroupTooSmall {
                    index,
                    got: 0,
                    required: 1,
                });
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<T>] {
        &self.groups
    }

    pub fn group(&self, index: usize) -> Result<&[T]> {
        self.groups
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::BadGroupIndex {
                index,
                k: self.groups.len(),
            })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn total_len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn pooled(&self) -> Vec<T> {
        self.groups.iter().flatten().cloned().collect()
    }
}

impl GroupedReal {
    pub fn unsupervised(groups: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_shape(&groups)?;
        for g in &groups {
            if let Some(&bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(bad));
            }
        }
        Ok(Self { groups })
    }
}

impl GroupedPairs {
    pub fn supervised(groups: Vec<Vec<(f64, u8)>>) -> Result<Self> {
        Self::check_shape(&groups)?;
        for g in &groups {
            for &(x, y) in g {
                if !x.is_finite() {
                    return Err(Error::NonFinite(x));
                }
                if y > 1 {
                    return Err(Error::BadLabel(y));
                }
            }
        }
        Ok(Self { groups })
    }
}
