//! Finite unions of disjoint closed real intervals.
//!
//! This is the prediction-set representation for the unsupervised methods.
//! Endpoints may be `-inf`/`+inf`, so the empty set, bounded unions, and the
//! whole line are all representable. Sets are normalized on construction:
//! intervals are sorted, and overlapping or touching intervals are coalesced.

use serde::Serialize;

/// A closed interval `[lo, hi]` with `lo <= hi`; either endpoint may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "interval endpoint is NaN");
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// Lebesgue measure; `+inf` if either endpoint is infinite.
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sorted union of pairwise disjoint, non-adjacent closed intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn whole_line() -> Self {
        Self::single(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        Self {
            intervals: vec![Interval::new(lo, hi)],
        }
    }

    pub fn point(y: f64) -> Self {
        Self::single(y, y)
    }

    /// Build from arbitrary intervals, sorting and merging touching ones.
    pub fn from_intervals<I: IntoIterator<Item = Interval>>(intervals: I) -> Self {
        let mut raw: Vec<Interval> = intervals.into_iter().collect();
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_whole_line(&self) -> bool {
        self.intervals.len() == 1
            && self.intervals[0].lo == f64::NEG_INFINITY
            && self.intervals[0].hi == f64::INFINITY
    }

    /// Exact membership query.
    pub fn contains(&self, y: f64) -> bool {
        // First interval with lo > y; only its predecessor can contain y.
        let idx = self.intervals.partition_point(|iv| iv.lo <= y);
        idx > 0 && self.intervals[idx - 1].contains(y)
    }

    /// Total Lebesgue measure; `+inf` when any endpoint is infinite.
    pub fn lebesgue(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::from_intervals(self.intervals.iter().chain(other.intervals.iter()).copied())
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = self.intervals[i];
            let b = other.intervals[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                out.push(Interval::new(lo, hi));
            }
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Pieces are produced in order and disjoint already.
        IntervalSet { intervals: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merges_overlapping_and_touching() {
        let s = IntervalSet::from_intervals(vec![
            Interval::new(0.0, 1.0),
            Interval::new(1.0, 2.0),
            Interval::new(3.0, 4.0),
            Interval::new(3.5, 5.0),
        ]);
        assert_eq!(s.intervals().len(), 2);
        assert_eq!(s.intervals()[0], Interval::new(0.0, 2.0));
        assert_eq!(s.intervals()[1], Interval::new(3.0, 5.0));
    }

    #[test]
    fn membership_and_measure() {
        let s =
            IntervalSet::from_intervals(vec![Interval::new(-1.0, 0.5), Interval::new(2.0, 2.0)]);
        assert!(s.contains(-1.0));
        assert!(s.contains(0.5));
        assert!(s.contains(2.0));
        assert!(!s.contains(1.0));
        assert_eq!(s.lebesgue(), 1.5);
    }

    #[test]
    fn whole_line_and_empty() {
        assert!(IntervalSet::whole_line().contains(1e300));
        assert!(IntervalSet::whole_line().lebesgue().is_infinite());
        assert!(IntervalSet::empty().is_empty());
        assert!(!IntervalSet::empty().contains(0.0));
        assert_eq!(IntervalSet::empty().lebesgue(), 0.0);
    }

    #[test]
    fn intersect_basic() {
        let a = IntervalSet::from_intervals(vec![Interval::new(0.0, 2.0), Interval::new(4.0, 6.0)]);
        let b = IntervalSet::single(1.0, 5.0);
        let c = a.intersect(&b);
        assert_eq!(c.intervals().len(), 2);
        assert_eq!(c.intervals()[0], Interval::new(1.0, 2.0));
        assert_eq!(c.intervals()[1], Interval::new(4.0, 5.0));
        assert!(a.intersect(&IntervalSet::empty()).is_empty());
        assert_eq!(a.intersect(&IntervalSet::whole_line()), a);
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (-50.0f64..50.0, 0.0f64..10.0).prop_map(|(lo, len)| Interval::new(lo, lo + len))
    }

    proptest! {
        #[test]
        fn normalized_after_construction(ivs in prop::collection::vec(arb_interval(), 0..12)) {
            let s = IntervalSet::from_intervals(ivs);
            for w in s.intervals().windows(2) {
                // Strictly separated: sorted, disjoint, non-adjacent.
                prop_assert!(w[0].hi < w[1].lo);
            }
        }

        #[test]
        fn union_preserves_membership(
            a in prop::collection::vec(arb_interval(), 0..8),
            b in prop::collection::vec(arb_interval(), 0..8),
            y in -60.0f64..60.0,
        ) {
            let sa = IntervalSet::from_intervals(a);
            let sb = IntervalSet::from_intervals(b);
            let u = sa.union(&sb);
            prop_assert_eq!(u.contains(y), sa.contains(y) || sb.contains(y));
        }

        #[test]
        fn intersect_matches_membership(
            a in prop::collection::vec(arb_interval(), 0..8),
            b in prop::collection::vec(arb_interval(), 0..8),
            y in -60.0f64..60.0,
        ) {
            let sa = IntervalSet::from_intervals(a);
            let sb = IntervalSet::from_intervals(b);
            let c = sa.intersect(&sb);
            prop_assert_eq!(c.contains(y), sa.contains(y) && sb.contains(y));
        }
    }
}
