//! Super-level-set boundary location by bracketing and bisection.
//!
//! Conformal p-values are piecewise constant, so the targets here are
//! boundaries of `{x : pred(x)}` rather than roots of a continuous function.
//! Boundaries are reported at the bisection midpoint once the bracket is
//! narrower than [`BOUNDARY_TOL`].

/// Absolute tolerance on located boundaries.
pub(crate) const BOUNDARY_TOL: f64 = 1e-6;

/// Brackets may grow to `2^16 * scale` before an endpoint is declared infinite.
const CAP_FACTOR: f64 = 65536.0;

fn bisect<F: Fn(f64) -> bool>(pred: &F, mut inside: f64, mut outside: f64) -> f64 {
    while (outside - inside).abs() > BOUNDARY_TOL {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// One boundary of `{x : pred(x)}` starting from a point where `pred` holds,
/// walking in `direction` (+1.0 or -1.0) with doubling steps of initial size
/// `scale / 2^16`. Returns `None` when `pred` still holds at the cap distance,
/// i.e. the set is unbounded on that side for all practical purposes.
pub(crate) fn boundary_from<F: Fn(f64) -> bool>(
    pred: F,
    start_inside: f64,
    direction: f64,
    scale: f64,
) -> Option<f64> {
    debug_assert!(pred(start_inside));
    debug_assert!(scale > 0.0);
    let cap = CAP_FACTOR * scale;
    let mut step = scale / CAP_FACTOR;
    let mut inside = start_inside;
    loop {
        let probe = start_inside + direction * step;
        if !pred(probe) {
            return Some(bisect(&pred, inside, probe));
        }
        inside = probe;
        if step >= cap {
            return None;
        }
        step *= 2.0;
    }
}

/// Minimum and maximum of `{x : pred(x)}` assuming the set lies within reach of
/// a coarse scan of `[lo, hi]`. Scans `n_scan + 1` evenly spaced points, then
/// refines the outermost true/false transitions by bisection. When an edge of
/// the scan range itself satisfies `pred`, the bracket is extended outward by
/// doubling steps. Returns `None` when no scan point qualifies.
pub(crate) fn scan_span<F: Fn(f64) -> bool>(
    pred: F,
    lo: f64,
    hi: f64,
    n_scan: usize,
) -> Option<(f64, f64)> {
    debug_assert!(lo <= hi && n_scan >= 1);
    let dx = (hi - lo) / n_scan as f64;
    let grid: Vec<f64> = (0..=n_scan).map(|i| lo + dx * i as f64).collect();
    let hits: Vec<bool> = grid.iter().map(|&x| pred(x)).collect();
    let first = hits.iter().position(|&h| h)?;
    let last = hits.iter().rposition(|&h| h).unwrap();

    let min = if first == 0 {
        boundary_from(&pred, grid[0], -1.0, (hi - lo).max(1.0)).unwrap_or(f64::NEG_INFINITY)
    } else {
        bisect(&pred, grid[first], grid[first - 1])
    };
    let max = if last == n_scan {
        boundary_from(&pred, grid[n_scan], 1.0, (hi - lo).max(1.0)).unwrap_or(f64::INFINITY)
    } else {
        bisect(&pred, grid[last], grid[last + 1])
    };
    Some((min, max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_step_boundary() {
        // {x : |x| <= 3.2}, boundaries at +-3.2.
        let pred = |x: f64| x.abs() <= 3.2;
        let hi = boundary_from(pred, 0.0, 1.0, 1.0).unwrap();
        let lo = boundary_from(pred, 0.0, -1.0, 1.0).unwrap();
        assert!((hi - 3.2).abs() <= BOUNDARY_TOL);
        assert!((lo + 3.2).abs() <= BOUNDARY_TOL);
    }

    #[test]
    fn unbounded_side_reports_none() {
        assert!(boundary_from(|_| true, 0.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn scan_span_finds_interior_window() {
        let pred = |x: f64| (1.0..=2.5).contains(&x);
        let (lo, hi) = scan_span(pred, -10.0, 10.0, 64).unwrap();
        assert!((lo - 1.0).abs() <= 1e-5);
        assert!((hi - 2.5).abs() <= 1e-5);
        assert!(scan_span(|x: f64| x > 100.0, -10.0, 10.0, 64).is_none());
    }
}
