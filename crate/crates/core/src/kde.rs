//! Bivariate Gaussian kernel density estimation over (theta_hat, t) pairs.
//!
//! The bandwidth is a diagonal normal-reference plug-in (bivariate Scott
//! rule, `h_i = sd_i * k^(-1/6)`); the selector is a free function so an
//! alternative can be swapped in. Mass levels are computed on a fixed
//! evaluation grid covering the points padded by four kernel standard
//! deviations per axis, which keeps the truncated mass below 1e-3.

use crate::error::{Error, Result};

/// Evaluation grid resolution per axis for mass-level extraction.
const GRID_N: usize = 200;
/// Grid padding in kernel standard deviations.
const PAD_SDS: f64 = 4.0;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Diagonal 2x2 bandwidth matrix `diag(h1^2, h2^2)`; SPD by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidth {
    pub h1_sq: f64,
    pub h2_sq: f64,
}

impl Bandwidth {
    pub fn sds(&self) -> (f64, f64) {
        (self.h1_sq.sqrt(), self.h2_sq.sqrt())
    }

    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.h1_sq, 0.0], [0.0, self.h2_sq]]
    }
}

fn sample_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ssq: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (ssq / (n - 1) as f64).sqrt()
}

/// Bivariate Scott-rule plug-in: `h_i = sd_i * k^(-1/6)` per coordinate.
pub fn select_bandwidth(points: &[(f64, f64)]) -> Result<Bandwidth> {
    if points.len() < 4 {
        return Err(Error::TooFewGroups {
            required: 4,
            got: points.len(),
        });
    }
    let k = points.len();
    let sd1 = sample_sd(points.iter().map(|p| p.0), k);
    let sd2 = sample_sd(points.iter().map(|p| p.1), k);
    if sd1 == 0.0 {
        return Err(Error::DegenerateBandwidth { coordinate: 0 });
    }
    if sd2 == 0.0 {
        return Err(Error::DegenerateBandwidth { coordinate: 1 });
    }
    let factor = (k as f64).powf(-1.0 / 6.0);
    let (h1, h2) = (sd1 * factor, sd2 * factor);
    Ok(Bandwidth {
        h1_sq: h1 * h1,
        h2_sq: h2 * h2,
    })
}

/// Immutable bivariate Gaussian KDE; all queries are read-only.
#[derive(Clone, Debug)]
pub struct Kde2d {
    points: Vec<(f64, f64)>,
    bandwidth: Bandwidth,
}

/// Mass threshold `b_eps` together with the grid it was computed on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassLevel {
    pub b_eps: f64,
    pub grid: GridSpec,
}

/// Bounds and resolution of a KDE evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Kde2d {
    /// Build with the default Scott-rule bandwidth.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bandwidth = select_bandwidth(&points)?;
        Ok(Self { points, bandwidth })
    }

    pub fn with_bandwidth(points: Vec<(f64, f64)>, bandwidth: Bandwidth) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewGroups {
                required: 2,
                got: points.len(),
            });
        }
        if !(bandwidth.h1_sq > 0.0 && bandwidth.h2_sq > 0.0) {
            return Err(Error::DegenerateBandwidth { coordinate: 0 });
        }
        Ok(Self { points, bandwidth })
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Kernel mixture density at a query point. Far queries underflow to 0.
    pub fn density_at(&self, point: (f64, f64)) -> f64 {
        let (h1, h2) = self.bandwidth.sds();
        let norm = 1.0 / (self.points.len() as f64 * TWO_PI * h1 * h2);
        let sum: f64 = self
            .points
            .iter()
            .map(|&(px, py)| {
                let dx = (point.0 - px) / h1;
                let dy = (point.1 - py) / h2;
                (-0.5 * (dx * dx + dy * dy)).exp()
            })
            .sum();
        norm * sum
    }

    fn padded_range(&self, coord: impl Fn(&(f64, f64)) -> f64, h: f64) -> (f64, f64) {
        let lo = self.points.iter().map(&coord).fold(f64::INFINITY, f64::min);
        let hi = self
            .points
            .iter()
            .map(&coord)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo - PAD_SDS * h, hi + PAD_SDS * h)
    }

    /// Theta extent of the evaluation grid (points padded by four kernel sds).
    pub fn support_range_x(&self) -> (f64, f64) {
        self.padded_range(|p| p.0, self.bandwidth.sds().0)
    }

    pub fn support_range_y(&self) -> (f64, f64) {
        self.padded_range(|p| p.1, self.bandwidth.sds().1)
    }

    fn default_grid(&self) -> GridSpec {
        GridSpec {
            x_range: self.support_range_x(),
            y_range: self.support_range_y(),
            nx: GRID_N,
            ny: GRID_N,
        }
    }

    /// Densities at the centers of an `nx * ny` cell grid, row-major in x.
    ///
    /// The diagonal bandwidth makes the kernel separable, so the grid is a
    /// product of per-axis kernel tables rather than `nx * ny * k` full
    /// kernel evaluations.
    fn density_grid(&self, spec: &GridSpec) -> (Vec<f64>, f64) {
        let (h1, h2) = self.bandwidth.sds();
        let dx = (spec.x_range.1 - spec.x_range.0) / spec.nx as f64;
        let dy = (spec.y_range.1 - spec.y_range.0) / spec.ny as f64;
        let xs: Vec<f64> = (0..spec.nx)
            .map(|i| spec.x_range.0 + (i as f64 + 0.5) * dx)
            .collect();
        let ys: Vec<f64> = (0..spec.ny)
            .map(|j| spec.y_range.0 + (j as f64 + 0.5) * dy)
            .collect();

        let mut grid = vec![0.0f64; spec.nx * spec.ny];
        let mut ky = vec![0.0f64; spec.ny];
        for &(px, py) in &self.points {
            for (j, &y) in ys.iter().enumerate() {
                let dyk = (y - py) / h2;
                ky[j] = (-0.5 * dyk * dyk).exp();
            }
            for (i, &x) in xs.iter().enumerate() {
                let dxk = (x - px) / h1;
                let kx = (-0.5 * dxk * dxk).exp();
                if kx < 1e-300 {
                    continue;
                }
                let row = &mut grid[i * spec.ny..(i + 1) * spec.ny];
                for (cell, &kyj) in row.iter_mut().zip(ky.iter()) {
                    *cell += kx * kyj;
                }
            }
        }
        let norm = 1.0 / (self.points.len() as f64 * TWO_PI * h1 * h2);
        for cell in &mut grid {
            *cell *= norm;
        }
        (grid, dx * dy)
    }

    /// Total mass of the default evaluation grid; should be 1 up to
    /// truncation and discretization error.
    pub fn grid_mass(&self) -> f64 {
        let spec = self.default_grid();
        let (grid, cell_area) = self.density_grid(&spec);
        grid.iter().sum::<f64>() * cell_area
    }

    /// Density level `b_eps` such that the super-level set `{K >= b_eps}`
    /// holds a `1 - eps` share of the kernel mass: cell densities are sorted
    /// descending and accumulated until the target mass is reached.
    pub fn mass_level(&self, eps: f64) -> MassLevel {
        assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1), got {eps}");
        let spec = self.default_grid();
        let (mut grid, cell_area) = self.density_grid(&spec);
        grid.sort_unstable_by(|a, b| b.total_cmp(a));
        let target = 1.0 - eps;
        let mut acc = 0.0;
        let mut b_eps = grid[grid.len() - 1];
        for &d in &grid {
            acc += d * cell_area;
            if acc >= target {
                b_eps = d;
                break;
            }
        }
        MassLevel { b_eps, grid: spec }
    }

    /// Scan theta over the support range in steps of `theta_step`; for each
    /// theta report the minimum `t` in `t_grid` (ascending) whose density
    /// reaches `b_eps`. Thetas with no qualifying `t` are omitted.
    pub fn region_theta_scan(
        &self,
        b_eps: f64,
        theta_step: f64,
        t_grid: &[f64],
    ) -> Vec<(f64, f64)> {
        assert!(theta_step > 0.0);
        let (h1, h2) = self.bandwidth.sds();
        let norm = 1.0 / (self.points.len() as f64 * TWO_PI * h1 * h2);
        let (x_lo, x_hi) = self.support_range_x();

        // Per-point kernel table over the t grid, t-major.
        let t_table: Vec<Vec<f64>> = t_grid
            .iter()
            .map(|&t| {
                self.points
                    .iter()
                    .map(|&(_, py)| {
                        let d = (t - py) / h2;
                        (-0.5 * d * d).exp()
                    })
                    .collect()
            })
            .collect();

        let n_steps = ((x_hi - x_lo) / theta_step).floor() as usize;
        let mut out = Vec::new();
        let mut xw = vec![0.0f64; self.points.len()];
        for i in 0..=n_steps {
            let theta = x_lo + i as f64 * theta_step;
            for (w, &(px, _)) in xw.iter_mut().zip(self.points.iter()) {
                let d = (theta - px) / h1;
                *w = (-0.5 * d * d).exp();
            }
            for (g, row) in t_table.iter().enumerate() {
                let dot: f64 = xw.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
                if norm * dot >= b_eps {
                    out.push((theta, t_grid[g]));
                    break;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit_sd_points(k: usize) -> Vec<(f64, f64)> {
        // Alternating +-a around 0 gives sample sd exactly computable:
        // sum (x - 0)^2 = k a^2, sd^2 = k a^2 / (k-1) = 1 for a^2 = (k-1)/k.
        let a = (((k - 1) as f64) / k as f64).sqrt();
        (0..k)
            .map(|i| {
                let s = if i % 2 == 0 { a } else { -a };
                (s, s)
            })
            .collect()
    }

    fn normal_cloud(k: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    #[test]
    fn scott_rule_arithmetic() {
        let bw = select_bandwidth(&unit_sd_points(64)).unwrap();
        let (h1, h2) = bw.sds();
        assert!((h1 - 0.5).abs() < 1e-12, "h1 {h1}");
        assert!((h2 - 0.5).abs() < 1e-12, "h2 {h2}");
    }

    #[test]
    fn scott_rule_scale_equivariance() {
        let points = normal_cloud(100, 1);
        let doubled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (2.0 * x, y)).collect();
        let bw = select_bandwidth(&points).unwrap();
        let bw2 = select_bandwidth(&doubled).unwrap();
        assert!((bw2.h1_sq - 4.0 * bw.h1_sq).abs() < 1e-9 * bw.h1_sq.max(1.0));
        assert_eq!(bw2.h2_sq, bw.h2_sq);
    }

    #[test]
    fn degenerate_cloud_rejected() {
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0)).collect();
        assert!(matches!(
            select_bandwidth(&flat),
            Err(Error::DegenerateBandwidth { coordinate: 1 })
        ));
        assert!(select_bandwidth(&normal_cloud(3, 2)).is_err());
    }

    #[test]
    fn density_near_true_normal() {
        let kde = Kde2d::new(normal_cloud(1000, 3)).unwrap();
        let truth = 1.0 / TWO_PI;
        let got = kde.density_at((0.0, 0.0));
        assert!(
            (got - truth).abs() / truth < 0.15,
            "density {got} vs {truth}"
        );
    }

    #[test]
    fn two_point_symmetry_and_underflow() {
        let kde = Kde2d::with_bandwidth(
            vec![(-1.0, 0.0), (1.0, 0.0)],
            Bandwidth {
                h1_sq: 0.25,
                h2_sq: 0.25,
            },
        )
        .unwrap();
        let a = kde.density_at((-1.0, 0.0));
        let b = kde.density_at((1.0, 0.0));
        assert!((a - b).abs() < 1e-15);
        assert_eq!(kde.density_at((1e6, 1e6)), 0.0);
    }

    #[test]
    fn grid_mass_near_one() {
        let kde = Kde2d::new(normal_cloud(200, 4)).unwrap();
        let mass = kde.grid_mass();
        assert!((mass - 1.0).abs() <= 0.01, "grid mass {mass}");
    }

    #[test]
    fn mass_level_self_consistency() {
        let kde = Kde2d::new(normal_cloud(300, 5)).unwrap();
        for eps in [0.05, 0.1] {
            let level = kde.mass_level(eps);
            let spec = level.grid;
            let dx = (spec.x_range.1 - spec.x_range.0) / spec.nx as f64;
            let dy = (spec.y_range.1 - spec.y_range.0) / spec.ny as f64;
            let mut kept = 0.0;
            for i in 0..spec.nx {
                for j in 0..spec.ny {
                    let x = spec.x_range.0 + (i as f64 + 0.5) * dx;
                    let y = spec.y_range.0 + (j as f64 + 0.5) * dy;
                    let d = kde.density_at((x, y));
                    if d >= level.b_eps {
                        kept += d * dx * dy;
                    }
                }
            }
            assert!((kept - (1.0 - eps)).abs() <= 0.02, "eps {eps}: kept {kept}");
        }
    }

    #[test]
    fn mass_level_monotone_in_eps() {
        let kde = Kde2d::new(normal_cloud(150, 6)).unwrap();
        let b1 = kde.mass_level(0.01).b_eps;
        let b5 = kde.mass_level(0.05).b_eps;
        let b10 = kde.mass_level(0.1).b_eps;
        assert!(b1 <= b5 && b5 <= b10);
        // eps -> 1 pushes the level toward the grid maximum.
        let b_hi = kde.mass_level(0.999).b_eps;
        assert!(b_hi >= b10);
    }

    #[test]
    fn theta_scan_empty_above_max() {
        let kde = Kde2d::new(normal_cloud(100, 7)).unwrap();
        let too_high = kde.density_at((0.0, 0.0)) * 10.0;
        assert!(kde
            .region_theta_scan(too_high, 0.01, &[0.0, 0.5, 1.0])
            .is_empty());
    }

    #[test]
    fn theta_scan_symmetric_profile() {
        // Exactly symmetric cloud about theta = 0.
        let mut points = normal_cloud(60, 8);
        let mirrored: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (-x, y)).collect();
        points.extend(mirrored);
        let kde = Kde2d::new(points).unwrap();
        let b = kde.mass_level(0.1).b_eps;
        let t_grid: Vec<f64> = (0..60).map(|i| -3.0 + i as f64 * 0.1).collect();
        let scan = kde.region_theta_scan(b, 0.01, &t_grid);
        assert!(!scan.is_empty());
        for &(theta, t_min) in &scan {
            // The mirrored theta appears with the same t_min up to one step.
            let mirror = scan
                .iter()
                .filter(|&&(th, _)| (th + theta).abs() <= 0.011)
                .map(|&(_, t)| t)
                .fold(f64::INFINITY, f64::min);
            assert!(
                (mirror - t_min).abs() <= 0.101,
                "theta {theta}: {t_min} vs {mirror}"
            );
        }
    }

    #[test]
    fn theta_scan_contiguous_for_unimodal_cloud() {
        let kde = Kde2d::new(normal_cloud(200, 9)).unwrap();
        let b = kde.mass_level(0.1).b_eps;
        let t_grid: Vec<f64> = (0..80).map(|i| -4.0 + i as f64 * 0.1).collect();
        let scan = kde.region_theta_scan(b, 0.01, &t_grid);
        assert!(!scan.is_empty());
        // Oracle: membership over the full theta grid must form one run.
        for pair in scan.windows(2) {
            assert!(
                (pair[1].0 - pair[0].0 - 0.01).abs() < 1e-9,
                "gap between {} and {}",
                pair[0].0,
                pair[1].0
            );
        }
    }

    #[test]
    fn density_grid_matches_direct_evaluation() {
        let kde = Kde2d::new(normal_cloud(50, 10)).unwrap();
        let spec = kde.default_grid();
        let (grid, _) = kde.density_grid(&spec);
        let dx = (spec.x_range.1 - spec.x_range.0) / spec.nx as f64;
        let dy = (spec.y_range.1 - spec.y_range.0) / spec.ny as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let i = rng.random_range(0..spec.nx);
            let j = rng.random_range(0..spec.ny);
            let x = spec.x_range.0 + (i as f64 + 0.5) * dx;
            let y = spec.y_range.0 + (j as f64 + 0.5) * dy;
            let direct = kde.density_at((x, y));
            let fast = grid[i * spec.ny + j];
            assert!((direct - fast).abs() <= 1e-12 * direct.max(1e-12));
        }
    }
}
