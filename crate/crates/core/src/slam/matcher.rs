use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_finite, Pose2D};
use crate::sim::LidarScan;
use crate::slam::grid::OccupancyGrid;
use crate::slam::SlamError;

/// Pose lattice explored by [`scan_match`], centered on the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchWindow {
    pub xy_half_width: f64,
    pub xy_step: f64,
    pub theta_half_width: f64,
    pub theta_step: f64,
}

impl SearchWindow {
    /// Default window for a grid of the given resolution.
    pub fn for_resolution(resolution: f64) -> Self {
        Self {
            xy_half_width: 0.15,
            xy_step: resolution,
            theta_half_width: 0.1,
            theta_step: 0.01,
        }
    }

    pub fn validate(&self) -> Result<(), SlamError> {
        let ok = |half: f64, step: f64| {
            half.is_finite() && step.is_finite() && step > 0.0 && half >= 0.0 && (half == 0.0 || step <= half + 1e-12)
        };
        if ok(self.xy_half_width, self.xy_step) && ok(self.theta_half_width, self.theta_step) {
            Ok(())
        } else {
            Err(SlamError::InvalidWindow(*self))
        }
    }

    /// Lattice half-extent in steps, per axis.
    pub fn steps(&self) -> (i64, i64) {
        (
            (self.xy_half_width / self.xy_step + 1e-9).floor() as i64,
            (self.theta_half_width / self.theta_step + 1e-9).floor() as i64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub pose: Pose2D,
    pub score: f64,
    /// Chosen lattice offset `(dx, dy, dθ)` in steps.
    pub offset: (i64, i64, i64),
}

/// Correlation score of a scan placed at `pose`: the sum of occupancy
/// probabilities at the hit endpoints (off-grid endpoints add nothing).
pub fn score_pose(grid: &OccupancyGrid, scan: &LidarScan, pose: &Pose2D) -> f64 {
    let probs = grid.probabilities();
    let pts = endpoints(scan, pose.theta);
    score_points(grid, probs, &pts, pose.x, pose.y)
}

fn endpoints(scan: &LidarScan, theta: f64) -> Vec<(f64, f64)> {
    scan.angles
        .iter()
        .zip(&scan.ranges)
        .zip(&scan.hits)
        .filter(|(_, hit)| **hit)
        .map(|((a, r), _)| {
            let (s, c) = (theta + a).sin_cos();
            (r * c, r * s)
        })
        .collect()
}

fn score_points(grid: &OccupancyGrid, probs: &[f64], pts: &[(f64, f64)], x: f64, y: f64) -> f64 {
    let meta = &grid.meta;
    let mut score = 0.0;
    for (ex, ey) in pts {
        if let Some(idx) = meta.cell_of(x + ex, y + ey) {
            score += probs[meta.offset(idx)];
        }
    }
    score
}

/// Exhaustive correlative search over the window lattice around `prior`.
///
/// Every candidate is scored before one is chosen: highest score wins, ties
/// go to the smallest `(|dθ|, |dy|, |dx|)` correction and then to the lowest
/// lattice position.
pub fn scan_match(
    grid: &OccupancyGrid,
    scan: &LidarScan,
    prior: &Pose2D,
    window: &SearchWindow,
) -> Result<MatchResult, SlamError> {
    window.validate()?;
    if !grid.has_information() {
        return Err(SlamError::NoInformation);
    }
    let probs = grid.probabilities();
    let meta = &grid.meta;
    let (nxy, nth) = window.steps();
    let mut scored = Vec::with_capacity(((2 * nxy + 1).pow(2) * (2 * nth + 1)) as usize);
    // Endpoint rows depend only on the y offset and columns only on the x
    // offset, so both are tabulated once per heading. Same arithmetic as
    // `GridMeta::cell_of`, so scores equal `score_pose` exactly.
    let axis = |origin: f64, base: f64, coords: &mut dyn Iterator<Item = f64>, n: usize| -> Vec<Vec<usize>> {
        let offs: Vec<f64> = coords.collect();
        (-nxy..=nxy)
            .map(|i| {
                let p = base + i as f64 * window.xy_step;
                offs.iter()
                    .map(|e| {
                        let v = p + e;
                        let c = ((v - origin) / meta.resolution).floor();
                        if v.is_finite() && c >= 0.0 && (c as i64) < n as i64 {
                            c as usize
                        } else {
                            usize::MAX
                        }
                    })
                    .collect()
            })
            .collect()
    };
    for k in -nth..=nth {
        let theta = prior.theta + k as f64 * window.theta_step;
        let pts = endpoints(scan, theta);
        let cols = axis(meta.origin_x, prior.x, &mut pts.iter().map(|p| p.0), meta.width);
        let rows = axis(meta.origin_y, prior.y, &mut pts.iter().map(|p| p.1), meta.height);
        for (j, row) in (-nxy..=nxy).zip(&rows) {
            for (i, col) in (-nxy..=nxy).zip(&cols) {
                let mut score = 0.0;
                for (r, c) in row.iter().zip(col) {
                    if *r != usize::MAX && *c != usize::MAX {
                        score += probs[r * meta.width + c];
                    }
                }
                scored.push((score, (i, j, k)));
            }
        }
    }
    let tie_key = |(i, j, k): (i64, i64, i64)| (k.abs(), j.abs(), i.abs(), k, j, i);
    let (score, (i, j, k)) = scored
        .into_iter()
        .reduce(|best, cand| {
            if cand.0 > best.0 || (cand.0 == best.0 && tie_key(cand.1) < tie_key(best.1)) {
                cand
            } else {
                best
            }
        })
        .expect("lattice always has the zero offset");
    Ok(MatchResult {
        pose: Pose2D {
            x: prior.x + i as f64 * window.xy_step,
            y: prior.y + j as f64 * window.xy_step,
            theta: wrap_finite(prior.theta + k as f64 * window.theta_step),
        },
        score,
        offset: (i, j, k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridMeta, Rect};
    use crate::rng::named_stream;
    use crate::sim::{simulate_scan, LidarConfig, Obstacle, TankWorld};
    use crate::slam::integrate::integrate_scan;

    fn setup() -> (TankWorld, OccupancyGrid, LidarConfig, Pose2D) {
        let world = TankWorld::new(
            Rect::new(0.0, 0.0, 6.0, 4.0),
            vec![Obstacle::rect(2.0, 1.0, 2.5, 1.8), Obstacle::circle(4.5, 2.8, 0.3)],
            0.05,
        )
        .unwrap();
        let meta = GridMeta::new(0.05, 130, 90, -0.225, -0.225).unwrap();
        let cfg = LidarConfig {
            range_noise_sigma: 0.0,
            ..LidarConfig::default()
        };
        let pose = Pose2D::new(1.0, 2.5, 0.2).unwrap();
        let mut grid = OccupancyGrid::new(meta);
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(0, "lidar"), 0.0).unwrap();
        for _ in 0..3 {
            integrate_scan(&mut grid, &pose, &scan).unwrap();
        }
        (world, grid, cfg, pose)
    }

    #[test]
    fn self_match_returns_prior() {
        let (world, grid, cfg, pose) = setup();
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(0, "lidar"), 0.0).unwrap();
        let m = scan_match(&grid, &scan, &pose, &SearchWindow::for_resolution(0.05)).unwrap();
        assert_eq!(m.pose, pose);
        assert_eq!(m.offset, (0, 0, 0));
    }

    #[test]
    fn returned_score_equals_score_pose() {
        let (world, grid, cfg, pose) = setup();
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(4, "lidar"), 0.0).unwrap();
        for (dx, dy, dt) in [(0.03, -0.02, 0.015), (-0.11, 0.07, -0.06), (0.0, 0.0, 0.0)] {
            let prior = Pose2D::new(pose.x + dx, pose.y + dy, pose.theta + dt).unwrap();
            let m = scan_match(&grid, &scan, &prior, &SearchWindow::for_resolution(0.05)).unwrap();
            assert_eq!(m.score, score_pose(&grid, &scan, &m.pose));
        }
    }

    #[test]
    fn displaced_prior_is_recovered() {
        let (world, grid, cfg, pose) = setup();
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(0, "lidar"), 0.0).unwrap();
        let prior = Pose2D::new(pose.x + 0.05, pose.y, pose.theta + 0.02).unwrap();
        let w = SearchWindow::for_resolution(0.05);
        let m = scan_match(&grid, &scan, &prior, &w).unwrap();
        assert!((m.pose.x - pose.x).abs() <= w.xy_step + 1e-9);
        assert!((m.pose.y - pose.y).abs() <= w.xy_step + 1e-9);
        assert!((m.pose.theta - pose.theta).abs() <= w.theta_step + 1e-9);
        // The exhaustive search is its own oracle.
        let truth_score = score_pose(&grid, &scan, &Pose2D::new(prior.x - 0.05, prior.y, prior.theta - 0.02).unwrap());
        assert!(m.score >= truth_score);
    }

    #[test]
    fn prior_beyond_window_lands_on_boundary() {
        let (world, grid, cfg, pose) = setup();
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(0, "lidar"), 0.0).unwrap();
        let self_score = scan_match(&grid, &scan, &pose, &SearchWindow::for_resolution(0.05))
            .unwrap()
            .score;
        let prior = Pose2D::new(pose.x + 0.4, pose.y, pose.theta).unwrap();
        let m = scan_match(&grid, &scan, &prior, &SearchWindow::for_resolution(0.05)).unwrap();
        assert_eq!(m.offset.0, -3, "should pull toward the truth as far as allowed");
        assert!(m.score < self_score);
    }

    #[test]
    fn empty_grid_has_no_information() {
        let (world, _, cfg, pose) = setup();
        let grid = OccupancyGrid::new(GridMeta::new(0.05, 10, 10, 0.0, 0.0).unwrap());
        let scan = simulate_scan(&world, &pose, &cfg, &mut named_stream(0, "lidar"), 0.0).unwrap();
        assert_eq!(
            scan_match(&grid, &scan, &pose, &SearchWindow::for_resolution(0.05)),
            Err(SlamError::NoInformation)
        );
    }

    #[test]
    fn window_validation() {
        let mut w = SearchWindow::for_resolution(0.05);
        assert!(w.validate().is_ok());
        assert_eq!(w.steps(), (3, 10));
        w.xy_step = 0.0;
        assert!(w.validate().is_err());
        w.xy_step = 0.2;
        assert!(w.validate().is_err());
    }
}
