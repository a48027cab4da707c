//! Occupancy-grid SLAM: log-odds mapping with correlative scan matching for
//! pose correction.

mod grid;
mod integrate;
mod matcher;

pub use grid::{
    classify_cell, occupancy_prob, CellClass, OccupancyGrid, TrinaryGrid, FREE_THRESH, L_FREE,
    L_MAX, L_MIN, L_OCC, OCCUPIED_THRESH,
};
pub use integrate::{integrate_scan, integrate_scan_observed};
pub use matcher::{scan_match, score_pose, MatchResult, SearchWindow};

use thiserror::Error;

use crate::geometry::{GridMeta, Pose2D};
use crate::sim::LidarScan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlamError {
    #[error("grid carries no information to match against")]
    NoInformation,
    #[error("pose ({x}, {y}) lies outside the map grid")]
    PoseOutsideGrid { x: f64, y: f64 },
    #[error("invalid search window {0:?}")]
    InvalidWindow(SearchWindow),
}

/// Online mapper state. While mapping, each update predicts with odometry,
/// corrects by scan matching and integrates the scan. Once frozen, updates
/// only localize against the existing map.
#[derive(Debug, Clone)]
pub struct Mapper {
    grid: OccupancyGrid,
    pose: Pose2D,
    window: SearchWindow,
    observations: Vec<u32>,
    updates: u64,
    frozen: bool,
}

impl Mapper {
    pub fn new(meta: GridMeta, initial: Pose2D, window: SearchWindow) -> Self {
        Self {
            grid: OccupancyGrid::new(meta),
            pose: initial,
            window,
            observations: vec![0; meta.len()],
            updates: 0,
            frozen: false,
        }
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn set_pose(&mut self, pose: Pose2D) {
        self.pose = pose;
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Number of beam updates each cell has received.
    pub fn observations(&self) -> &[u32] {
        &self.observations
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn window(&self) -> &SearchWindow {
        &self.window
    }

    pub fn set_window(&mut self, window: SearchWindow) {
        self.window = window;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Stops map building; later updates only localize.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn trinary(&self) -> TrinaryGrid {
        TrinaryGrid::from_occupancy(&self.grid)
    }

    /// One SLAM step with a body-frame odometry increment and a new scan.
    pub fn update(&mut self, odom_delta: &Pose2D, scan: &LidarScan) -> Result<Pose2D, SlamError> {
        let predicted = self.pose.compose(odom_delta);
        let corrected = if self.grid.has_information() {
            scan_match(&self.grid, scan, &predicted, &self.window)?.pose
        } else {
            predicted
        };
        if !self.frozen {
            let obs = &mut self.observations;
            integrate_scan_observed(&mut self.grid, &corrected, scan, |off| obs[off] += 1)?;
        }
        self.pose = corrected;
        self.updates += 1;
        Ok(corrected)
    }
}

/// Free-function form of [`Mapper::update`].
pub fn slam_update(
    mapper: &mut Mapper,
    odom_delta: &Pose2D,
    scan: &LidarScan,
) -> Result<Pose2D, SlamError> {
    mapper.update(odom_delta, scan)
}
