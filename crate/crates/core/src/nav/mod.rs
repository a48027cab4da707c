//! Planning: costmap inflation, A*, waypoint missions, boustrophedon
//! coverage and a pure-pursuit follower.

mod astar;
mod costmap;
mod coverage;
mod pursuit;

pub use astar::{octile, plan_astar};
pub use costmap::{inflate_costmap, Cost, Costmap, DIST_EPS};
pub use coverage::{coverage_plan, coverage_plan_from, lane_heights};
pub use pursuit::{pure_pursuit_cmd, FollowStep, Follower, PursuitParams};

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridIndex, GridMeta, Pose2D, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Start,
    Goal,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endpoint::Start => "start",
            Endpoint::Goal => "goal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("{0} cell is not free")]
    InvalidEndpoint(Endpoint),
    #[error("{}", match .segment {
        Some(i) => format!("segment {i} is unreachable"),
        None => "goal is unreachable".to_string(),
    })]
    Unreachable { segment: Option<usize> },
    #[error("waypoint {index} lies in a lethal cell")]
    RejectedWaypoint { index: usize },
    #[error("coverage region contains no free cell")]
    EmptyRegion,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl PlanError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::InvalidEndpoint(_) => "invalid-endpoint",
            PlanError::Unreachable { .. } => "unreachable",
            PlanError::RejectedWaypoint { .. } => "rejected-waypoint",
            PlanError::EmptyRegion => "empty-region",
            PlanError::InvalidArgument(_) => "invalid-argument",
        }
    }
}

/// World-frame polyline with its length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub points: Vec<(f64, f64)>,
    pub cost: f64,
}

impl PlannedPath {
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        let cost = points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum();
        Self { points, cost }
    }

    /// Path through cell centers. The cost is counted per move kind so two
    /// paths with the same move counts report bit-identical costs.
    pub fn from_cells(meta: &GridMeta, cells: &[GridIndex]) -> Self {
        let (mut straight, mut diagonal) = (0u64, 0u64);
        for w in cells.windows(2) {
            if w[0].row != w[1].row && w[0].col != w[1].col {
                diagonal += 1;
            } else {
                straight += 1;
            }
        }
        Self {
            points: cells.iter().map(|c| meta.cell_center(*c)).collect(),
            cost: grid_path_cost(meta.resolution, straight, diagonal),
        }
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                let q = self.points[i - 1];
                acc += (p.0 - q.0).hypot(p.1 - q.1);
            }
            out.push(acc);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends `other`, dropping its first point when it repeats our last.
    pub fn extend(&mut self, other: &PlannedPath) {
        let skip = usize::from(!self.points.is_empty() && self.points.last() == other.points.first());
        self.points.extend_from_slice(&other.points[skip..]);
        self.cost += other.cost;
    }
}

/// Cost of a grid path with the given numbers of straight and diagonal moves.
pub fn grid_path_cost(resolution: f64, straight: u64, diagonal: u64) -> f64 {
    straight as f64 * resolution + diagonal as f64 * (resolution * SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissionMode {
    Waypoints,
    Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

/// Operator cleaning request in the map frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub version: u32,
    pub frame: String,
    pub mode: MissionMode,
    pub waypoints: Vec<Waypoint>,
    pub region: Option<Rect>,
}

impl Mission {
    pub fn waypoints(points: &[(f64, f64)]) -> Self {
        Self {
            version: 1,
            frame: "map".into(),
            mode: MissionMode::Waypoints,
            waypoints: points.iter().map(|&(x, y)| Waypoint { x, y }).collect(),
            region: None,
        }
    }

    pub fn coverage(region: Option<Rect>) -> Self {
        Self {
            version: 1,
            frame: "map".into(),
            mode: MissionMode::Coverage,
            waypoints: Vec::new(),
            region,
        }
    }

    /// Coverage region, defaulting to the full map extent.
    pub fn region_or_extent(&self, meta: &GridMeta) -> Rect {
        self.region
            .unwrap_or_else(|| Rect::new(meta.origin_x, meta.origin_y, meta.x_max(), meta.y_max()))
    }
}

/// Compiles a mission into one followable path from `start`.
pub fn compile_mission(
    cmap: &Costmap,
    start: &Pose2D,
    mission: &Mission,
    tool_width: f64,
) -> Result<PlannedPath, PlanError> {
    let meta = &cmap.meta;
    let start_cell = meta
        .cell_of(start.x, start.y)
        .filter(|c| cmap.is_free(*c))
        .ok_or(PlanError::InvalidEndpoint(Endpoint::Start))?;
    match mission.mode {
        MissionMode::Waypoints => {
            if mission.waypoints.is_empty() {
                return Err(PlanError::InvalidArgument("waypoints must be non-empty".into()));
            }
            let mut goals = Vec::with_capacity(mission.waypoints.len());
            for (index, wp) in mission.waypoints.iter().enumerate() {
                let cell = meta
                    .cell_of(wp.x, wp.y)
                    .filter(|c| cmap.is_free(*c))
                    .ok_or(PlanError::RejectedWaypoint { index })?;
                goals.push(cell);
            }
            let mut path = PlannedPath {
                points: Vec::new(),
                cost: 0.0,
            };
            let mut from = start_cell;
            for (segment, goal) in goals.into_iter().enumerate() {
                let leg = plan_astar(cmap, from, goal).map_err(|e| match e {
                    PlanError::Unreachable { .. } => PlanError::Unreachable {
                        segment: Some(segment),
                    },
                    other => other,
                })?;
                path.extend(&leg);
                from = goal;
            }
            Ok(path)
        }
        MissionMode::Coverage => {
            let region = mission.region_or_extent(meta);
            coverage_plan_from(cmap, tool_width, &region, Some(start_cell))
        }
    }
}
