//! Scenario files: tank, obstacles, debris, rover, LIDAR and noise.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{GridIndex, GridMeta, Pose2D, Rect};
use crate::io::ValidationError;
use crate::rng::named_stream;
use crate::sim::{
    LidarConfig, OdometryNoise, RoverParams, RoverState, SimClock, Simulator, TankWorld,
};
use crate::sim::Obstacle;

/// Extra cells kept around the tank in SLAM maps.
pub const MAP_MARGIN_CELLS: usize = 4;

const DEBRIS_ATTEMPTS_PER_CELL: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoverSpec {
    pub start: StartPose,
    pub radius: f64,
    pub tool_width: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl RoverSpec {
    pub fn params(&self) -> RoverParams {
        RoverParams {
            radius: self.radius,
            tool_width: self.tool_width,
            v_max: self.v_max,
            omega_max: self.omega_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DebrisSpec {
    Seeded { count: usize, seed: u64 },
    Cells { cells: Vec<GridIndex> },
}

impl Default for DebrisSpec {
    fn default() -> Self {
        DebrisSpec::Cells { cells: Vec::new() }
    }
}

fn default_resolution() -> f64 {
    0.05
}

fn default_dt() -> f64 {
    0.02
}

/// Scenario file contents. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub tank: Rect,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub debris: DebrisSpec,
    pub rover: RoverSpec,
    #[serde(default)]
    pub lidar: LidarConfig,
    #[serde(default)]
    pub odometry_noise: OdometryNoise,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        let p = RoverParams::default();
        Self {
            tank: Rect::new(0.0, 0.0, 10.0, 6.0),
            resolution: default_resolution(),
            obstacles: Vec::new(),
            debris: DebrisSpec::Seeded { count: 50, seed: 7 },
            rover: RoverSpec {
                start: StartPose {
                    x: 1.0,
                    y: 1.0,
                    theta: 0.0,
                },
                radius: p.radius,
                tool_width: p.tool_width,
                v_max: p.v_max,
                omega_max: p.omega_max,
            },
            lidar: LidarConfig::default(),
            odometry_noise: OdometryNoise::default(),
            dt: default_dt(),
        }
    }
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub world: TankWorld,
    pub start: Pose2D,
    pub params: RoverParams,
    pub lidar: LidarConfig,
    pub odometry_noise: OdometryNoise,
    pub dt: f64,
    pub resolution: f64,
}

impl LoadedScenario {
    pub fn simulator(&self, seed: u64) -> Simulator {
        Simulator::new(
            self.world.clone(),
            RoverState::new(self.start, self.params),
            SimClock::new(self.dt).expect("validated dt"),
            self.lidar,
            self.odometry_noise,
            seed,
        )
    }

    /// Grid used for SLAM maps of this tank.
    pub fn map_meta(&self) -> GridMeta {
        map_meta_for(&self.world.bounds, self.resolution)
    }
}

/// SLAM map grid for a tank: [`MAP_MARGIN_CELLS`] spare cells on every side,
/// shifted half a cell so the walls fall on cell centers.
pub fn map_meta_for(bounds: &Rect, resolution: f64) -> GridMeta {
    let pad = (MAP_MARGIN_CELLS as f64 + 0.5) * resolution;
    let cells = |extent: f64| (extent / resolution).round() as usize + 2 * MAP_MARGIN_CELLS + 1;
    GridMeta::new(
        resolution,
        cells(bounds.width()),
        cells(bounds.height()),
        bounds.xmin - pad,
        bounds.ymin - pad,
    )
    .expect("validated bounds and resolution")
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ValidationError> {
    serde_json::from_str(text).map_err(|e| ValidationError::single(format!("scenario: {e}")))
}

/// Parses and validates a scenario, seeding debris.
pub fn load_scenario(text: &str) -> Result<LoadedScenario, ValidationError> {
    parse_scenario(text)?.load()
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Scenario {
    /// Every semantic violation, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let tank_ok = self.tank.is_valid();
        if !tank_ok {
            errs.push("tank must have positive width and height".into());
        }
        if !positive(self.resolution) {
            errs.push("resolution must be positive".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.is_well_formed() {
                errs.push(format!("obstacle {i} has nonpositive dimensions"));
            } else if tank_ok && !self.tank.contains_rect(&o.bounding_box()) {
                errs.push(format!("obstacle {i} extends outside the tank"));
            }
        }
        let r = &self.rover;
        for (name, v) in [
            ("radius", r.radius),
            ("tool_width", r.tool_width),
            ("v_max", r.v_max),
            ("omega_max", r.omega_max),
        ] {
            if !positive(v) {
                errs.push(format!("rover {name} must be positive"));
            }
        }
        match Pose2D::new(r.start.x, r.start.y, r.start.theta) {
            Err(_) => errs.push("rover start must be finite".into()),
            Ok(p) if tank_ok && positive(r.radius) => {
                let probe = TankWorld {
                    bounds: self.tank,
                    obstacles: self.obstacles.clone(),
                    debris: BTreeSet::new(),
                    debris_meta: GridMeta::new(1.0, 1, 1, 0.0, 0.0).expect("static"),
                };
                if probe.footprint_collides(p.x, p.y, r.radius) {
                    errs.push("rover start footprint overlaps a wall or obstacle".into());
                }
            }
            Ok(_) => {}
        }
        errs.extend(self.lidar.validate().into_iter().map(|e| format!("lidar: {e}")));
        let n = &self.odometry_noise;
        if !(n.trans_sigma >= 0.0 && n.trans_sigma.is_finite() && n.rot_sigma >= 0.0 && n.rot_sigma.is_finite()) {
            errs.push("odometry noise sigmas must be finite and nonnegative".into());
        }
        if !positive(self.dt) {
            errs.push("dt must be positive".into());
        }
        errs
    }

    pub fn load(&self) -> Result<LoadedScenario, ValidationError> {
        let mut errs = self.violations();
        if !errs.is_empty() {
            return Err(ValidationError::new(errs));
        }
        let mut world = TankWorld::new(self.tank, self.obstacles.clone(), self.resolution)
            .map_err(|e| ValidationError::single(e.to_string()))?;
        let meta = world.debris_meta;
        let free = |idx: GridIndex| {
            let (x, y) = meta.cell_center(idx);
            world.is_free_point(x, y)
        };
        match &self.debris {
            DebrisSpec::Cells { cells } => {
                for (i, c) in cells.iter().enumerate() {
                    if !meta.contains_index(*c) {
                        errs.push(format!("debris cell {i} ({}, {}) lies outside the tank", c.row, c.col));
                    } else if !free(*c) {
                        errs.push(format!("debris cell {i} ({}, {}) lies inside an obstacle", c.row, c.col));
                    }
                }
                if errs.is_empty() {
                    world.debris = cells.iter().copied().collect();
                }
            }
            DebrisSpec::Seeded { count, seed } => {
                let mut rng = named_stream(*seed, "debris");
                let mut placed = BTreeSet::new();
                let mut attempts = 0;
                let budget = count.saturating_mul(DEBRIS_ATTEMPTS_PER_CELL);
                while placed.len() < *count && attempts < budget {
                    attempts += 1;
                    let idx = GridIndex::new(rng.random_range(0..meta.height), rng.random_range(0..meta.width));
                    if free(idx) {
                        placed.insert(idx);
                    }
                }
                if placed.len() < *count {
                    errs.push(format!("could not place {count} debris cells in free space"));
                }
                world.debris = placed;
            }
        }
        if !errs.is_empty() {
            return Err(ValidationError::new(errs));
        }
        let s = &self.rover.start;
        Ok(LoadedScenario {
            world,
            start: Pose2D::new(s.x, s.y, s.theta).expect("validated"),
            params: self.rover.params(),
            lidar: self.lidar,
            odometry_noise: self.odometry_noise,
            dt: self.dt,
            resolution: self.resolution,
        })
    }
}
