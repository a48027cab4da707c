//! Mission service: session state machine, fixed-tick control loop,
//! telemetry snapshots, headless replay and the HTTP/WebSocket API.

mod command;
mod metrics;
mod replay;
pub mod server;

pub use command::{teleop_from_value, Command};
pub use metrics::{CoverageTracker, RunMetrics};
pub use replay::{parse_script, run_replay, script_to_json, ReplayError, ReplayOutcome, Replayer, ScriptEntry};

use serde::{Deserialize, Serialize};

use crate::geometry::{GridMeta, Pose2D, Rect};
use crate::io::{bind_mission, LoadedScenario};
use crate::nav::{compile_mission, inflate_costmap, Follower, MissionMode, PlannedPath, PursuitParams};
use crate::sim::{Simulator, VelocityCmd};
use crate::slam::{CellClass, Mapper, SearchWindow, TrinaryGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Mapping,
    Executing,
    Paused,
}

pub const ALL_MODES: [Mode; 4] = [Mode::Idle, Mode::Mapping, Mode::Executing, Mode::Paused];

/// Why a command was refused. The session is left untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct Rejection {
    pub code: String,
    pub message: String,
}

impl Rejection {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }

    /// True for rejections produced by the planner.
    pub fn is_planning(&self) -> bool {
        matches!(
            self.code.as_str(),
            "invalid-endpoint" | "unreachable" | "rejected-waypoint" | "empty-region" | "invalid-argument"
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    ModeChanged { stamp: f64, from: Mode, to: Mode },
    Collision { stamp: f64, x: f64, y: f64 },
    MissionSummary { stamp: f64, path_length: f64, duration: f64, cleaned_count: usize },
}

/// Immutable telemetry snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub stamp: f64,
    pub tick: u64,
    pub mode: Mode,
    pub pose: Pose2D,
    pub true_pose: Pose2D,
    pub progress: f64,
    pub debris_remaining: usize,
    pub cleaned_count: usize,
    pub collision_flag: bool,
    pub path_version: u64,
    pub map_version: u64,
    /// Present only when the path changed since the previous frame.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Control decisions and SLAM updates run every this many ticks.
    pub control_every: u64,
    /// Localization against a finished map runs every this many ticks.
    pub localize_every: u64,
    pub telemetry_every: u64,
    /// Seconds after which a teleop command decays to zero.
    pub teleop_ttl: f64,
    pub pursuit: PursuitParams,
    /// Added to the rover radius when inflating obstacles.
    pub safety_margin: f64,
    /// Coverage lane spacing as a fraction of the tool width.
    pub lane_overlap_factor: f64,
    /// Scan-matching window while mapping.
    pub window: SearchWindow,
    /// Narrower window for localizing against a finished map.
    pub localize_window: SearchWindow,
}

impl ServiceConfig {
    pub fn for_scenario(s: &LoadedScenario) -> Self {
        Self {
            control_every: 5,
            localize_every: 25,
            telemetry_every: 10,
            teleop_ttl: 0.5,
            pursuit: PursuitParams {
                lookahead: 0.2,
                goal_tol: 0.05,
                omega_max: PursuitParams::default().omega_max.min(s.params.omega_max),
                v_nom: PursuitParams::default().v_nom.min(s.params.v_max),
                ..PursuitParams::default()
            },
            safety_margin: 0.1,
            lane_overlap_factor: 0.75,
            window: SearchWindow::for_resolution(s.resolution),
            localize_window: SearchWindow {
                xy_half_width: s.resolution,
                xy_step: s.resolution / 2.0,
                theta_half_width: 0.02,
                theta_step: 0.01,
            },
        }
    }
}

struct MissionRun {
    follower: Follower,
    started: f64,
    cleaned_at_start: usize,
}

/// One rover session: simulator, mapper, and the mode machine.
pub struct Service {
    config: ServiceConfig,
    sim: Simulator,
    seed: u64,
    map_meta: GridMeta,
    mode: Mode,
    mapper: Option<Mapper>,
    active_map: Option<TrinaryGrid>,
    map_version: u64,
    mission: Option<MissionRun>,
    active_path: Option<PlannedPath>,
    path_version: u64,
    sent_path_version: u64,
    progress: f64,
    collision_flag: bool,
    teleop: Option<(VelocityCmd, f64)>,
    held: VelocityCmd,
    anchor: Pose2D,
    anchor_odom: Pose2D,
    was_colliding: bool,
    collision_count: usize,
    path_length: f64,
    coverage: CoverageTracker,
    events: Vec<Event>,
}

impl Service {
    pub fn new(scenario: &LoadedScenario, seed: u64) -> Self {
        Self::with_config(scenario, seed, ServiceConfig::for_scenario(scenario))
    }

    pub fn with_config(scenario: &LoadedScenario, seed: u64, config: ServiceConfig) -> Self {
        let mut sim = scenario.simulator(seed);
        sim.state.tool_active = false;
        let map_meta = scenario.map_meta();
        Self {
            config,
            seed,
            map_meta,
            mode: Mode::Idle,
            mapper: None,
            active_map: None,
            map_version: 0,
            mission: None,
            active_path: None,
            path_version: 0,
            sent_path_version: 0,
            progress: 0.0,
            collision_flag: false,
            teleop: None,
            held: VelocityCmd::STOP,
            anchor: sim.state.pose,
            anchor_odom: sim.state.odom_pose,
            was_colliding: false,
            collision_count: 0,
            path_length: 0.0,
            coverage: CoverageTracker::new(map_meta),
            events: Vec::new(),
            sim,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn mapper(&self) -> Option<&Mapper> {
        self.mapper.as_ref()
    }

    pub fn active_map(&self) -> Option<&TrinaryGrid> {
        self.active_map.as_ref()
    }

    pub fn map_version(&self) -> u64 {
        self.map_version
    }

    pub fn map_meta(&self) -> &GridMeta {
        &self.map_meta
    }

    pub fn active_path(&self) -> Option<&PlannedPath> {
        self.active_path.as_ref()
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn collision_flag(&self) -> bool {
        self.collision_flag
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn coverage(&self) -> &CoverageTracker {
        &self.coverage
    }

    /// Current pose estimate: last localization fix plus odometry since.
    pub fn estimate(&self) -> Pose2D {
        self.anchor.compose(&self.anchor_odom.between(&self.sim.state.odom_pose))
    }

    /// Current map for display: the frozen map, or the live one while mapping.
    pub fn display_map(&self) -> Option<TrinaryGrid> {
        match (&self.active_map, &self.mapper) {
            (_, Some(m)) if self.mode == Mode::Mapping => Some(m.trinary()),
            (Some(g), _) => Some(g.clone()),
            _ => None,
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        RunMetrics {
            path_length: self.path_length,
            duration: self.sim.clock.elapsed(),
            coverage_fraction: self.coverage.fraction(),
            cleaned_count: self.sim.state.cleaned_count,
            collision_count: self.collision_count,
            seed: self.seed,
        }
    }

    fn stamp(&self) -> f64 {
        self.sim.clock.elapsed()
    }

    fn set_mode(&mut self, to: Mode) {
        let from = self.mode;
        self.mode = to;
        self.events.push(Event::ModeChanged {
            stamp: self.stamp(),
            from,
            to,
        });
        if !matches!(to, Mode::Mapping | Mode::Executing) {
            self.held = VelocityCmd::STOP;
        }
        self.sim.state.tool_active = to == Mode::Executing;
    }

    fn set_path(&mut self, path: Option<PlannedPath>) {
        self.active_path = path;
        self.path_version += 1;
    }

    fn invalid_mode(&self, cmd: &Command) -> Rejection {
        Rejection::new(
            "invalid-mode",
            format!("{} is not allowed in mode {:?}", cmd.name(), self.mode),
        )
    }

    /// Applies one operator command. Either the whole transition happens or
    /// nothing changes.
    pub fn handle_command(&mut self, cmd: &Command) -> Result<(), Rejection> {
        match (self.mode, cmd) {
            (Mode::Idle, Command::StartMapping) => {
                let est = self.estimate();
                self.anchor = est;
                self.anchor_odom = self.sim.state.odom_pose;
                self.mapper = Some(Mapper::new(self.map_meta, est, self.config.window));
                self.teleop = None;
                self.set_mode(Mode::Mapping);
            }
            (Mode::Mapping, Command::FinishMapping) => {
                let mapper = self.mapper.as_mut().expect("mapping has a mapper");
                mapper.freeze();
                mapper.set_window(self.config.localize_window);
                self.active_map = Some(mapper.trinary());
                self.map_version += 1;
                self.teleop = None;
                self.set_mode(Mode::Idle);
            }
            (Mode::Mapping, Command::Teleop { v, omega }) => {
                self.teleop = Some((VelocityCmd::new(*v, *omega), self.stamp()));
            }
            (Mode::Idle, Command::StartMission(mission)) => {
                let run = self.prepare_mission(mission)?;
                self.path_length += run.0.cost;
                self.coverage.add_reference(run.2);
                self.set_path(Some(run.0));
                self.mission = Some(MissionRun {
                    follower: run.1,
                    started: self.stamp(),
                    cleaned_at_start: self.sim.state.cleaned_count,
                });
                self.progress = 0.0;
                self.collision_flag = false;
                self.set_mode(Mode::Executing);
            }
            (Mode::Executing, Command::Pause) => self.set_mode(Mode::Paused),
            (Mode::Paused, Command::Resume) => {
                self.collision_flag = false;
                self.set_mode(Mode::Executing);
            }
            (Mode::Executing | Mode::Paused, Command::Abort) => {
                self.mission = None;
                self.set_path(None);
                self.set_mode(Mode::Idle);
            }
            _ => return Err(self.invalid_mode(cmd)),
        }
        Ok(())
    }

    /// Plans a mission without touching the session.
    fn prepare_mission(
        &self,
        mission: &crate::nav::Mission,
    ) -> Result<(PlannedPath, Follower, Vec<usize>), Rejection> {
        let map = self
            .active_map
            .as_ref()
            .ok_or_else(|| Rejection::new("no-map", "no map has been recorded yet"))?;
        let bound = bind_mission(mission, &map.meta)
            .map_err(|e| Rejection::new("validation", e.to_string()))?;
        let params = &self.sim.state.params;
        let cmap = inflate_costmap(map, params.radius, self.config.safety_margin);
        let start = self.estimate();
        let lane = params.tool_width * self.config.lane_overlap_factor;
        let path = compile_mission(&cmap, &start, &bound, lane)
            .map_err(|e| Rejection::new(e.code(), e.to_string()))?;
        let follower = Follower::new(path.clone(), self.config.pursuit)
            .map_err(|e| Rejection::new(e.code(), e.to_string()))?;

        // Coverage reference: free cells reachable from the start, inside the
        // mission region for coverage missions.
        let meta = cmap.meta;
        let start_cell = meta.cell_of(start.x, start.y).expect("start checked by planner");
        let reachable = cmap.reachable_from(start_cell);
        let region: Option<Rect> = match bound.mode {
            MissionMode::Coverage => bound.region,
            MissionMode::Waypoints => None,
        };
        let reference = (0..meta.len())
            .filter(|&o| reachable[o])
            .filter(|&o| {
                region.is_none_or(|r| {
                    let (x, y) = meta.cell_center(meta.index_at(o));
                    r.contains(x, y)
                })
            })
            .collect();
        Ok((path, follower, reference))
    }

    /// Advances the session by one simulator tick. Returns a telemetry frame
    /// on telemetry ticks.
    pub fn control_tick(&mut self) -> Option<TelemetryFrame> {
        let tick = self.sim.clock.tick;
        if tick % self.config.control_every == 0 {
            if self.mode == Mode::Mapping || tick % self.config.localize_every == 0 {
                self.localize();
            }
            self.held = self.decide();
        }
        let report = self.sim.tick(&self.held);
        if self.mode == Mode::Executing {
            let reach = self.sim.state.params.tool_width / 2.0;
            self.coverage.sweep(&self.sim.state.pose, reach);
        }
        if report.collided && !self.was_colliding {
            self.collision_count += 1;
            let p = self.sim.state.pose;
            self.events.push(Event::Collision {
                stamp: self.stamp(),
                x: p.x,
                y: p.y,
            });
            if self.mode == Mode::Executing {
                self.collision_flag = true;
                self.set_mode(Mode::Paused);
            }
        }
        self.was_colliding = report.collided;
        if self.sim.clock.tick % self.config.telemetry_every == 0 {
            Some(self.snapshot_telemetry())
        } else {
            None
        }
    }

    /// Scan update: full SLAM while mapping, matching against the frozen
    /// map otherwise.
    fn localize(&mut self) {
        let Some(mapper) = self.mapper.as_mut() else {
            return;
        };
        let Ok(scan) = self.sim.scan() else {
            return;
        };
        let odom = self.sim.state.odom_pose;
        let delta = self.anchor_odom.between(&odom);
        mapper.set_pose(self.anchor);
        if let Ok(pose) = mapper.update(&delta, &scan) {
            self.anchor = pose;
            self.anchor_odom = odom;
        }
    }

    fn decide(&mut self) -> VelocityCmd {
        match self.mode {
            Mode::Mapping => match self.teleop {
                Some((cmd, at)) if self.stamp() - at <= self.config.teleop_ttl => cmd,
                _ => VelocityCmd::STOP,
            },
            Mode::Executing => {
                let est = self.estimate();
                let run = self.mission.as_mut().expect("executing has a mission");
                let step = run.follower.step(&est);
                self.progress = step.progress;
                if step.done {
                    let (started, cleaned_at_start) = (run.started, run.cleaned_at_start);
                    let path_length = run.follower.path().cost;
                    self.mission = None;
                    self.events.push(Event::MissionSummary {
                        stamp: self.stamp(),
                        path_length,
                        duration: self.stamp() - started,
                        cleaned_count: self.sim.state.cleaned_count - cleaned_at_start,
                    });
                    self.set_mode(Mode::Idle);
                    VelocityCmd::STOP
                } else {
                    step.cmd
                }
            }
            Mode::Idle | Mode::Paused => VelocityCmd::STOP,
        }
    }

    /// Builds a frame; the path is included only when it changed since the
    /// last frame.
    pub fn snapshot_telemetry(&mut self) -> TelemetryFrame {
        let path = if self.path_version != self.sent_path_version {
            self.sent_path_version = self.path_version;
            Some(self.active_path.as_ref().map(|p| p.points.clone()).unwrap_or_default())
        } else {
            None
        };
        TelemetryFrame {
            stamp: self.stamp(),
            tick: self.sim.clock.tick,
            mode: self.mode,
            pose: self.estimate(),
            true_pose: self.sim.state.pose,
            progress: self.progress,
            debris_remaining: self.sim.world.debris.len(),
            cleaned_count: self.sim.state.cleaned_count,
            collision_flag: self.collision_flag,
            path_version: self.path_version,
            map_version: self.map_version,
            path,
        }
    }
}

/// Map JSON for the operator console: metadata plus run-length-encoded cells
/// in row-major order from the bottom row, using 0 free, 100 occupied and
/// -1 unknown.
pub fn map_to_json(grid: &TrinaryGrid, version: u64) -> serde_json::Value {
    let mut runs: Vec<(i8, usize)> = Vec::new();
    for c in &grid.cells {
        let v = match c {
            CellClass::Free => 0,
            CellClass::Occupied => 100,
            CellClass::Unknown => -1,
        };
        match runs.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    let m = &grid.meta;
    serde_json::json!({
        "version": version,
        "resolution": m.resolution,
        "width": m.width,
        "height": m.height,
        "origin": [m.origin_x, m.origin_y],
        "runs": runs,
    })
}

/// Inverse of [`map_to_json`].
pub fn map_from_json(value: &serde_json::Value) -> Result<TrinaryGrid, crate::io::ValidationError> {
    use crate::io::ValidationError;
    let num = |k: &str| value.get(k).and_then(serde_json::Value::as_f64);
    let uint = |k: &str| value.get(k).and_then(serde_json::Value::as_u64);
    let origin = value.get("origin").and_then(|o| o.as_array()).filter(|o| o.len() == 2);
    let (Some(res), Some(w), Some(h), Some(origin)) = (num("resolution"), uint("width"), uint("height"), origin) else {
        return Err(ValidationError::single("map needs resolution, width, height and origin [x, y]"));
    };
    let (Some(ox), Some(oy)) = (origin[0].as_f64(), origin[1].as_f64()) else {
        return Err(ValidationError::single("map origin must be numeric"));
    };
    let meta = GridMeta::new(res, w as usize, h as usize, ox, oy)
        .map_err(|e| ValidationError::single(format!("map: {e}")))?;
    let runs = value
        .get("runs")
        .and_then(|r| r.as_array())
        .ok_or_else(|| ValidationError::single("map needs `runs`"))?;
    let mut cells = Vec::with_capacity(meta.len());
    for (i, run) in runs.iter().enumerate() {
        let pair = run.as_array().filter(|p| p.len() == 2);
        let (class, n) = match pair.map(|p| (p[0].as_i64(), p[1].as_u64())) {
            Some((Some(0), Some(n))) => (CellClass::Free, n),
            Some((Some(100), Some(n))) => (CellClass::Occupied, n),
            Some((Some(-1), Some(n))) => (CellClass::Unknown, n),
            _ => return Err(ValidationError::single(format!("map run {i} must be [0|100|-1, count]"))),
        };
        if cells.len() + n as usize > meta.len() {
            return Err(ValidationError::single("map runs exceed width x height"));
        }
        cells.extend(std::iter::repeat_n(class, n as usize));
    }
    if cells.len() != meta.len() {
        return Err(ValidationError::single("map runs do not cover width x height"));
    }
    Ok(TrinaryGrid { meta, cells })
}
