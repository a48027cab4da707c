//! Planar tank simulator: unicycle kinematics, analytic LIDAR, odometry
//! drift, debris cleaning and a fixed-step clock.

mod world;

pub use world::{cast_ray, debris_grid, sweep_clean, Obstacle, TankWorld};

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_finite, Pose2D};
use crate::rng::SimStreams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: point ({x}, {y}) is outside the tank or inside an obstacle")]
    InvalidState { x: f64, y: f64 },
}

/// Commanded body velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCmd {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCmd {
    pub const STOP: VelocityCmd = VelocityCmd { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn clamped(&self, limits: &VelocityLimits) -> Self {
        Self {
            v: self.v.clamp(-limits.v_max, limits.v_max),
            omega: self.omega.clamp(-limits.omega_max, limits.omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

const STRAIGHT_OMEGA: f64 = 1e-9;

/// Exact arc integration of the unicycle model over `dt`.
pub fn step_kinematics(pose: &Pose2D, cmd: &VelocityCmd, dt: f64) -> Result<Pose2D, SimError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !pose.is_finite() || !cmd.v.is_finite() || !cmd.omega.is_finite() {
        return Err(SimError::InvalidArgument("non-finite pose or command".into()));
    }
    Ok(arc_step(pose, cmd, dt))
}

fn arc_step(pose: &Pose2D, cmd: &VelocityCmd, dt: f64) -> Pose2D {
    let th = pose.theta;
    if cmd.omega.abs() < STRAIGHT_OMEGA {
        return Pose2D {
            x: pose.x + cmd.v * dt * th.cos(),
            y: pose.y + cmd.v * dt * th.sin(),
            theta: th,
        };
    }
    let r = cmd.v / cmd.omega;
    let th2 = th + cmd.omega * dt;
    Pose2D {
        x: pose.x + r * (th2.sin() - th.sin()),
        y: pose.y + r * (th.cos() - th2.cos()),
        theta: wrap_finite(th2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarConfig {
    pub beam_count: usize,
    pub fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beam_count: 360,
            fov: TAU,
            max_range: 8.0,
            range_noise_sigma: 0.01,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.beam_count == 0 {
            v.push("lidar.beam_count must be >= 1".to_string());
        }
        if !(self.fov >= 0.0 && self.fov <= TAU) {
            v.push(format!("lidar.fov must be in [0, 2pi], got {}", self.fov));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            v.push(format!("lidar.max_range must be positive, got {}", self.max_range));
        }
        if !(self.range_noise_sigma >= 0.0 && self.range_noise_sigma.is_finite()) {
            v.push(format!(
                "lidar.range_noise_sigma must be >= 0, got {}",
                self.range_noise_sigma
            ));
        }
        v
    }

    /// Beam angles in the rover frame, ascending and centered on zero. A
    /// full-circle fov spaces beams `2π / n` apart without duplicating the
    /// seam; otherwise the first and last beams sit on the fov edges.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.beam_count;
        if n == 1 {
            return vec![0.0];
        }
        if self.fov >= TAU - 1e-12 {
            let step = TAU / n as f64;
            (0..n).map(|i| -std::f64::consts::PI + i as f64 * step).collect()
        } else {
            let step = self.fov / (n - 1) as f64;
            (0..n).map(|i| -self.fov / 2.0 + i as f64 * step).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub hits: Vec<bool>,
    pub stamp: f64,
}

impl LidarScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Smallest range reported for a hit after noise.
const MIN_RANGE: f64 = 1e-6;

/// Ray-casts a full scan from `pose`. Hit ranges get Gaussian noise and are
/// clamped to `(0, max_range]`; misses report exactly `max_range`.
pub fn simulate_scan(
    world: &TankWorld,
    pose: &Pose2D,
    cfg: &LidarConfig,
    rng: &mut ChaCha8Rng,
    stamp: f64,
) -> Result<LidarScan, SimError> {
    let angles = cfg.beam_angles();
    let noise = Normal::new(0.0, cfg.range_noise_sigma)
        .map_err(|e| SimError::InvalidArgument(e.to_string()))?;
    let mut ranges = Vec::with_capacity(angles.len());
    let mut hits = Vec::with_capacity(angles.len());
    for a in &angles {
        let (r, hit) = world.cast_ray(pose.x, pose.y, pose.theta + a, cfg.max_range)?;
        let r = if hit && cfg.range_noise_sigma > 0.0 {
            (r + noise.sample(rng)).clamp(MIN_RANGE, cfg.max_range)
        } else {
            r
        };
        ranges.push(r);
        hits.push(hit);
    }
    Ok(LidarScan {
        angles,
        ranges,
        hits,
        stamp,
    })
}

/// Magnitude-proportional odometry noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometryNoise {
    /// Translation σ per meter travelled.
    pub trans_sigma: f64,
    /// Rotation σ per radian turned.
    pub rot_sigma: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            trans_sigma: 0.05,
            rot_sigma: 0.05,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Perturbs a body-frame motion increment. Translation noise scales with the
/// distance travelled, rotation noise with `|Δθ|`.
pub fn apply_odometry_noise(
    delta: &Pose2D,
    params: &OdometryNoise,
    rng: &mut ChaCha8Rng,
) -> Pose2D {
    let dist = delta.x.hypot(delta.y);
    let st = params.trans_sigma.max(0.0) * dist;
    let sr = params.rot_sigma.max(0.0) * delta.theta.abs();
    Pose2D {
        x: delta.x + gaussian(rng, st),
        y: delta.y + gaussian(rng, st),
        theta: delta.theta + gaussian(rng, sr),
    }
}

/// Fixed-step simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub tick: u64,
    pub dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Result<Self, SimError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { tick: 0, dt })
    }

    pub fn elapsed(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}

/// Physical rover parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoverParams {
    pub radius: f64,
    pub tool_width: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            radius: 0.15,
            tool_width: 0.4,
            v_max: 0.5,
            omega_max: 1.5,
        }
    }
}

impl RoverParams {
    pub fn limits(&self) -> VelocityLimits {
        VelocityLimits {
            v_max: self.v_max,
            omega_max: self.omega_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverState {
    pub pose: Pose2D,
    pub odom_pose: Pose2D,
    pub params: RoverParams,
    pub cleaned_count: usize,
    /// Set when the last tick ended in contact.
    pub collided: bool,
    /// Cleaning tool engaged; debris is only removed while set.
    pub tool_active: bool,
}

impl RoverState {
    pub fn new(start: Pose2D, params: RoverParams) -> Self {
        Self {
            pose: start,
            odom_pose: start,
            params,
            cleaned_count: 0,
            collided: false,
            tool_active: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickReport {
    pub collided: bool,
    pub newly_cleaned: usize,
}

/// Contact search resolution.
const CONTACT_TOL: f64 = 1e-4;

/// Advances the world by one tick: ground-truth motion with clamp-at-contact,
/// noisy dead reckoning, cleaning and the clock.
pub fn tick(
    world: &mut TankWorld,
    state: &mut RoverState,
    cmd: &VelocityCmd,
    noise: &OdometryNoise,
    clock: &mut SimClock,
    rng: &mut ChaCha8Rng,
) -> TickReport {
    let cmd = if cmd.v.is_finite() && cmd.omega.is_finite() {
        cmd.clamped(&state.params.limits())
    } else {
        VelocityCmd::STOP
    };
    let start = state.pose;
    let radius = state.params.radius;
    let mut collided = false;
    let mut next = arc_step(&start, &cmd, clock.dt);
    if world.footprint_collides(next.x, next.y, radius) {
        collided = true;
        next = contact_pose(world, &start, &cmd, clock.dt, radius);
    }
    if next != start {
        let delta = start.between(&next);
        let noisy = apply_odometry_noise(&delta, noise, rng);
        state.odom_pose = state.odom_pose.compose(&noisy);
    }
    state.pose = next;
    state.collided = collided;
    let newly_cleaned = if state.tool_active {
        world.sweep_clean(&next, state.params.tool_width)
    } else {
        0
    };
    state.cleaned_count += newly_cleaned;
    clock.advance();
    TickReport {
        collided,
        newly_cleaned,
    }
}

/// Last collision-free pose along the commanded arc, found by bisection on
/// the elapsed fraction of the step.
fn contact_pose(world: &TankWorld, start: &Pose2D, cmd: &VelocityCmd, dt: f64, radius: f64) -> Pose2D {
    if world.footprint_collides(start.x, start.y, radius) {
        return *start;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut lo_pose = *start;
    let mut hi_pose = arc_step(start, cmd, dt);
    for _ in 0..64 {
        if lo_pose.distance_to(hi_pose.x, hi_pose.y) <= CONTACT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let p = arc_step(start, cmd, mid * dt);
        if world.footprint_collides(p.x, p.y, radius) {
            hi = mid;
            hi_pose = p;
        } else {
            lo = mid;
            lo_pose = p;
        }
    }
    lo_pose
}

/// Owns one simulation run: world, rover, clock, config and noise streams.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub world: TankWorld,
    pub state: RoverState,
    pub clock: SimClock,
    pub lidar: LidarConfig,
    pub odometry_noise: OdometryNoise,
    streams: SimStreams,
}

impl Simulator {
    pub fn new(
        world: TankWorld,
        state: RoverState,
        clock: SimClock,
        lidar: LidarConfig,
        odometry_noise: OdometryNoise,
        seed: u64,
    ) -> Self {
        Self {
            world,
            state,
            clock,
            lidar,
            odometry_noise,
            streams: SimStreams::new(seed),
        }
    }

    pub fn tick(&mut self, cmd: &VelocityCmd) -> TickReport {
        tick(
            &mut self.world,
            &mut self.state,
            cmd,
            &self.odometry_noise,
            &mut self.clock,
            &mut self.streams.odometry,
        )
    }

    pub fn scan(&mut self) -> Result<LidarScan, SimError> {
        simulate_scan(
            &self.world,
            &self.state.pose,
            &self.lidar,
            &mut self.streams.lidar,
            self.clock.elapsed(),
        )
    }
}
