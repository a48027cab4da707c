use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_finite, Pose2D};
use crate::nav::{PlanError, PlannedPath};
use crate::sim::VelocityCmd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PursuitParams {
    pub lookahead: f64,
    pub v_nom: f64,
    pub omega_max: f64,
    pub goal_tol: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        Self {
            lookahead: 0.3,
            v_nom: 0.3,
            omega_max: 1.5,
            goal_tol: 0.1,
        }
    }
}

/// Pure-pursuit command toward the lookahead point beyond the path point
/// nearest to `pose`.
pub fn pure_pursuit_cmd(
    path: &PlannedPath,
    pose: &Pose2D,
    params: &PursuitParams,
) -> Result<VelocityCmd, PlanError> {
    if path.points.is_empty() {
        return Err(PlanError::InvalidArgument("path is empty".into()));
    }
    let arc = path.arc_lengths();
    let nearest = nearest_in(&path.points, pose, 0, path.points.len());
    Ok(command_from(path, &arc, nearest, pose, params))
}

fn nearest_in(points: &[(f64, f64)], pose: &Pose2D, from: usize, to: usize) -> usize {
    let mut best = from;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate().take(to).skip(from) {
        let d = pose.distance_to(p.0, p.1);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn command_from(
    path: &PlannedPath,
    arc: &[f64],
    nearest: usize,
    pose: &Pose2D,
    params: &PursuitParams,
) -> VelocityCmd {
    let last = *path.points.last().unwrap();
    if pose.distance_to(last.0, last.1) <= params.goal_tol {
        return VelocityCmd::STOP;
    }
    let target_idx = (nearest..path.points.len())
        .find(|&j| arc[j] - arc[nearest] >= params.lookahead)
        .unwrap_or(path.points.len() - 1);
    let (tx, ty) = path.points[target_idx];
    steer_toward(pose, tx, ty, params)
}

/// Curvature `2·sin α / L` at nominal speed, clamped to `omega_max`; speed
/// falls off linearly once the target is more than 45° off the nose and is
/// zero beyond 90°, where the rover turns in place toward the target.
fn steer_toward(pose: &Pose2D, tx: f64, ty: f64, params: &PursuitParams) -> VelocityCmd {
    let (dx, dy) = (tx - pose.x, ty - pose.y);
    let alpha = if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        wrap_finite(dy.atan2(dx) - pose.theta)
    };
    let omega = if alpha.abs() > FRAC_PI_2 {
        params.omega_max.copysign(alpha)
    } else {
        (2.0 * params.v_nom * alpha.sin() / params.lookahead)
            .clamp(-params.omega_max, params.omega_max)
    };
    let scale = if alpha.abs() <= FRAC_PI_4 {
        1.0
    } else {
        ((FRAC_PI_2 - alpha.abs()) / FRAC_PI_4).max(0.0)
    };
    VelocityCmd {
        v: params.v_nom * scale,
        omega,
    }
}

/// Path follower with monotone progress. Nearest-point search only looks a
/// bounded arc length ahead of the previous match, so serpentine paths do
/// not jump between neighbouring lanes.
#[derive(Debug, Clone)]
pub struct Follower {
    path: PlannedPath,
    arc: Vec<f64>,
    params: PursuitParams,
    progress_idx: usize,
    search_arc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowStep {
    pub cmd: VelocityCmd,
    pub done: bool,
    /// Completed fraction of the path's arc length.
    pub progress: f64,
}

impl Follower {
    pub fn new(path: PlannedPath, params: PursuitParams) -> Result<Self, PlanError> {
        if path.points.is_empty() {
            return Err(PlanError::InvalidArgument("path is empty".into()));
        }
        let arc = path.arc_lengths();
        Ok(Self {
            search_arc: (4.0 * params.lookahead).max(1.0),
            path,
            arc,
            params,
            progress_idx: 0,
        })
    }

    pub fn path(&self) -> &PlannedPath {
        &self.path
    }

    pub fn progress(&self) -> f64 {
        let total = *self.arc.last().unwrap();
        if total > 0.0 {
            self.arc[self.progress_idx] / total
        } else {
            1.0
        }
    }

    pub fn step(&mut self, pose: &Pose2D) -> FollowStep {
        let n = self.path.points.len();
        let limit = self.arc[self.progress_idx] + self.search_arc;
        let end = (self.progress_idx..n)
            .find(|&j| self.arc[j] > limit)
            .unwrap_or(n);
        self.progress_idx = nearest_in(&self.path.points, pose, self.progress_idx, end);
        let total = *self.arc.last().unwrap();
        let remaining = total - self.arc[self.progress_idx];
        let last = self.path.points[n - 1];
        let at_goal = pose.distance_to(last.0, last.1) <= self.params.goal_tol
            && remaining <= self.params.lookahead + self.params.goal_tol;
        if at_goal {
            self.progress_idx = n - 1;
            return FollowStep {
                cmd: VelocityCmd::STOP,
                done: true,
                progress: 1.0,
            };
        }
        let cmd = if pose.distance_to(last.0, last.1) <= self.params.goal_tol {
            // Passing near the end point early in the path: keep following.
            let target_idx = (self.progress_idx..n)
                .find(|&j| self.arc[j] - self.arc[self.progress_idx] >= self.params.lookahead)
                .unwrap_or(n - 1);
            let (tx, ty) = self.path.points[target_idx];
            steer_toward(pose, tx, ty, &self.params)
        } else {
            command_from(&self.path, &self.arc, self.progress_idx, pose, &self.params)
        };
        FollowStep {
            cmd,
            done: false,
            progress: self.progress(),
        }
    }
}
