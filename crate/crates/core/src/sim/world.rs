use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{GridIndex, GridMeta, Pose2D, Rect};
use crate::sim::SimError;

/// Static obstacle inside the tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Rect {
        xmin: f64,
        ymin: f64,
        xmax: f64,
        ymax: f64,
    },
    Circle {
        x: f64,
        y: f64,
        radius: f64,
    },
}

impl Obstacle {
    pub fn rect(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Obstacle::Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn circle(x: f64, y: f64, radius: f64) -> Self {
        Obstacle::Circle { x, y, radius }
    }

    pub fn bounding_box(&self) -> Rect {
        match *self {
            Obstacle::Rect {
                xmin,
                ymin,
                xmax,
                ymax,
            } => Rect::new(xmin, ymin, xmax, ymax),
            Obstacle::Circle { x, y, radius } => {
                Rect::new(x - radius, y - radius, x + radius, y + radius)
            }
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match *self {
            Obstacle::Rect { .. } => self.bounding_box().is_valid(),
            Obstacle::Circle { x, y, radius } => {
                x.is_finite() && y.is_finite() && radius.is_finite() && radius > 0.0
            }
        }
    }

    /// Strict interior test.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Obstacle::Rect {
                xmin,
                ymin,
                xmax,
                ymax,
            } => px > xmin && px < xmax && py > ymin && py < ymax,
            Obstacle::Circle { x, y, radius } => (px - x).hypot(py - y) < radius,
        }
    }

    /// Distance from a point to the obstacle (0 inside).
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        match *self {
            Obstacle::Rect { .. } => self.bounding_box().distance_to(px, py),
            Obstacle::Circle { x, y, radius } => ((px - x).hypot(py - y) - radius).max(0.0),
        }
    }

    /// True when the square cell overlaps the obstacle with positive area.
    pub fn overlaps_square(&self, cx: f64, cy: f64, half: f64) -> bool {
        match *self {
            Obstacle::Rect {
                xmin,
                ymin,
                xmax,
                ymax,
            } => cx + half > xmin && cx - half < xmax && cy + half > ymin && cy - half < ymax,
            Obstacle::Circle { x, y, radius } => {
                Rect::new(cx - half, cy - half, cx + half, cy + half).distance_to(x, y) < radius
            }
        }
    }

    /// Smallest `t ≥ 0` at which the ray `origin + t·(dx, dy)` meets the
    /// boundary, if any. `(dx, dy)` must be a unit vector.
    pub fn ray_hit(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        match *self {
            Obstacle::Rect {
                xmin,
                ymin,
                xmax,
                ymax,
            } => {
                let (mut t0, mut t1) = (0.0_f64, f64::INFINITY);
                for (o, d, lo, hi) in [(ox, dx, xmin, xmax), (oy, dy, ymin, ymax)] {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                    } else {
                        let a = (lo - o) / d;
                        let b = (hi - o) / d;
                        let (near, far) = if a < b { (a, b) } else { (b, a) };
                        t0 = t0.max(near);
                        t1 = t1.min(far);
                    }
                }
                (t0 <= t1).then_some(t0)
            }
            Obstacle::Circle { x, y, radius } => {
                let fx = ox - x;
                let fy = oy - y;
                let b = fx * dx + fy * dy;
                let c = fx * fx + fy * fy - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t_near = -b - sq;
                let t_far = -b + sq;
                if t_near >= 0.0 {
                    Some(t_near)
                } else if t_far >= 0.0 && c <= 0.0 {
                    // Origin on the boundary.
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }
}

/// Ground-truth tank: walls, obstacles and the remaining debris cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TankWorld {
    pub bounds: Rect,
    pub obstacles: Vec<Obstacle>,
    pub debris: BTreeSet<GridIndex>,
    pub debris_meta: GridMeta,
}

impl TankWorld {
    /// World with no debris; the debris grid covers the tank at `resolution`.
    pub fn new(bounds: Rect, obstacles: Vec<Obstacle>, resolution: f64) -> Result<Self, SimError> {
        if !bounds.is_valid() {
            return Err(SimError::InvalidArgument(format!("invalid tank bounds {bounds:?}")));
        }
        let debris_meta = debris_grid(&bounds, resolution)?;
        Ok(Self {
            bounds,
            obstacles,
            debris: BTreeSet::new(),
            debris_meta,
        })
    }

    pub fn in_obstacle(&self, x: f64, y: f64) -> bool {
        self.obstacles.iter().any(|o| o.contains(x, y))
    }

    /// True when a point is inside the tank and outside every obstacle.
    pub fn is_free_point(&self, x: f64, y: f64) -> bool {
        self.bounds.contains(x, y) && !self.in_obstacle(x, y)
    }

    /// Whether a circular footprint penetrates a wall or an obstacle.
    /// Touching contact is not a collision.
    pub fn footprint_collides(&self, x: f64, y: f64, radius: f64) -> bool {
        let b = &self.bounds;
        if x - radius < b.xmin || x + radius > b.xmax || y - radius < b.ymin || y + radius > b.ymax
        {
            return true;
        }
        self.obstacles.iter().any(|o| o.distance_to(x, y) < radius)
    }

    /// Exact range to the nearest wall or obstacle along `angle`.
    pub fn cast_ray(
        &self,
        ox: f64,
        oy: f64,
        angle: f64,
        max_range: f64,
    ) -> Result<(f64, bool), SimError> {
        if !(ox.is_finite() && oy.is_finite() && angle.is_finite()) {
            return Err(SimError::InvalidArgument("ray origin/angle must be finite".into()));
        }
        if !self.bounds.contains(ox, oy) || self.in_obstacle(ox, oy) {
            return Err(SimError::InvalidState { x: ox, y: oy });
        }
        let (dy, dx) = angle.sin_cos();
        let b = &self.bounds;
        let tx = if dx > 0.0 {
            (b.xmax - ox) / dx
        } else if dx < 0.0 {
            (b.xmin - ox) / dx
        } else {
            f64::INFINITY
        };
        let ty = if dy > 0.0 {
            (b.ymax - oy) / dy
        } else if dy < 0.0 {
            (b.ymin - oy) / dy
        } else {
            f64::INFINITY
        };
        let mut best = tx.min(ty);
        for o in &self.obstacles {
            if let Some(t) = o.ray_hit(ox, oy, dx, dy) {
                best = best.min(t);
            }
        }
        if best > max_range {
            Ok((max_range, false))
        } else {
            Ok((best, true))
        }
    }

    /// Removes debris whose cell centers lie within `tool_width / 2` of
    /// `(pose.x, pose.y)`; returns how many were removed.
    pub fn sweep_clean(&mut self, pose: &Pose2D, tool_width: f64) -> usize {
        let reach = tool_width / 2.0;
        let meta = self.debris_meta;
        let before = self.debris.len();
        self.debris.retain(|idx| {
            let (cx, cy) = meta.cell_center(*idx);
            (cx - pose.x).hypot(cy - pose.y) > reach
        });
        before - self.debris.len()
    }

    /// Cell-level ground truth: a cell is occupied when it overlaps the tank
    /// exterior or any obstacle with positive area.
    pub fn rasterize_occupied(&self, meta: &GridMeta) -> Vec<bool> {
        let half = meta.resolution / 2.0;
        let b = &self.bounds;
        (0..meta.len())
            .map(|off| {
                let (cx, cy) = meta.cell_center(meta.index_at(off));
                let outside = cx - half < b.xmin
                    || cx + half > b.xmax
                    || cy - half < b.ymin
                    || cy + half > b.ymax;
                outside || self.obstacles.iter().any(|o| o.overlaps_square(cx, cy, half))
            })
            .collect()
    }
}

/// Debris grid anchored at the tank's lower-left corner.
pub fn debris_grid(bounds: &Rect, resolution: f64) -> Result<GridMeta, SimError> {
    let w = (bounds.width() / resolution - 1e-9).ceil().max(1.0) as usize;
    let h = (bounds.height() / resolution - 1e-9).ceil().max(1.0) as usize;
    GridMeta::new(resolution, w, h, bounds.xmin, bounds.ymin)
        .map_err(|e| SimError::InvalidArgument(e.to_string()))
}

/// Free-function form of [`TankWorld::cast_ray`].
pub fn cast_ray(
    world: &TankWorld,
    origin: (f64, f64),
    angle: f64,
    max_range: f64,
) -> Result<(f64, bool), SimError> {
    world.cast_ray(origin.0, origin.1, angle, max_range)
}

/// Free-function form of [`TankWorld::sweep_clean`].
pub fn sweep_clean(world: &mut TankWorld, pose: &Pose2D, tool_width: f64) -> usize {
    world.sweep_clean(pose, tool_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn empty() -> TankWorld {
        TankWorld::new(Rect::new(0.0, 0.0, 10.0, 5.0), vec![], 0.05).unwrap()
    }

    #[test]
    fn ray_hits_east_wall() {
        let w = empty();
        assert_eq!(w.cast_ray(5.0, 2.5, 0.0, 20.0).unwrap(), (5.0, true));
        assert_eq!(w.cast_ray(5.0, 2.5, 0.0, 3.0).unwrap(), (3.0, false));
        let (r, hit) = w.cast_ray(5.0, 2.5, PI / 2.0, 20.0).unwrap();
        assert!(hit && (r - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_near_face_of_rect() {
        let mut w = empty();
        w.obstacles.push(Obstacle::rect(7.0, 2.0, 8.0, 3.0));
        assert_eq!(w.cast_ray(5.0, 2.5, 0.0, 20.0).unwrap(), (2.0, true));
    }

    #[test]
    fn ray_hits_circle() {
        let mut w = empty();
        w.obstacles.push(Obstacle::circle(8.0, 2.5, 0.5));
        let (r, hit) = w.cast_ray(5.0, 2.5, 0.0, 20.0).unwrap();
        assert!(hit && (r - 2.5).abs() < 1e-12);
        // Pointing away from the circle hits the west wall instead.
        let (r, _) = w.cast_ray(5.0, 2.5, PI, 20.0).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ray_from_inside_obstacle_is_rejected() {
        let mut w = empty();
        w.obstacles.push(Obstacle::rect(4.0, 2.0, 6.0, 3.0));
        assert!(matches!(
            w.cast_ray(5.0, 2.5, 0.0, 20.0),
            Err(SimError::InvalidState { .. })
        ));
    }

    #[test]
    fn sweep_examples() {
        let mut w = empty();
        let pose = Pose2D::new(2.025, 1.025, 0.0).unwrap();
        assert_eq!(w.sweep_clean(&pose, 0.5), 0);
        // Cell (20, 40) has its center exactly at the rover.
        w.debris.insert(GridIndex::new(20, 40));
        assert_eq!(w.sweep_clean(&pose, 0.5), 1);
        assert!(w.debris.is_empty());
    }

    #[test]
    fn sweep_removes_within_half_width_only() {
        let mut w = empty();
        let pose = Pose2D::new(2.025, 1.025, 0.0).unwrap();
        // Centers at 0.1, 0.2 and 0.4 m east of the rover.
        for dc in [2, 4, 8] {
            w.debris.insert(GridIndex::new(20, 40 + dc));
        }
        assert_eq!(w.sweep_clean(&pose, 0.5), 2);
        assert_eq!(w.debris.len(), 1);
    }

    #[test]
    fn footprint_collision_walls_and_shapes() {
        let mut w = empty();
        assert!(!w.footprint_collides(1.0, 1.0, 0.15));
        assert!(w.footprint_collides(0.1, 1.0, 0.15));
        assert!(!w.footprint_collides(0.15, 1.0, 0.15));
        w.obstacles.push(Obstacle::circle(3.0, 3.0, 0.5));
        assert!(w.footprint_collides(3.6, 3.0, 0.15));
        assert!(!w.footprint_collides(3.7, 3.0, 0.15));
    }
}
