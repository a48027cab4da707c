//! Planar geometry shared by the simulator, mapper and planner: poses,
//! angle wrapping, grid anchoring and cell traversal.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point ({x}, {y}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("cell (row {row}, col {col}) lies outside the grid")]
    IndexOutOfBounds { row: i64, col: i64 },
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> Result<f64, GeometryError> {
    if !theta.is_finite() {
        return Err(GeometryError::InvalidArgument(format!(
            "angle must be finite, got {theta}"
        )));
    }
    Ok(wrap_finite(theta))
}

pub(crate) fn wrap_finite(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can land on exactly -π after the shift for inputs just
    // below an odd multiple of π.
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Planar pose in the world/map frame. `theta` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    /// Builds a pose, wrapping the heading. Non-finite components are rejected.
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "pose position must be finite, got ({x}, {y})"
            )));
        }
        Ok(Self {
            x,
            y,
            theta: wrap_angle(theta)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ⊕ delta`, with `delta` expressed in this pose's body frame.
    pub fn compose(&self, delta: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: self.x + c * delta.x - s * delta.y,
            y: self.y + s * delta.x + c * delta.y,
            theta: wrap_finite(self.theta + delta.theta),
        }
    }

    /// Relative motion `delta` such that `self.compose(delta) == other`.
    pub fn between(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2D {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            theta: wrap_finite(other.theta - self.theta),
        }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Cell address in a grid; row counts along +y, col along +x.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn chebyshev(&self, other: &GridIndex) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

/// Georeferencing of a uniform grid. `origin` is the lower-left corner of
/// cell (0, 0); its heading is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridMeta {
    pub fn new(
        resolution: f64,
        width: usize,
        height: usize,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self, GeometryError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidArgument(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(GeometryError::InvalidArgument("origin must be finite".into()));
        }
        Ok(Self {
            resolution,
            width,
            height,
            origin_x,
            origin_y,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_max(&self) -> f64 {
        self.origin_x + self.width as f64 * self.resolution
    }

    pub fn y_max(&self) -> f64 {
        self.origin_y + self.height as f64 * self.resolution
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    pub fn contains_index(&self, idx: GridIndex) -> bool {
        idx.row < self.height && idx.col < self.width
    }

    /// Row-major offset of a cell.
    pub fn offset(&self, idx: GridIndex) -> usize {
        idx.row * self.width + idx.col
    }

    pub fn index_at(&self, offset: usize) -> GridIndex {
        GridIndex::new(offset / self.width, offset % self.width)
    }

    /// Signed cell coordinates of a point (may be off-grid).
    pub fn cell_coords(&self, x: f64, y: f64) -> (i64, i64) {
        let col = ((x - self.origin_x) / self.resolution).floor();
        let row = ((y - self.origin_y) / self.resolution).floor();
        (row as i64, col as i64)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<GridIndex> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let (row, col) = self.cell_coords(x, y);
        if row < 0 || col < 0 || row >= self.height as i64 || col >= self.width as i64 {
            return None;
        }
        Some(GridIndex::new(row as usize, col as usize))
    }

    pub fn world_to_grid(&self, x: f64, y: f64) -> Result<GridIndex, GeometryError> {
        self.cell_of(x, y).ok_or(GeometryError::OutOfBounds { x, y })
    }

    /// Center of a cell in world coordinates.
    pub fn grid_to_world(&self, idx: GridIndex) -> Result<(f64, f64), GeometryError> {
        if !self.contains_index(idx) {
            return Err(GeometryError::IndexOutOfBounds {
                row: idx.row as i64,
                col: idx.col as i64,
            });
        }
        Ok(self.cell_center(idx))
    }

    pub(crate) fn cell_center(&self, idx: GridIndex) -> (f64, f64) {
        (
            self.origin_x + (idx.col as f64 + 0.5) * self.resolution,
            self.origin_y + (idx.row as f64 + 0.5) * self.resolution,
        )
    }
}

/// Free-function form of [`GridMeta::world_to_grid`].
pub fn world_to_grid(meta: &GridMeta, x: f64, y: f64) -> Result<GridIndex, GeometryError> {
    meta.world_to_grid(x, y)
}

/// Free-function form of [`GridMeta::grid_to_world`].
pub fn grid_to_world(meta: &GridMeta, idx: GridIndex) -> Result<(f64, f64), GeometryError> {
    meta.grid_to_world(idx)
}

/// Bresenham line between two cells, inclusive of both ends.
///
/// The line is always rasterized from the lexicographically lower endpoint,
/// so `traverse_cells(a, b)` and `traverse_cells(b, a)` cover the same cells
/// in opposite order.
pub fn traverse_cells(a: GridIndex, b: GridIndex) -> Vec<GridIndex> {
    let forward = a <= b;
    let (lo, hi) = if forward { (a, b) } else { (b, a) };
    let mut cells = Vec::with_capacity(lo.chebyshev(&hi) + 1);
    bresenham(
        (lo.row as i64, lo.col as i64),
        (hi.row as i64, hi.col as i64),
        |r, c| cells.push(GridIndex::new(r as usize, c as usize)),
    );
    if !forward {
        cells.reverse();
    }
    cells
}

/// Signed-coordinate Bresenham walk from `a` to `b`, inclusive.
pub(crate) fn bresenham(a: (i64, i64), b: (i64, i64), mut visit: impl FnMut(i64, i64)) {
    let (mut r, mut c) = a;
    let dr = (b.0 - a.0).abs();
    let dc = (b.1 - a.1).abs();
    let sr = if b.0 >= a.0 { 1 } else { -1 };
    let sc = if b.1 >= a.1 { 1 } else { -1 };
    if dc >= dr {
        let mut err = 2 * dr - dc;
        for _ in 0..=dc {
            visit(r, c);
            if err > 0 {
                r += sr;
                err -= 2 * dc;
            }
            err += 2 * dr;
            c += sc;
        }
    } else {
        let mut err = 2 * dc - dr;
        for _ in 0..=dr {
            visit(r, c);
            if err > 0 {
                c += sc;
                err -= 2 * dr;
            }
            err += 2 * dc;
            r += sr;
        }
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn is_valid(&self) -> bool {
        [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite())
            && self.xmax > self.xmin
            && self.ymax > self.ymin
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.xmin.max(other.xmin),
            self.ymin.max(other.ymin),
            self.xmax.min(other.xmax),
            self.ymax.min(other.ymax),
        );
        (r.xmax > r.xmin && r.ymax > r.ymin).then_some(r)
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let dx = (self.xmin - x).max(0.0).max(x - self.xmax);
        let dy = (self.ymin - y).max(0.0).max(y - self.ymax);
        dx.hypot(dy)
    }
}
