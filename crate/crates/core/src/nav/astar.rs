use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::geometry::GridIndex;
use crate::nav::costmap::Costmap;
use crate::nav::{Endpoint, PlanError, PlannedPath};

const MOVES: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Legal moves out of `idx`: 8-connected, onto FREE cells, and diagonals
/// only when both orthogonal cells beside the move are FREE. The flag marks
/// diagonal moves.
pub(crate) fn neighbors(cmap: &Costmap, idx: GridIndex) -> impl Iterator<Item = (GridIndex, bool)> + '_ {
    let (r, c) = (idx.row as i64, idx.col as i64);
    MOVES.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r + dr, c + dc);
        if !cmap.is_free_at(nr, nc) {
            return None;
        }
        let diagonal = dr != 0 && dc != 0;
        if diagonal && !(cmap.is_free_at(r + dr, c) && cmap.is_free_at(r, c + dc)) {
            return None;
        }
        Some((GridIndex::new(nr as usize, nc as usize), diagonal))
    })
}

/// Octile distance in meters.
pub fn octile(a: GridIndex, b: GridIndex, resolution: f64) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    resolution * ((hi - lo) + SQRT_2 * lo)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    idx: GridIndex,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // Reversed: BinaryHeap is a max-heap, we pop lowest (f, h, row, col).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// 8-connected A* with the octile heuristic. Returns cell centers from
/// `start` to `goal` inclusive.
pub fn plan_astar(cmap: &Costmap, start: GridIndex, goal: GridIndex) -> Result<PlannedPath, PlanError> {
    if !cmap.is_free(start) {
        return Err(PlanError::InvalidEndpoint(Endpoint::Start));
    }
    if !cmap.is_free(goal) {
        return Err(PlanError::InvalidEndpoint(Endpoint::Goal));
    }
    let cells = astar_cells(cmap, start, goal).ok_or(PlanError::Unreachable { segment: None })?;
    Ok(PlannedPath::from_cells(&cmap.meta, &cells))
}

pub(crate) fn astar_cells(cmap: &Costmap, start: GridIndex, goal: GridIndex) -> Option<Vec<GridIndex>> {
    let meta = &cmap.meta;
    let res = meta.resolution;
    let n = meta.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[meta.offset(start)] = 0.0;
    let h0 = octile(start, goal, res);
    open.push(Open {
        f: h0,
        h: h0,
        idx: start,
    });
    while let Some(Open { idx, .. }) = open.pop() {
        let off = meta.offset(idx);
        if closed[off] {
            continue;
        }
        closed[off] = true;
        if idx == goal {
            let mut cells = vec![goal];
            let mut cur = off;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push(meta.index_at(cur));
            }
            cells.reverse();
            return Some(cells);
        }
        for (next, diagonal) in neighbors(cmap, idx) {
            let noff = meta.offset(next);
            if closed[noff] {
                continue;
            }
            let step = if diagonal { res * SQRT_2 } else { res };
            let tentative = g[off] + step;
            if tentative < g[noff] {
                g[noff] = tentative;
                parent[noff] = off;
                let h = octile(next, goal, res);
                open.push(Open {
                    f: tentative + h,
                    h,
                    idx: next,
                });
            }
        }
    }
    None
}
