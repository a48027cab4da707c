use crate::geometry::{GridIndex, GridMeta};
use crate::slam::{CellClass, TrinaryGrid};

/// Slack on distance comparisons so boundary cells are classified the same
/// way regardless of how the distance was computed.
pub const DIST_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cost {
    Free,
    Lethal,
}

/// Binary planning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    pub meta: GridMeta,
    pub cells: Vec<Cost>,
    pub inflation_radius: f64,
}

impl Costmap {
    pub fn all_free(meta: GridMeta) -> Self {
        Self {
            meta,
            cells: vec![Cost::Free; meta.len()],
            inflation_radius: 0.0,
        }
    }

    pub fn is_free(&self, idx: GridIndex) -> bool {
        self.meta.contains_index(idx) && self.cells[self.meta.offset(idx)] == Cost::Free
    }

    /// Signed-coordinate form of [`Costmap::is_free`]; off-grid is lethal.
    pub fn is_free_at(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.meta.height
            && (col as usize) < self.meta.width
            && self.cells[row as usize * self.meta.width + col as usize] == Cost::Free
    }

    pub fn set(&mut self, idx: GridIndex, cost: Cost) {
        let off = self.meta.offset(idx);
        self.cells[off] = cost;
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cost::Free).count()
    }

    /// Free cells reachable from `start` under the planner's motion rules
    /// (8-connected, no corner cutting).
    pub fn reachable_from(&self, start: GridIndex) -> Vec<bool> {
        let mut seen = vec![false; self.meta.len()];
        if !self.is_free(start) {
            return seen;
        }
        let mut stack = vec![start];
        seen[self.meta.offset(start)] = true;
        while let Some(cur) = stack.pop() {
            for next in super::astar::neighbors(self, cur).map(|(n, _)| n) {
                let off = self.meta.offset(next);
                if !seen[off] {
                    seen[off] = true;
                    stack.push(next);
                }
            }
        }
        seen
    }
}

/// Builds the planning costmap: OCCUPIED and UNKNOWN cells are lethal, and
/// every cell whose center lies within `robot_radius + safety_margin` of an
/// OCCUPIED cell center is lethal too. UNKNOWN cells do not inflate.
pub fn inflate_costmap(src: &TrinaryGrid, robot_radius: f64, safety_margin: f64) -> Costmap {
    let meta = src.meta;
    let radius = (robot_radius + safety_margin).max(0.0);
    let mut cells: Vec<Cost> = src
        .cells
        .iter()
        .map(|c| match c {
            CellClass::Free => Cost::Free,
            _ => Cost::Lethal,
        })
        .collect();
    let reach = (radius / meta.resolution + DIST_EPS).floor() as i64;
    let mut stamp = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d = (dr as f64 * meta.resolution).hypot(dc as f64 * meta.resolution);
            if (dr, dc) != (0, 0) && d <= radius + DIST_EPS {
                stamp.push((dr, dc));
            }
        }
    }
    let (h, w) = (meta.height as i64, meta.width as i64);
    for (off, class) in src.cells.iter().enumerate() {
        if *class != CellClass::Occupied {
            continue;
        }
        let idx = meta.index_at(off);
        let (r0, c0) = (idx.row as i64, idx.col as i64);
        for (dr, dc) in &stamp {
            let (r, c) = (r0 + dr, c0 + dc);
            if r >= 0 && c >= 0 && r < h && c < w {
                cells[(r * w + c) as usize] = Cost::Lethal;
            }
        }
    }
    Costmap {
        meta,
        cells,
        inflation_radius: radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> TrinaryGrid {
        let meta = GridMeta::new(0.05, w, h, 0.0, 0.0).unwrap();
        TrinaryGrid {
            meta,
            cells: vec![CellClass::Free; meta.len()],
        }
    }

    #[test]
    fn zero_radius_is_occupied_or_unknown() {
        let mut g = grid(5, 5);
        g.set(GridIndex::new(1, 1), CellClass::Occupied);
        g.set(GridIndex::new(3, 4), CellClass::Unknown);
        let c = inflate_costmap(&g, 0.0, 0.0);
        for off in 0..g.meta.len() {
            let lethal = g.cells[off] != CellClass::Free;
            assert_eq!(c.cells[off] == Cost::Lethal, lethal);
        }
    }

    #[test]
    fn one_cell_radius_marks_four_neighbors() {
        let mut g = grid(5, 5);
        g.set(GridIndex::new(2, 2), CellClass::Occupied);
        let c = inflate_costmap(&g, 0.05, 0.0);
        let lethal: Vec<_> = (0..25)
            .filter(|o| c.cells[*o] == Cost::Lethal)
            .map(|o| g.meta.index_at(o))
            .collect();
        assert_eq!(
            lethal,
            vec![
                GridIndex::new(1, 2),
                GridIndex::new(2, 1),
                GridIndex::new(2, 2),
                GridIndex::new(2, 3),
                GridIndex::new(3, 2)
            ]
        );
    }

    #[test]
    fn unknown_does_not_inflate() {
        let mut g = grid(5, 5);
        g.set(GridIndex::new(2, 2), CellClass::Unknown);
        let c = inflate_costmap(&g, 0.1, 0.05);
        assert_eq!(c.cells.iter().filter(|c| **c == Cost::Lethal).count(), 1);
    }
}
