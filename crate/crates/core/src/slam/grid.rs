use serde::{Deserialize, Serialize};

use crate::geometry::{GridIndex, GridMeta};

pub const L_MIN: f64 = -6.0;
pub const L_MAX: f64 = 6.0;
pub const L_OCC: f64 = 0.85;
pub const L_FREE: f64 = -0.4;

pub const OCCUPIED_THRESH: f64 = 0.65;
pub const FREE_THRESH: f64 = 0.196;

/// `p = 1 − 1/(1 + e^l)`.
pub fn occupancy_prob(l: f64) -> f64 {
    1.0 - 1.0 / (1.0 + l.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Free,
    Occupied,
    Unknown,
}

pub fn classify_cell(p: f64) -> CellClass {
    if p >= OCCUPIED_THRESH {
        CellClass::Occupied
    } else if p <= FREE_THRESH {
        CellClass::Free
    } else {
        CellClass::Unknown
    }
}

/// Dense log-odds occupancy grid, every cell clamped to `[L_MIN, L_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub meta: GridMeta,
    logodds: Vec<f64>,
    /// `occupancy_prob` of every cell, kept in step with `logodds`.
    probs: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(meta: GridMeta) -> Self {
        Self {
            meta,
            logodds: vec![0.0; meta.len()],
            probs: vec![0.5; meta.len()],
        }
    }

    pub fn logodds(&self) -> &[f64] {
        &self.logodds
    }

    pub fn get(&self, idx: GridIndex) -> f64 {
        self.logodds[self.meta.offset(idx)]
    }

    /// Adds evidence to one cell and clamps.
    pub fn add(&mut self, offset: usize, delta: f64) {
        let l = &mut self.logodds[offset];
        *l = (*l + delta).clamp(L_MIN, L_MAX);
        self.probs[offset] = occupancy_prob(*l);
    }

    pub fn has_information(&self) -> bool {
        self.logodds.iter().any(|l| *l != 0.0)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Multiplies every cell by `k` (re-clamped). Used to probe matcher
    /// invariance.
    pub fn scaled(&self, k: f64) -> Self {
        let logodds: Vec<f64> = self.logodds.iter().map(|l| (l * k).clamp(L_MIN, L_MAX)).collect();
        Self {
            meta: self.meta,
            probs: logodds.iter().map(|l| occupancy_prob(*l)).collect(),
            logodds,
        }
    }
}

/// FREE / OCCUPIED / UNKNOWN map derived from an [`OccupancyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrinaryGrid {
    pub meta: GridMeta,
    pub cells: Vec<CellClass>,
}

impl TrinaryGrid {
    pub fn unknown(meta: GridMeta) -> Self {
        Self {
            meta,
            cells: vec![CellClass::Unknown; meta.len()],
        }
    }

    pub fn from_occupancy(grid: &OccupancyGrid) -> Self {
        Self {
            meta: grid.meta,
            cells: grid
                .logodds
                .iter()
                .map(|l| classify_cell(occupancy_prob(*l)))
                .collect(),
        }
    }

    pub fn get(&self, idx: GridIndex) -> CellClass {
        self.cells[self.meta.offset(idx)]
    }

    pub fn set(&mut self, idx: GridIndex, class: CellClass) {
        let off = self.meta.offset(idx);
        self.cells[off] = class;
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().filter(|c| **c == class).count()
    }
}
