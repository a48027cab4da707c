use serde::{Deserialize, Serialize};

use crate::geometry::{GridIndex, GridMeta, Pose2D};

/// Headline numbers for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Summed length of every planned mission path, meters.
    pub path_length: f64,
    /// Simulated seconds.
    pub duration: f64,
    pub coverage_fraction: f64,
    pub cleaned_count: usize,
    pub collision_count: usize,
    pub seed: u64,
}

/// Tracks which reference cells the tool has passed over.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    meta: GridMeta,
    reference: Vec<bool>,
    swept: Vec<bool>,
    reference_count: usize,
    swept_count: usize,
}

impl CoverageTracker {
    pub fn new(meta: GridMeta) -> Self {
        Self {
            meta,
            reference: vec![false; meta.len()],
            swept: vec![false; meta.len()],
            reference_count: 0,
            swept_count: 0,
        }
    }

    /// Adds cells to the reference set.
    pub fn add_reference(&mut self, cells: impl IntoIterator<Item = usize>) {
        for off in cells {
            if !self.reference[off] {
                self.reference[off] = true;
                self.reference_count += 1;
                if self.swept[off] {
                    self.swept_count += 1;
                }
            }
        }
    }

    /// Marks every cell whose center lies within `reach` of the pose.
    pub fn sweep(&mut self, pose: &Pose2D, reach: f64) {
        let m = &self.meta;
        let (r0, c0) = m.cell_coords(pose.x - reach, pose.y - reach);
        let (r1, c1) = m.cell_coords(pose.x + reach, pose.y + reach);
        let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
        if r1 < 0 || c1 < 0 || r0 >= m.height as i64 || c0 >= m.width as i64 {
            return;
        }
        for r in clamp(r0, m.height)..=clamp(r1, m.height) {
            for c in clamp(c0, m.width)..=clamp(c1, m.width) {
                let idx = GridIndex::new(r, c);
                let off = m.offset(idx);
                if self.swept[off] {
                    continue;
                }
                let (x, y) = m.cell_center(idx);
                if (x - pose.x).hypot(y - pose.y) <= reach {
                    self.swept[off] = true;
                    if self.reference[off] {
                        self.swept_count += 1;
                    }
                }
            }
        }
    }

    pub fn reference_count(&self) -> usize {
        self.reference_count
    }

    pub fn swept_reference_count(&self) -> usize {
        self.swept_count
    }

    pub fn fraction(&self) -> f64 {
        if self.reference_count == 0 {
            0.0
        } else {
            self.swept_count as f64 / self.reference_count as f64
        }
    }

    /// Reference cells never swept.
    pub fn missed(&self) -> Vec<GridIndex> {
        (0..self.meta.len())
            .filter(|&o| self.reference[o] && !self.swept[o])
            .map(|o| self.meta.index_at(o))
            .collect()
    }
}
