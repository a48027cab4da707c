use crate::geometry::{bresenham, Pose2D};
use crate::sim::LidarScan;
use crate::slam::grid::{OccupancyGrid, L_FREE, L_OCC};
use crate::slam::SlamError;

/// Integrates one scan taken at `pose` into the grid.
pub fn integrate_scan(
    grid: &mut OccupancyGrid,
    pose: &Pose2D,
    scan: &LidarScan,
) -> Result<(), SlamError> {
    integrate_scan_observed(grid, pose, scan, |_| {})
}

/// As [`integrate_scan`], calling `observed` with the offset of every cell
/// the scan updates (once per beam per cell).
pub fn integrate_scan_observed(
    grid: &mut OccupancyGrid,
    pose: &Pose2D,
    scan: &LidarScan,
    mut observed: impl FnMut(usize),
) -> Result<(), SlamError> {
    let meta = grid.meta;
    let origin = meta
        .cell_of(pose.x, pose.y)
        .ok_or(SlamError::PoseOutsideGrid { x: pose.x, y: pose.y })?;
    let start = (origin.row as i64, origin.col as i64);
    let in_grid =
        |(r, c): (i64, i64)| r >= 0 && c >= 0 && r < meta.height as i64 && c < meta.width as i64;
    let offset_of = |(r, c): (i64, i64)| r as usize * meta.width + c as usize;
    let mut line = Vec::new();
    for ((angle, range), hit) in scan.angles.iter().zip(&scan.ranges).zip(&scan.hits) {
        let a = pose.theta + angle;
        let ex = pose.x + range * a.cos();
        let ey = pose.y + range * a.sin();
        let end = meta.cell_coords(ex, ey);
        line.clear();
        symmetric_line(start, end, &mut line);
        if in_grid(end) {
            let last = line.len() - 1;
            if last >= 2 {
                for &cell in &line[1..last] {
                    let off = offset_of(cell);
                    grid.add(off, L_FREE);
                    observed(off);
                }
            }
            if *hit {
                let off = offset_of(end);
                grid.add(off, L_OCC);
                observed(off);
            }
        } else {
            // Truncated at the border: every in-grid cell past the rover's
            // own is free space, including the border cell.
            for &cell in line.iter().skip(1).take_while(|c| in_grid(**c)) {
                let off = offset_of(cell);
                grid.add(off, L_FREE);
                observed(off);
            }
        }
    }
    Ok(())
}

/// Signed Bresenham from `a` to `b`, rasterized from the lower endpoint.
fn symmetric_line(a: (i64, i64), b: (i64, i64), out: &mut Vec<(i64, i64)>) {
    if a <= b {
        bresenham(a, b, |r, c| out.push((r, c)));
    } else {
        bresenham(b, a, |r, c| out.push((r, c)));
        out.reverse();
    }
}
