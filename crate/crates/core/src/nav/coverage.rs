use crate::geometry::{GridIndex, Rect};
use crate::nav::astar::astar_cells;
use crate::nav::costmap::Costmap;
use crate::nav::{PlanError, PlannedPath};

/// Lane center heights for a boustrophedon sweep of `[ymin, ymax]`: lane k
/// sits at `ymin + (k + ½)·w`, with the last lane pulled back inside.
pub fn lane_heights(ymin: f64, ymax: f64, tool_width: f64) -> Vec<f64> {
    let h = ymax - ymin;
    let n = ((h / tool_width) - 1e-9).ceil().max(1.0) as usize;
    let cap = (ymax - tool_width / 2.0).max((ymin + ymax) / 2.0);
    (0..n)
        .map(|k| (ymin + (k as f64 + 0.5) * tool_width).min(cap))
        .collect()
}

/// Serpentine coverage of the FREE cells of `region`.
pub fn coverage_plan(cmap: &Costmap, tool_width: f64, region: &Rect) -> Result<PlannedPath, PlanError> {
    coverage_plan_from(cmap, tool_width, region, None)
}

/// As [`coverage_plan`], optionally starting from `start` (the path then
/// begins with an approach to the first reachable lane).
pub fn coverage_plan_from(
    cmap: &Costmap,
    tool_width: f64,
    region: &Rect,
    start: Option<GridIndex>,
) -> Result<PlannedPath, PlanError> {
    if !(tool_width.is_finite() && tool_width > 0.0) {
        return Err(PlanError::InvalidArgument(format!(
            "tool width must be positive, got {tool_width}"
        )));
    }
    let meta = &cmap.meta;
    let extent = Rect::new(meta.origin_x, meta.origin_y, meta.x_max(), meta.y_max());
    let region = region.intersection(&extent).ok_or(PlanError::EmptyRegion)?;

    // Columns and rows whose centers fall inside the region.
    let span = |lo: f64, hi: f64, origin: f64, n: usize| {
        let first = ((lo - origin) / meta.resolution - 0.5).ceil().max(0.0) as usize;
        let last = (((hi - origin) / meta.resolution - 0.5).floor() as i64).min(n as i64 - 1);
        (first, last)
    };
    let (c0, c1) = span(region.xmin, region.xmax, meta.origin_x, meta.width);
    let (r0, r1) = span(region.ymin, region.ymax, meta.origin_y, meta.height);
    if c1 < c0 as i64 || r1 < r0 as i64 {
        return Err(PlanError::EmptyRegion);
    }
    let (c1, r1) = (c1 as usize, r1 as usize);

    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for r in r0..=r1 {
        for c in c0..=c1 {
            if cmap.is_free(GridIndex::new(r, c)) {
                bbox = Some(match bbox {
                    None => (r, r, c, c),
                    Some((a, b, d, e)) => (a.min(r), b.max(r), d.min(c), e.max(c)),
                });
            }
        }
    }
    let (fr0, fr1, fc0, fc1) = bbox.ok_or(PlanError::EmptyRegion)?;
    let ymin = (meta.origin_y + fr0 as f64 * meta.resolution).max(region.ymin);
    let ymax = (meta.origin_y + (fr1 + 1) as f64 * meta.resolution).min(region.ymax);

    let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
    for (k, y) in lane_heights(ymin, ymax, tool_width).into_iter().enumerate() {
        let row = ((y - meta.origin_y) / meta.resolution).floor() as usize;
        let row = row.min(meta.height - 1);
        let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut current: Vec<(f64, f64)> = Vec::new();
        for c in fc0..=fc1 {
            if cmap.is_free(GridIndex::new(row, c)) {
                let x = meta.origin_x + (c as f64 + 0.5) * meta.resolution;
                current.push((x, y));
            } else if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
        if k % 2 == 1 {
            runs.reverse();
            for run in &mut runs {
                run.reverse();
            }
        }
        segments.extend(runs);
    }

    let cell = |p: (f64, f64)| meta.cell_of(p.0, p.1).expect("lane points lie on the grid");
    let anchor = match start {
        Some(s) => s,
        None => cell(segments.first().ok_or(PlanError::EmptyRegion)?[0]),
    };
    let reachable = cmap.reachable_from(anchor);
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut at = anchor;
    if start.is_some() {
        points.push(meta.cell_center(anchor));
    }
    for seg in segments {
        let first = cell(seg[0]);
        if !reachable[meta.offset(first)] {
            continue;
        }
        if first != at && !(points.is_empty() && start.is_none()) {
            let detour = astar_cells(cmap, at, first).ok_or(PlanError::Unreachable { segment: None })?;
            for c in detour {
                push_unique(&mut points, meta.cell_center(c));
            }
        }
        for p in seg.iter() {
            push_unique(&mut points, *p);
        }
        at = cell(*seg.last().unwrap());
    }
    if points.is_empty() {
        return Err(PlanError::EmptyRegion);
    }
    Ok(PlannedPath::from_points(points))
}

fn push_unique(points: &mut Vec<(f64, f64)>, p: (f64, f64)) {
    if points.last() != Some(&p) {
        points.push(p);
    }
}
