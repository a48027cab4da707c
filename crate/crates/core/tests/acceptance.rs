//! Acceptance suite: one pass/fail line per criterion, each with its runtime
//! budget. Runs without the libtest harness so the lines always print.
//!
//! cargo test -p rover-core --test acceptance

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rover_core::geometry::{wrap_angle, GridIndex, GridMeta, Pose2D, Rect};
use rover_core::io::{
    export_map, import_map, load_scenario, parse_mission, serialize_mission, LoadedScenario, MapFilePair,
};
use rover_core::nav::{inflate_costmap, plan_astar, Cost, Costmap, Mission, PlanError};
use rover_core::service::{parse_script, Command, Mode, Replayer, ScriptEntry};
use rover_core::sim::{step_kinematics, VelocityCmd};
use rover_core::slam::{integrate_scan, scan_match, score_pose, CellClass, OccupancyGrid, SearchWindow, TrinaryGrid};

type Outcome = Result<String, String>;

fn scenarios() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios"))
}

fn scenario(name: &str) -> LoadedScenario {
    let text = std::fs::read_to_string(scenarios().join(format!("{name}.scenario.json"))).unwrap();
    load_scenario(&text).unwrap()
}

fn script(name: &str) -> Vec<ScriptEntry> {
    parse_script(&std::fs::read_to_string(scenarios().join(format!("{name}.commands.json"))).unwrap()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// --- 1: A* against Dijkstra -------------------------------------------------

#[derive(PartialEq)]
struct Node {
    cost: f64,
    moves: (u64, u64),
    cell: (usize, usize),
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal (straight, diagonal) move counts, or None when unreachable.
/// s + d·√2 is injective on integer pairs, so the optimum pair is unique.
fn dijkstra(free: &[Vec<bool>], start: (usize, usize), goal: (usize, usize)) -> Option<(u64, u64)> {
    let (h, w) = (free.len() as i64, free[0].len() as i64);
    let ok = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && free[r as usize][c as usize];
    let mut best = vec![vec![f64::INFINITY; w as usize]; h as usize];
    let mut heap = BinaryHeap::new();
    best[start.0][start.1] = 0.0;
    heap.push(Node {
        cost: 0.0,
        moves: (0, 0),
        cell: start,
    });
    while let Some(Node { cost, moves, cell }) = heap.pop() {
        if cell == goal {
            return Some(moves);
        }
        if cost > best[cell.0][cell.1] {
            continue;
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (cell.0 as i64 + dr, cell.1 as i64 + dc);
                if !ok(r, c) {
                    continue;
                }
                let diag = dr != 0 && dc != 0;
                if diag && !(ok(cell.0 as i64 + dr, cell.1 as i64) && ok(cell.0 as i64, cell.1 as i64 + dc)) {
                    continue;
                }
                let m = if diag { (moves.0, moves.1 + 1) } else { (moves.0 + 1, moves.1) };
                let v = m.0 as f64 + m.1 as f64 * SQRT_2;
                if v < best[r as usize][c as usize] {
                    best[r as usize][c as usize] = v;
                    heap.push(Node {
                        cost: v,
                        moves: m,
                        cell: (r as usize, c as usize),
                    });
                }
            }
        }
    }
    None
}

fn astar_optimality() -> Outcome {
    let res = 0.05;
    let (mut solved, mut unreachable) = (0, 0);
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = GridMeta::new(res, 30, 30, 0.0, 0.0).unwrap();
        let free: Vec<Vec<bool>> = (0..30).map(|_| (0..30).map(|_| !rng.random_bool(0.3)).collect()).collect();
        let mut cmap = Costmap::all_free(meta);
        for (r, row) in free.iter().enumerate() {
            for (c, f) in row.iter().enumerate() {
                if !f {
                    cmap.set(GridIndex::new(r, c), Cost::Lethal);
                }
            }
        }
        let cells: Vec<(usize, usize)> =
            (0..30).flat_map(|r| (0..30).map(move |c| (r, c))).filter(|&(r, c)| free[r][c]).collect();
        let start = cells[rng.random_range(0..cells.len())];
        let goal = cells[rng.random_range(0..cells.len())];
        let oracle = dijkstra(&free, start, goal);
        let planned = plan_astar(&cmap, GridIndex::new(start.0, start.1), GridIndex::new(goal.0, goal.1));
        match (oracle, planned) {
            (None, Err(PlanError::Unreachable { .. })) => unreachable += 1,
            (Some((s, d)), Ok(path)) => {
                let (mut ps, mut pd) = (0, 0);
                for w in path.points.windows(2) {
                    let dr = ((w[1].1 - w[0].1) / res).round() as i64;
                    let dc = ((w[1].0 - w[0].0) / res).round() as i64;
                    match (dr.abs(), dc.abs()) {
                        (1, 1) => pd += 1,
                        (1, 0) | (0, 1) => ps += 1,
                        _ => return Err(format!("seed {seed}: illegal move {dr},{dc}")),
                    }
                }
                let oracle_cost = s as f64 * res + d as f64 * (res * SQRT_2);
                if (ps, pd) != (s, d) || path.cost != oracle_cost {
                    return Err(format!(
                        "seed {seed}: A* {ps}+{pd}√2 cost {} vs Dijkstra {s}+{d}√2 cost {oracle_cost}",
                        path.cost
                    ));
                }
                solved += 1;
            }
            (o, p) => return Err(format!("seed {seed}: verdicts differ, oracle {o:?}, planner {:?}", p.err())),
        }
    }
    Ok(format!("200 maps: {solved} equal-cost paths, {unreachable} agreed unreachable"))
}

// --- 2: exact arc step against Euler ----------------------------------------

fn euler(pose: &Pose2D, v: f64, omega: f64, dt: f64, n: u64) -> (f64, f64, f64) {
    let h = dt / n as f64;
    let (mut c, mut s) = (pose.theta.cos(), pose.theta.sin());
    let (rc, rs) = ((omega * h).cos(), (omega * h).sin());
    let (mut x, mut y) = (pose.x, pose.y);
    let vh = v * h;
    for _ in 0..n {
        x += vh * c;
        y += vh * s;
        let c2 = c * rc - s * rs;
        s = s * rc + c * rs;
        c = c2;
    }
    (x, y, pose.theta + omega * dt)
}

fn kinematics_vs_euler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_xy, mut worst_th) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let pose = Pose2D::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI)).unwrap();
        let v = rng.random_range(-1.0..1.0);
        let omega = match i % 10 {
            0 => rng.random_range(-1e-6..1e-6),
            1 => 0.0,
            _ => rng.random_range(-PI..PI),
        };
        let dt = rng.random_range(1e-4..=0.1);
        let got = step_kinematics(&pose, &VelocityCmd::new(v, omega), dt).unwrap();
        let (x, y, th) = euler(&pose, v, omega, dt, 1_000_000);
        worst_xy = worst_xy.max((got.x - x).hypot(got.y - y));
        worst_th = worst_th.max(wrap_angle(got.theta - th).unwrap().abs());
    }
    check(
        worst_xy < 1e-6 && worst_th < 1e-9,
        format!("1000 draws: max position error {worst_xy:.2e} m, max heading error {worst_th:.2e} rad"),
    )
}

// --- 3: mapping lap fidelity ------------------------------------------------

fn slam_fidelity() -> Outcome {
    let sc = scenario("default");
    let lap: Vec<ScriptEntry> = script("demo")
        .into_iter()
        .take_while(|e| !matches!(e.command, Command::StartMission(_)))
        .collect();
    if !matches!(lap.last().map(|e| &e.command), Some(Command::FinishMapping)) {
        return Err("demo script has no mapping lap".into());
    }
    let mut replayer = Replayer::new(&sc, lap, 1);
    while replayer.step().map_err(|e| e.to_string())?.is_some() {}
    let service = replayer.service();
    let mapper = service.mapper().ok_or("no mapper after lap")?;
    let grid = mapper.trinary();
    let truth = service.sim().world.rasterize_occupied(&grid.meta);
    let (mut considered, mut agree) = (0usize, 0usize);
    for (off, &n) in mapper.observations().iter().enumerate() {
        if n < 3 {
            continue;
        }
        considered += 1;
        let ok = match grid.cells[off] {
            CellClass::Occupied => truth[off],
            CellClass::Free => !truth[off],
            CellClass::Unknown => false,
        };
        agree += usize::from(ok);
    }
    let fraction = agree as f64 / considered.max(1) as f64;
    let est = service.estimate();
    let truth_pose = service.sim().state.pose;
    let err = (est.x - truth_pose.x).hypot(est.y - truth_pose.y);
    let cells = err / grid.meta.resolution;
    check(
        considered > 0 && fraction >= 0.95 && cells <= 3.0,
        format!(
            "{agree}/{considered} cells agree ({:.2}%), final pose error {err:.4} m = {cells:.2} cells",
            fraction * 100.0
        ),
    )
}

// --- 4: scan-match recovery -------------------------------------------------

/// Runs the perturbation trials with the given range noise; returns the
/// number recovered and the first failure.
fn recovery_trials(sigma: f64) -> Result<(usize, Option<String>), String> {
    let sc = scenario("mixed");
    let meta = sc.map_meta();
    let truth = sc.world.rasterize_occupied(&meta);
    let truth_grid = TrinaryGrid {
        meta,
        cells: truth.iter().map(|&o| if o { CellClass::Occupied } else { CellClass::Free }).collect(),
    };
    let clear = inflate_costmap(&truth_grid, 0.3, 0.0);
    let candidates: Vec<usize> = (0..meta.len()).filter(|&o| clear.cells[o] == Cost::Free).collect();
    let window = SearchWindow::for_resolution(meta.resolution);
    let (nxy, nth) = window.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sim = sc.simulator(4);
    sim.lidar.range_noise_sigma = sigma;
    let (mut recovered, mut first_failure) = (0, None);
    for trial in 0..100 {
        let cell = meta.index_at(candidates[rng.random_range(0..candidates.len())]);
        let (cx, cy) = meta.grid_to_world(cell).unwrap();
        let half = meta.resolution / 2.0;
        let p = Pose2D::new(
            cx + rng.random_range(-half..half),
            cy + rng.random_range(-half..half),
            rng.random_range(-PI..PI),
        )
        .unwrap();
        sim.state.pose = p;
        let mut grid = OccupancyGrid::new(meta);
        for _ in 0..3 {
            integrate_scan(&mut grid, &p, &sim.scan().unwrap()).unwrap();
        }
        let scan = sim.scan().unwrap();
        let (dx, dy, dth) = (
            rng.random_range(-window.xy_half_width..=window.xy_half_width),
            rng.random_range(-window.xy_half_width..=window.xy_half_width),
            rng.random_range(-window.theta_half_width..=window.theta_half_width),
        );
        let prior = Pose2D::new(p.x + dx, p.y + dy, p.theta + dth).unwrap();
        let m = scan_match(&grid, &scan, &prior, &window).map_err(|e| e.to_string())?;
        // The lattice point nearest the true pose never scores higher.
        let k = |d: f64, step: f64, n: i64| ((-d / step).round() as i64).clamp(-n, n);
        let (i, j, t) = (k(dx, window.xy_step, nxy), k(dy, window.xy_step, nxy), k(dth, window.theta_step, nth));
        let nearest = Pose2D::new(
            prior.x + i as f64 * window.xy_step,
            prior.y + j as f64 * window.xy_step,
            prior.theta + t as f64 * window.theta_step,
        )
        .unwrap();
        if m.score < score_pose(&grid, &scan, &nearest) {
            return Err(format!("trial {trial}: returned score below nearest lattice point"));
        }
        let ex = (m.pose.x - p.x).abs();
        let ey = (m.pose.y - p.y).abs();
        let eth = wrap_angle(m.pose.theta - p.theta).unwrap().abs();
        if ex <= window.xy_step && ey <= window.xy_step && eth <= window.theta_step {
            recovered += 1;
        } else if first_failure.is_none() {
            first_failure = Some(format!(
                "trial {trial} error ({ex:.4} m, {ey:.4} m, {eth:.4} rad) from perturbation ({dx:.3}, {dy:.3}, {dth:.3})"
            ));
        }
    }
    Ok((recovered, first_failure))
}

fn scan_match_recovery() -> Outcome {
    let (clean, failure) = recovery_trials(0.0)?;
    let (noisy, noisy_failure) = recovery_trials(0.01)?;
    let info = format!(
        "noise-free scans {clean}/100 recovered{}; with 0.01 m range noise {noisy}/100 (informational{})",
        failure.map(|f| format!(", first miss: {f}")).unwrap_or_default(),
        noisy_failure.map(|f| format!(", first miss: {f}")).unwrap_or_default(),
    );
    check(clean == 100, info)
}

// --- 5: coverage -------------------------------------------------------------

struct CoverageRun {
    fraction: f64,
    oracle_fraction: f64,
    cleaned: usize,
    oracle_cleaned: usize,
    collisions: usize,
    mode: Mode,
}

/// Replays a coverage script, re-deriving the swept set and the cleaned
/// debris from the ground-truth trajectory.
fn coverage_run(name: &str) -> Result<CoverageRun, String> {
    let sc = scenario(name);
    let mut replayer = Replayer::new(&sc, script(&format!("{name}-coverage")), 1);
    let debris = replayer.service().sim().world.debris.clone();
    let debris_meta = replayer.service().sim().world.debris_meta;
    let mut poses = Vec::new();
    let mut mission_start = None;
    loop {
        let done = replayer.apply_due().map_err(|e| e.to_string())?;
        let before = replayer.service().mode();
        if before == Mode::Executing && mission_start.is_none() {
            mission_start = Some(replayer.service().estimate());
        }
        if done || replayer.step().map_err(|e| e.to_string())?.is_none() {
            break;
        }
        let after = replayer.service().mode();
        if before == Mode::Executing && after != Mode::Idle {
            poses.push(replayer.service().sim().state.pose);
        }
    }
    let service = replayer.service();
    let metrics = service.metrics();
    let reach = sc.params.tool_width / 2.0;

    let oracle_cleaned = debris
        .iter()
        .filter(|&&d| {
            let (x, y) = debris_meta.grid_to_world(d).unwrap();
            poses.iter().any(|p| (x - p.x).hypot(y - p.y) <= reach)
        })
        .count();

    let map = service.active_map().ok_or("no map")?;
    let cmap = inflate_costmap(map, sc.params.radius, service.config().safety_margin);
    let meta = cmap.meta;
    let start = mission_start.ok_or("mission never started")?;
    let reference = reachable_free(&cmap, meta.cell_of(start.x, start.y).ok_or("start off map")?);
    let mut swept = vec![false; meta.len()];
    let span = (reach / meta.resolution).ceil() as i64 + 1;
    for p in &poses {
        let (r0, c0) = meta.cell_coords(p.x, p.y);
        for r in r0 - span..=r0 + span {
            for c in c0 - span..=c0 + span {
                if r < 0 || c < 0 || r >= meta.height as i64 || c >= meta.width as i64 {
                    continue;
                }
                let idx = GridIndex::new(r as usize, c as usize);
                let (x, y) = meta.grid_to_world(idx).unwrap();
                if (x - p.x).hypot(y - p.y) <= reach {
                    swept[meta.offset(idx)] = true;
                }
            }
        }
    }
    let total = reference.iter().filter(|&&r| r).count();
    let hit = reference.iter().zip(&swept).filter(|(&r, &s)| r && s).count();
    Ok(CoverageRun {
        fraction: metrics.coverage_fraction,
        oracle_fraction: hit as f64 / total as f64,
        cleaned: metrics.cleaned_count,
        oracle_cleaned,
        collisions: metrics.collision_count,
        mode: service.mode(),
    })
}

/// Breadth-first flood over FREE cells, 8-connected without corner cutting.
fn reachable_free(cmap: &Costmap, start: GridIndex) -> Vec<bool> {
    let meta = cmap.meta;
    let free = |r: i64, c: i64| cmap.is_free_at(r, c);
    let mut seen = vec![false; meta.len()];
    let mut queue = std::collections::VecDeque::new();
    if free(start.row as i64, start.col as i64) {
        seen[meta.offset(start)] = true;
        queue.push_back((start.row as i64, start.col as i64));
    }
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if !free(nr, nc) || (dr != 0 && dc != 0 && !(free(r + dr, c) && free(r, c + dc))) {
                continue;
            }
            let off = nr as usize * meta.width + nc as usize;
            if !seen[off] {
                seen[off] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    seen
}

fn coverage() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["default", "pillars", "crates", "mixed"] {
        let run = coverage_run(name)?;
        let need = if name == "default" { 1.0 } else { 0.9 };
        let pass = run.mode == Mode::Idle
            && run.fraction >= need
            && run.fraction == run.oracle_fraction
            && run.cleaned == run.oracle_cleaned;
        ok &= pass;
        lines.push(format!(
            "{name} {:.2}% (oracle {:.2}%, need {:.0}%) cleaned {} (oracle {}) collisions {}",
            run.fraction * 100.0,
            run.oracle_fraction * 100.0,
            need * 100.0,
            run.cleaned,
            run.oracle_cleaned,
            run.collisions
        ));
    }
    check(ok, lines.join("; "))
}

// --- 6: formats ---------------------------------------------------------------

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/").to_string() + name).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng) -> TrinaryGrid {
    let (w, h) = (rng.random_range(1..60), rng.random_range(1..60));
    let res = [0.01, 0.025, 0.05, 0.1, 0.2][rng.random_range(0..5)];
    let meta = GridMeta::new(res, w, h, rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)).unwrap();
    let classes = [CellClass::Free, CellClass::Occupied, CellClass::Unknown];
    TrinaryGrid {
        meta,
        cells: (0..meta.len()).map(|_| classes[rng.random_range(0..3)]).collect(),
    }
}

fn random_mission(rng: &mut ChaCha8Rng) -> Mission {
    if rng.random_bool(0.5) {
        let n = rng.random_range(1..8);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))).collect();
        Mission::waypoints(&pts)
    } else if rng.random_bool(0.5) {
        Mission::coverage(None)
    } else {
        let (x, y) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        Mission::coverage(Some(Rect::new(x, y, x + rng.random_range(0.1..10.0), y + rng.random_range(0.1..10.0))))
    }
}

fn formats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..500 {
        let grid = random_grid(&mut rng);
        let pair = export_map(&grid, "m");
        let back = import_map(&pair).map_err(|e| format!("map {i}: {e}"))?;
        if back != grid || export_map(&back, "m") != pair {
            return Err(format!("map {i} did not round-trip"));
        }
        let mission = random_mission(&mut rng);
        let text = serialize_mission(&mission);
        let parsed = parse_mission(&text).map_err(|e| format!("mission {i}: {e}"))?;
        if parsed != mission || serialize_mission(&parsed) != text {
            return Err(format!("mission {i} did not round-trip: {text}"));
        }
    }

    let meta = GridMeta::new(0.05, 4, 3, -1.0, 2.5).unwrap();
    let (f, o, u) = (CellClass::Free, CellClass::Occupied, CellClass::Unknown);
    let grid = TrinaryGrid {
        meta,
        cells: vec![f, f, o, u, u, o, f, f, o, f, u, f],
    };
    let pair = export_map(&grid, "golden");
    let expected = MapFilePair {
        image: golden("golden.pgm"),
        metadata: String::from_utf8(golden("golden.yaml")).unwrap(),
    };
    if pair != expected {
        return Err("map export differs from golden files".into());
    }
    if import_map(&expected).map_err(|e| e.to_string())? != grid {
        return Err("golden map imports differently".into());
    }
    let demo = Mission::waypoints(&[(3.0, 3.0), (7.0, 2.0), (8.0, 4.5)]);
    let region = Mission::coverage(Some(Rect::new(0.5, 0.25, 9.5, 5.75)));
    for (m, file) in [(demo, "waypoints.mission.json"), (region, "coverage.mission.json")] {
        if serialize_mission(&m).into_bytes() != golden(file) {
            return Err(format!("{file}: serialization differs from golden file"));
        }
    }
    Ok("500 map pairs and 500 missions round-trip; 3 golden files byte-identical".into())
}

// --- 7: demo replay -------------------------------------------------------------

fn demo_replay() -> Outcome {
    let sc = scenario("default");
    let run = || Replayer::new(&sc, script("demo"), 1).run().map_err(|e| e.to_string());
    let a = run()?;
    let b = run()?;
    let (ja, jb) = (
        serde_json::to_string(&a.metrics).unwrap(),
        serde_json::to_string(&b.metrics).unwrap(),
    );
    let last = (8.0, 4.5);
    let err = (a.true_pose.x - last.0).hypot(a.true_pose.y - last.1);
    check(
        a.mode == Mode::Idle && err <= 0.1 && ja == jb,
        format!("mode {:?}, final pose {err:.4} m from last waypoint, metrics identical: {}", a.mode, ja == jb),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("A* optimality", Duration::from_secs(10), astar_optimality),
        ("kinematics", Duration::from_secs(10), kinematics_vs_euler),
        ("SLAM fidelity", Duration::from_secs(30), slam_fidelity),
        ("scan-match recovery", Duration::from_secs(20), scan_match_recovery),
        ("coverage", Duration::from_secs(30), coverage),
        ("format round-trips", Duration::from_secs(5), formats),
        ("end-to-end replay", Duration::from_secs(60), demo_replay),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = f();
        let took = t0.elapsed();
        let (verdict, detail) = match (&outcome, took <= *budget) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} {verdict} [{name}] {:.2} s of {} s: {detail}",
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
