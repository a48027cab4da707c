use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use log::info;
use serde_json::json;

use rover_core::geometry::{Pose2D, Rect};
use rover_core::io::{
    bind_mission, load_scenario, parse_mission, read_map_files, write_map_files, LoadedScenario, MapFormatError,
    ValidationError,
};
use rover_core::nav::{compile_mission, coverage_plan, inflate_costmap, MissionMode, PlanError, PlannedPath};
use rover_core::service::server::{router, spawn_control_loop, DEFAULT_PORT};
use rover_core::service::{map_from_json, map_to_json, parse_script, ReplayError, Replayer, Service};
use rover_core::sim::{Obstacle, RoverParams};

/// Autonomous tank-cleaning rover: simulator, SLAM, planner and mission service.
#[derive(Parser)]
#[command(name = "rover", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the mission service with its HTTP/WebSocket API.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Simulation speed relative to wall-clock time.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Replay a command script headlessly and write run metrics.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also draw tank, planned paths and driven trajectory as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also save the final session state (map, poses, mode) as JSON.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Plan a mission on a saved map and write the path as JSON.
    Plan {
        /// Map metadata YAML; the image is resolved relative to it.
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Start position `x,y`. Defaults to the first waypoint, or for
        /// coverage missions to the first lane.
        #[arg(long, value_parser = parse_xy)]
        start: Option<(f64, f64)>,
        #[arg(long, default_value_t = RoverParams::default().radius)]
        robot_radius: f64,
        #[arg(long, default_value_t = 0.1)]
        safety_margin: f64,
        /// Coverage lane spacing in meters.
        #[arg(long, default_value_t = 0.3)]
        lane_width: f64,
    },
    /// Export the map from a saved session state as `<out>.pgm` + `<out>.yaml`.
    ExportMap {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_xy(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(x)?, p(y)?))
}

/// Failure with its exit code: 1 I/O, 2 validation, 3 planning, 4 rejection.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn validation(what: &Path, e: ValidationError) -> Self {
        let mut message = format!("{} is invalid:", what.display());
        for v in &e.violations {
            let _ = write!(message, "\n  - {v}");
        }
        Self { code: 2, message }
    }

    fn planning(e: PlanError) -> Self {
        Self {
            code: 3,
            message: format!("planning failed ({}): {e}", e.code()),
        }
    }
}

impl From<MapFormatError> for Failure {
    fn from(e: MapFormatError) -> Self {
        let code = if matches!(e, MapFormatError::Io { .. }) { 1 } else { 2 };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn scenario(path: &Path) -> Result<LoadedScenario, Failure> {
    load_scenario(&read(path)?).map_err(|e| Failure::validation(path, e))
}

fn serve(scenario_path: &Path, seed: u64, port: u16, speed: f64) -> Result<(), Failure> {
    let s = scenario(scenario_path)?;
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Failure {
            code: 2,
            message: "--speed must be positive".into(),
        });
    }
    let period = Duration::from_secs_f64(s.dt / speed);
    let (handle, thread) = spawn_control_loop(Service::new(&s, seed), period);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    let result = rt.block_on(async {
        let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(handle.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    handle.stop();
    let _ = thread.join();
    result.map_err(|e| Failure {
        code: 1,
        message: format!("server: {e}"),
    })
}

fn replay(
    scenario_path: &Path,
    script_path: &Path,
    out: &Path,
    seed: u64,
    svg: Option<&Path>,
    state_out: Option<&Path>,
) -> Result<(), Failure> {
    let s = scenario(scenario_path)?;
    let script = parse_script(&read(script_path)?).map_err(|e| Failure::validation(script_path, e))?;
    let mut replayer = Replayer::new(&s, script, seed);
    let mut trail = vec![s.start];
    let mut paths: Vec<Vec<(f64, f64)>> = Vec::new();
    loop {
        match replayer.step() {
            Ok(None) => break,
            Ok(Some(frame)) => {
                if let Some(f) = frame {
                    trail.push(f.true_pose);
                    paths.extend(f.path.filter(|p| !p.is_empty()));
                }
            }
            Err(e) => {
                let code = match &e {
                    ReplayError::Rejected { rejection, .. } if rejection.is_planning() => 3,
                    ReplayError::Rejected { rejection, .. } if rejection.code == "validation" => 2,
                    _ => 4,
                };
                return Err(Failure {
                    code,
                    message: e.to_string(),
                });
            }
        }
    }
    let service = replayer.service();
    trail.push(service.sim().state.pose);
    let metrics = serde_json::to_string_pretty(&service.metrics()).expect("metrics serialize");
    write(out, &(metrics + "\n"))?;
    if let Some(svg) = svg {
        write(svg, &render_svg(&s, &paths, &trail))?;
    }
    if let Some(state_out) = state_out {
        let state = json!({
            "mode": service.mode(),
            "pose": service.estimate(),
            "true_pose": service.sim().state.pose,
            "map": service.active_map().map(|g| map_to_json(g, service.map_version())),
        });
        write(state_out, &(serde_json::to_string(&state).expect("state serializes") + "\n"))?;
    }
    Ok(())
}

fn plan(
    map: &Path,
    mission_path: &Path,
    out: &Path,
    start: Option<(f64, f64)>,
    robot_radius: f64,
    safety_margin: f64,
    lane_width: f64,
) -> Result<(), Failure> {
    let grid = read_map_files(map)?;
    let mission = parse_mission(&read(mission_path)?).map_err(|e| Failure::validation(mission_path, e))?;
    let mission = bind_mission(&mission, &grid.meta).map_err(|e| Failure::validation(mission_path, e))?;
    let cmap = inflate_costmap(&grid, robot_radius, safety_margin);
    let start = start.or_else(|| mission.waypoints.first().map(|w| (w.x, w.y)));
    let path: PlannedPath = match (start, mission.mode) {
        (Some((x, y)), _) => {
            let pose = Pose2D::new(x, y, 0.0).map_err(|e| Failure {
                code: 2,
                message: format!("--start: {e}"),
            })?;
            compile_mission(&cmap, &pose, &mission, lane_width).map_err(Failure::planning)?
        }
        (None, MissionMode::Coverage) => {
            let region = mission.region.expect("bound coverage mission has a region");
            coverage_plan(&cmap, lane_width, &region).map_err(Failure::planning)?
        }
        (None, MissionMode::Waypoints) => unreachable!("validated waypoint missions are non-empty"),
    };
    let body = json!({"cost": path.cost, "points": path.points});
    write(out, &(serde_json::to_string(&body).expect("path serializes") + "\n"))
}

fn export_map(state: &Path, out: &Path) -> Result<(), Failure> {
    let value: serde_json::Value = serde_json::from_str(&read(state)?)
        .map_err(|e| Failure::validation(state, ValidationError::single(e.to_string())))?;
    let map = value
        .get("map")
        .filter(|m| !m.is_null())
        .ok_or_else(|| Failure::validation(state, ValidationError::single("state holds no map")))?;
    let grid = map_from_json(map).map_err(|e| Failure::validation(state, e))?;
    let yaml = write_map_files(&grid, out)?;
    info!("wrote {}", yaml.display());
    Ok(())
}

fn render_svg(s: &LoadedScenario, paths: &[Vec<(f64, f64)>], trail: &[Pose2D]) -> String {
    let b: Rect = s.world.bounds;
    let scale = 80.0;
    let (w, h) = (b.width() * scale, b.height() * scale);
    let px = |x: f64| (x - b.xmin) * scale;
    let py = |y: f64| (b.ymax - y) * scale;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.1} {h:.1}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"#f4f4f0\" stroke=\"#333\" stroke-width=\"2\"/>\n"
    );
    for o in &s.world.obstacles {
        match o {
            Obstacle::Rect { xmin, ymin, xmax, ymax } => {
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#777\"/>",
                    px(*xmin),
                    py(*ymax),
                    (xmax - xmin) * scale,
                    (ymax - ymin) * scale
                );
            }
            Obstacle::Circle { x, y, radius } => {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{:.1}\" fill=\"#777\"/>",
                    px(*x),
                    py(*y),
                    radius * scale
                );
            }
        }
    }
    let polyline = |pts: &mut dyn Iterator<Item = (f64, f64)>, color: &str, width: f64| {
        let coords: Vec<String> = pts.map(|(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n", coords.join(" "))
    };
    for p in paths {
        out += &polyline(&mut p.iter().copied(), "#3a7bd5", 1.5);
    }
    out += &polyline(&mut trail.iter().map(|p| (p.x, p.y)), "#d0443e", 1.0);
    for d in &s.world.debris {
        let (x, y) = (
            s.world.debris_meta.origin_x + (d.col as f64 + 0.5) * s.world.debris_meta.resolution,
            s.world.debris_meta.origin_y + (d.row as f64 + 0.5) * s.world.debris_meta.resolution,
        );
        let _ = writeln!(out, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"#8a6d3b\"/>", px(x), py(y));
    }
    out + "</svg>\n"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Serve {
            scenario,
            seed,
            port,
            speed,
        } => serve(scenario, *seed, *port, *speed),
        Cmd::Replay {
            scenario,
            script,
            out,
            seed,
            svg,
            state_out,
        } => replay(scenario, script, out, *seed, svg.as_deref(), state_out.as_deref()),
        Cmd::Plan {
            map,
            mission,
            out,
            start,
            robot_radius,
            safety_margin,
            lane_width,
        } => plan(map, mission, out, *start, *robot_radius, *safety_margin, *lane_width),
        Cmd::ExportMap { state, out } => export_map(state, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rover: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
