//! Regenerates the replay scripts under `scenarios/`.
//!
//! The mapping lap is recorded from a simulated operator who steers along a
//! rectangle one meter inside the walls using the pose estimate shown in the
//! console, issuing a teleop command every 10 ticks. Because replay is
//! deterministic, replaying the recorded commands reproduces the run.
//!
//! cargo run --release -p rover-core --example make_scripts -- [scenarios dir]

use std::path::PathBuf;

use rover_core::io::{load_scenario, LoadedScenario};
use rover_core::nav::{Follower, Mission, PlannedPath, PursuitParams};
use rover_core::service::{script_to_json, Command, Replayer, ScriptEntry, Service};

const SEED: u64 = 1;
const TELEOP_EVERY: u64 = 10;
/// Idle ticks between the end of the lap and `finish_mapping`.
const SETTLE_TICKS: u64 = 50;

fn lap_path(s: &LoadedScenario) -> PlannedPath {
    let b = s.world.bounds;
    let (x0, y0, x1, y1) = (b.xmin + 1.0, b.ymin + 1.0, b.xmax - 1.0, b.ymax - 1.0);
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0 + 0.3)];
    let mut pts = vec![(s.start.x, s.start.y)];
    for w in corners.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b.0 - a.0).hypot(b.1 - a.1) / 0.05).round() as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            pts.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    PlannedPath::from_points(pts)
}

/// Records the mapping lap: `start_mapping`, teleops, `finish_mapping`.
fn record_lap(s: &LoadedScenario) -> Vec<ScriptEntry> {
    let mut service = Service::new(s, SEED);
    let mut script = vec![ScriptEntry {
        tick: 0,
        command: Command::StartMapping,
    }];
    service.handle_command(&Command::StartMapping).unwrap();
    let mut follower = Follower::new(lap_path(s), PursuitParams::default()).unwrap();
    let mut tick = 0;
    loop {
        if tick % TELEOP_EVERY == 0 {
            let step = follower.step(&service.estimate());
            if step.done {
                break;
            }
            let command = Command::Teleop {
                v: step.cmd.v,
                omega: step.cmd.omega,
            };
            service.handle_command(&command).unwrap();
            script.push(ScriptEntry { tick, command });
        }
        service.control_tick();
        tick += 1;
    }
    script.push(ScriptEntry {
        tick: tick + SETTLE_TICKS,
        command: Command::FinishMapping,
    });
    script
}

fn with_mission(mut script: Vec<ScriptEntry>, mission: Mission) -> Vec<ScriptEntry> {
    let tick = script.last().unwrap().tick + 1;
    script.push(ScriptEntry {
        tick,
        command: Command::StartMission(mission),
    });
    script
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios")));
    let demo_waypoints = [(3.0, 3.0), (7.0, 2.0), (8.0, 4.5)];
    for name in ["default", "pillars", "crates", "mixed"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.scenario.json"))).unwrap();
        let scenario = load_scenario(&text).unwrap();
        let lap = record_lap(&scenario);
        let mut outputs = vec![(
            format!("{name}-coverage.commands.json"),
            with_mission(lap.clone(), Mission::coverage(None)),
        )];
        if name == "default" {
            outputs.push(("demo.commands.json".into(), with_mission(lap, Mission::waypoints(&demo_waypoints))));
        }
        for (file, script) in outputs {
            let out = Replayer::new(&scenario, script.clone(), SEED).run();
            match &out {
                Ok(o) => println!(
                    "{file}: mode {:?}, pose ({:.3}, {:.3}), metrics {}",
                    o.mode,
                    o.true_pose.x,
                    o.true_pose.y,
                    serde_json::to_string(&o.metrics).unwrap()
                ),
                Err(e) => println!("{file}: {e}"),
            }
            std::fs::write(dir.join(&file), script_to_json(&script) + "\n").unwrap();
        }
    }
}
