use std::collections::HashSet;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures_util::StreamExt;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rover_core::io::{import_map, serialize_mission, MapFilePair, Scenario};
use rover_core::nav::Mission;
use rover_core::service::server::{router, spawn_control_loop, ControlHandle};
use rover_core::service::{map_from_json, Mode, Service, TelemetryFrame};

const TICK: Duration = Duration::from_micros(200);

fn start() -> (ControlHandle, Router, f64) {
    let sc = Scenario::default().load().unwrap();
    let dt = sc.dt;
    let (handle, _thread) = spawn_control_loop(Service::new(&sc, 1), TICK);
    (handle.clone(), router(handle), dt)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn state(app: &Router) -> TelemetryFrame {
    let (status, bytes) = call(app, "GET", "/api/state", None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_slice(&bytes).unwrap()
}

async fn wait_for(app: &Router, what: impl Fn(&TelemetryFrame) -> bool) -> TelemetryFrame {
    for _ in 0..20_000 {
        let f = state(app).await;
        if what(&f) {
            return f;
        }
        tokio::time::sleep(Duration::from_millis(1)).await;
    }
    panic!("condition never reached");
}

/// Drives a short mapping lap over HTTP: forward 1 s, then finish.
async fn map_over_http(app: &Router) {
    let (s, _) = call_json(app, "POST", "/api/command", Some(json!({"type": "start_mapping"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(app, "POST", "/api/teleop", Some(json!({"v": 0.2, "omega": 0.0}))).await;
    assert_eq!(s, StatusCode::OK);
    let t0 = state(app).await.tick;
    wait_for(app, |f| f.tick >= t0 + 60).await;
    let (s, _) = call_json(app, "POST", "/api/command", Some(json!({"type": "finish_mapping"}))).await;
    assert_eq!(s, StatusCode::OK);
    // Snapshots are published after the next tick, so reads may lag a command.
    wait_for(app, |f| f.mode == Mode::Idle).await;
    for _ in 0..1000 {
        if call(app, "GET", "/api/map", None).await.0 == StatusCode::OK {
            return;
        }
        tokio::time::sleep(Duration::from_millis(1)).await;
    }
    panic!("map never published");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn map_endpoints_404_until_mapping_then_serve_consistent_map() {
    let (handle, app, _) = start();
    assert_eq!(state(&app).await.mode, Mode::Idle);
    for uri in ["/api/map", "/api/map.pgm", "/api/map.yaml"] {
        let (s, body) = call(&app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["code"], "no-map");
    }
    map_over_http(&app).await;

    let (s, map) = call_json(&app, "GET", "/api/map", None).await;
    assert_eq!(s, StatusCode::OK);
    let from_json = map_from_json(&map).unwrap();
    let (s, image) = call(&app, "GET", "/api/map.pgm", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(image.starts_with(b"P5"));
    let (s, yaml) = call(&app, "GET", "/api/map.yaml", None).await;
    assert_eq!(s, StatusCode::OK);
    let from_files = import_map(&MapFilePair {
        image,
        metadata: String::from_utf8(yaml).unwrap(),
    })
    .unwrap();
    assert_eq!(from_files.cells, from_json.cells);
    assert!(from_json.cells.contains(&rover_core::slam::CellClass::Occupied));
    handle.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn rejections_are_422_with_code_and_violations() {
    let (handle, app, _) = start();
    let before = state(&app).await;

    let (s, body) = call_json(&app, "POST", "/api/command", Some(json!({"type": "finish_mapping"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid-mode");
    assert!(!body["violations"].as_array().unwrap().is_empty());

    let mission = serde_json::from_str::<Value>(&serialize_mission(&Mission::waypoints(&[(3.0, 3.0)]))).unwrap();
    let (s, body) = call_json(&app, "POST", "/api/mission", Some(mission)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "no-map");

    let (s, body) = call_json(&app, "POST", "/api/mission", Some(json!({"version": 7, "waypoints": "x"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "validation");
    assert!(body["violations"].as_array().unwrap().len() >= 2, "{body}");

    let (s, body) = call_json(&app, "POST", "/api/teleop", Some(json!({"v": "fast"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["violations"].as_array().unwrap().len(), 2);

    let (s, body) = call_json(&app, "POST", "/api/command", Some(json!({"type": "teleop", "v": 0.1, "omega": 0.0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "validation");

    let (s, _) = call(&app, "POST", "/api/command", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let after = state(&app).await;
    assert_eq!(after.mode, Mode::Idle);
    assert_eq!(after.map_version, before.map_version);
    assert_eq!(after.path_version, before.path_version);
    handle.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn mission_path_is_served_and_streamed_once_per_version() {
    let (handle, app, _) = start();
    map_over_http(&app).await;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let served = app.clone();
    tokio::spawn(async move { axum::serve(listener, served).await.unwrap() });
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws/telemetry")).await.unwrap();

    let mission = serde_json::from_str::<Value>(&serialize_mission(&Mission::waypoints(&[(2.0, 1.5)]))).unwrap();
    let (s, _) = call_json(&app, "POST", "/api/mission", Some(mission)).await;
    assert_eq!(s, StatusCode::OK);
    wait_for(&app, |f| f.mode == Mode::Executing).await;
    let (_, path) = call_json(&app, "GET", "/api/path", None).await;
    let points = path["points"].as_array().unwrap().len();
    assert!(points >= 2);

    let mut last_stamp = f64::NEG_INFINITY;
    let mut with_path = HashSet::new();
    let mut versions = HashSet::new();
    let mut saw_executing = false;
    let mut first = true;
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(60), ws.next())
            .await
            .expect("telemetry stalled")
            .unwrap()
            .unwrap();
        let frame: TelemetryFrame = serde_json::from_str(msg.to_text().unwrap()).unwrap();
        assert!(frame.stamp > last_stamp);
        last_stamp = frame.stamp;
        versions.insert(frame.path_version);
        if let Some(p) = &frame.path {
            assert!(with_path.insert(frame.path_version), "path resent for version {}", frame.path_version);
            if frame.path_version == path["path_version"].as_u64().unwrap() {
                assert_eq!(p.len(), points);
            }
        } else {
            assert!(!first, "first frame must carry the path");
        }
        first = false;
        saw_executing |= frame.mode == Mode::Executing;
        if saw_executing && frame.mode == Mode::Idle {
            assert_eq!(frame.progress, 1.0);
            break;
        }
    }
    assert_eq!(with_path, versions);
    handle.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_see_whole_frames() {
    let (handle, app, dt) = start();
    let (s, _) = call_json(&app, "POST", "/api/command", Some(json!({"type": "start_mapping"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call_json(&app, "POST", "/api/teleop", Some(json!({"v": 0.1, "omega": 0.3}))).await;
    assert_eq!(s, StatusCode::OK);
    let tasks: Vec<_> = (0..1000)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { state(&app).await })
        })
        .collect();
    let mut ticks = HashSet::new();
    for t in tasks {
        let f = t.await.unwrap();
        assert!((f.stamp - f.tick as f64 * dt).abs() < 1e-9, "{f:?}");
        assert!(f.true_pose.theta > -std::f64::consts::PI && f.true_pose.theta <= std::f64::consts::PI);
        assert!(f.path.is_none());
        ticks.insert(f.tick);
    }
    assert!(!ticks.is_empty());
    handle.stop();
}
