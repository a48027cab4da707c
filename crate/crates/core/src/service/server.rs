//! HTTP/WebSocket front end. One control thread owns the [`Service`]; the
//! handlers only enqueue commands and read published snapshots.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::{oneshot, watch};

use crate::io::{export_map, mission_from_value, ValidationError};
use crate::service::{map_to_json, teleop_from_value, Command, Rejection, Service, TelemetryFrame};
use crate::slam::TrinaryGrid;

pub const DEFAULT_PORT: u16 = 8071;

/// Latest published state. Frames never carry the path; it travels next to
/// them so every subscriber can apply the send-on-change rule itself.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub frame: TelemetryFrame,
    pub path: Arc<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct MapSnapshot {
    pub grid: TrinaryGrid,
    /// Tick at which the snapshot was taken.
    pub version: u64,
}

struct Request {
    command: Command,
    reply: oneshot::Sender<Result<(), Rejection>>,
}

/// Handle to a running control loop.
#[derive(Clone)]
pub struct ControlHandle {
    requests: mpsc::Sender<Request>,
    snapshots: watch::Receiver<Arc<Snapshot>>,
    maps: watch::Receiver<Option<Arc<MapSnapshot>>>,
    stop: Arc<AtomicBool>,
}

impl ControlHandle {
    /// Queues a command and waits for the loop to apply it at the next tick
    /// boundary.
    pub async fn submit(&self, command: Command) -> Result<(), Rejection> {
        let (reply, rx) = oneshot::channel();
        self.requests
            .send(Request { command, reply })
            .map_err(|_| Rejection::new("stopped", "control loop is not running"))?;
        rx.await
            .unwrap_or_else(|_| Err(Rejection::new("stopped", "control loop is not running")))
    }

    pub fn latest(&self) -> Arc<Snapshot> {
        self.snapshots.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<Snapshot>> {
        self.snapshots.clone()
    }

    pub fn map(&self) -> Option<Arc<MapSnapshot>> {
        self.maps.borrow().clone()
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

/// Live map refresh period while mapping, in ticks.
const LIVE_MAP_EVERY: u64 = 50;

/// Starts the control thread. `tick_period` is the wall-clock time per
/// simulator tick; pass the scenario dt for real time.
pub fn spawn_control_loop(mut service: Service, tick_period: Duration) -> (ControlHandle, JoinHandle<Service>) {
    let (req_tx, req_rx) = mpsc::channel::<Request>();
    let first = publish(&mut service);
    let (snap_tx, snap_rx) = watch::channel(Arc::new(first));
    let (map_tx, map_rx) = watch::channel(None);
    let stop = Arc::new(AtomicBool::new(false));
    let handle = ControlHandle {
        requests: req_tx,
        snapshots: snap_rx,
        maps: map_rx,
        stop: stop.clone(),
    };
    let thread = std::thread::spawn(move || {
        let mut next = Instant::now();
        let mut map_version = 0;
        let mut path = Arc::new(Vec::new());
        let mut path_version = 0;
        loop {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            loop {
                match req_rx.try_recv() {
                    Ok(r) => {
                        let _ = r.reply.send(service.handle_command(&r.command));
                    }
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return service,
                }
            }
            if let Some(mut frame) = service.control_tick() {
                if frame.path_version != path_version {
                    path_version = frame.path_version;
                    path = Arc::new(service.active_path().map(|p| p.points.clone()).unwrap_or_default());
                }
                frame.path = None;
                snap_tx.send_replace(Arc::new(Snapshot {
                    frame,
                    path: path.clone(),
                }));
            }
            let live = service.mode() == super::Mode::Mapping && service.sim().clock.tick % LIVE_MAP_EVERY == 0;
            if service.map_version() != map_version || live {
                map_version = service.map_version();
                if let Some(grid) = service.display_map() {
                    map_tx.send_replace(Some(Arc::new(MapSnapshot {
                        grid,
                        version: service.sim().clock.tick,
                    })));
                }
            }
            next += tick_period;
            let now = Instant::now();
            if next > now {
                std::thread::sleep(next - now);
            } else {
                next = now;
            }
        }
        service
    });
    (handle, thread)
}

fn publish(service: &mut Service) -> Snapshot {
    let mut frame = service.snapshot_telemetry();
    frame.path = None;
    Snapshot {
        frame,
        path: Arc::new(service.active_path().map(|p| p.points.clone()).unwrap_or_default()),
    }
}

pub fn router(handle: ControlHandle) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/path", get(get_path))
        .route("/api/map", get(get_map))
        .route("/api/map.pgm", get(get_map_pgm))
        .route("/api/map.yaml", get(get_map_yaml))
        .route("/api/command", post(post_command))
        .route("/api/teleop", post(post_teleop))
        .route("/api/mission", post(post_mission))
        .route("/ws/telemetry", get(ws_telemetry))
        .with_state(handle)
}

fn invalid(err: ValidationError) -> Response {
    (
        StatusCode::UNPROCESSABLE_ENTITY,
        Json(json!({"code": "validation", "message": err.to_string(), "violations": err.violations})),
    )
        .into_response()
}

fn parse_body(body: &Bytes) -> Result<Value, Response> {
    serde_json::from_slice(body).map_err(|e| invalid(ValidationError::single(format!("body is not valid JSON: {e}"))))
}

async fn submit(handle: &ControlHandle, command: Command) -> Response {
    match handle.submit(command).await {
        Ok(()) => Json(json!({"ok": true})).into_response(),
        Err(r) => {
            let violations: Vec<String> = vec![r.message.clone()];
            (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({"code": r.code, "message": r.message, "violations": violations})),
            )
                .into_response()
        }
    }
}

async fn get_state(State(h): State<ControlHandle>) -> Json<TelemetryFrame> {
    Json(h.latest().frame.clone())
}

async fn get_path(State(h): State<ControlHandle>) -> Json<Value> {
    let snap = h.latest();
    Json(json!({"path_version": snap.frame.path_version, "points": *snap.path}))
}

fn no_map() -> Response {
    (StatusCode::NOT_FOUND, Json(json!({"code": "no-map", "message": "no map has been recorded yet"}))).into_response()
}

async fn get_map(State(h): State<ControlHandle>) -> Response {
    match h.map() {
        Some(m) => Json(map_to_json(&m.grid, m.version)).into_response(),
        None => no_map(),
    }
}

async fn get_map_pgm(State(h): State<ControlHandle>) -> Response {
    match h.map() {
        Some(m) => ([(header::CONTENT_TYPE, "image/x-portable-graymap")], export_map(&m.grid, "map").image).into_response(),
        None => no_map(),
    }
}

async fn get_map_yaml(State(h): State<ControlHandle>) -> Response {
    match h.map() {
        Some(m) => ([(header::CONTENT_TYPE, "application/yaml")], export_map(&m.grid, "map").metadata).into_response(),
        None => no_map(),
    }
}

async fn post_command(State(h): State<ControlHandle>, body: Bytes) -> Response {
    let value = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match Command::from_value(&value) {
        Ok(c @ (Command::StartMapping | Command::FinishMapping | Command::Pause | Command::Resume | Command::Abort)) => {
            submit(&h, c).await
        }
        Ok(c) => invalid(ValidationError::single(format!(
            "{} is not accepted here; use /api/teleop or /api/mission",
            c.name()
        ))),
        Err(e) => invalid(e),
    }
}

async fn post_teleop(State(h): State<ControlHandle>, body: Bytes) -> Response {
    match parse_body(&body).and_then(|v| teleop_from_value(&v).map_err(invalid)) {
        Ok(c) => submit(&h, c).await,
        Err(r) => r,
    }
}

async fn post_mission(State(h): State<ControlHandle>, body: Bytes) -> Response {
    match parse_body(&body).and_then(|v| mission_from_value(&v).map_err(invalid)) {
        Ok(m) => submit(&h, Command::StartMission(m)).await,
        Err(r) => r,
    }
}

async fn ws_telemetry(State(h): State<ControlHandle>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_telemetry(socket, h.subscribe()))
}

/// Sends every frame this subscriber manages to observe; frames published
/// while it was busy are skipped.
async fn stream_telemetry(mut socket: WebSocket, mut rx: watch::Receiver<Arc<Snapshot>>) {
    let mut sent_path_version = None;
    let mut last_stamp = f64::NEG_INFINITY;
    loop {
        let snap = rx.borrow_and_update().clone();
        if snap.frame.stamp > last_stamp {
            last_stamp = snap.frame.stamp;
            let mut frame = snap.frame.clone();
            if sent_path_version != Some(frame.path_version) {
                sent_path_version = Some(frame.path_version);
                frame.path = Some((*snap.path).clone());
            }
            let text = serde_json::to_string(&frame).expect("frame serializes");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        if rx.changed().await.is_err() {
            return;
        }
    }
}
