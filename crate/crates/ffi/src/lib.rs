//! C interface to the rover stack.
//!
//! Sessions are opaque handles owning a mission service. Every call returns a
//! [`RoverStatus`]; on failure [`rover_last_error`] describes what went wrong.
//! Strings handed out by the library must be released with
//! [`rover_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rover_core::geometry::Pose2D;
use rover_core::io::{bind_mission, load_scenario, parse_mission, ValidationError};
use rover_core::nav::{compile_mission, inflate_costmap};
use rover_core::service::{map_from_json, map_to_json, Command, Rejection, Service};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoverStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Planning = 4,
    Rejected = 5,
    Panic = 6,
}

/// Opaque session: one simulated rover plus its mission service.
pub struct RoverSession {
    service: Service,
}

struct Failure(RoverStatus, String);

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        Failure(RoverStatus::Validation, e.to_string())
    }
}

impl From<Rejection> for Failure {
    fn from(r: Rejection) -> Self {
        let status = if r.is_planning() {
            RoverStatus::Planning
        } else if r.code == "validation" {
            RoverStatus::Validation
        } else {
            RoverStatus::Rejected
        };
        Failure(status, r.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RoverStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RoverStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal error: {msg}"));
            RoverStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RoverStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(RoverStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn live<'a>(p: *mut RoverSession) -> Result<&'a mut RoverSession, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(RoverStatus::NullArgument, "session is null".into()))
}

unsafe fn hand_out(out: *mut *mut c_char, value: &serde_json::Value) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(RoverStatus::NullArgument, "output pointer is null".into()));
    }
    let s = CString::new(value.to_string()).expect("JSON has no nul bytes");
    *out = s.into_raw();
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rover_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rover_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rover_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a session from scenario JSON. On success `*out` receives the
/// handle, to be released with [`rover_session_free`].
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rover_session_new(
    scenario_json: *const c_char,
    seed: u64,
    out: *mut *mut RoverSession,
) -> RoverStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(RoverStatus::NullArgument, "output pointer is null".into()));
        }
        let scenario = load_scenario(text(scenario_json, "scenario_json")?)?;
        let s = Box::new(RoverSession {
            service: Service::new(&scenario, seed),
        });
        *out = Box::into_raw(s);
        Ok(())
    })
}

/// # Safety
/// `session` must be NULL or a handle from [`rover_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rover_session_free(session: *mut RoverSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Applies a command such as `{"type":"start_mapping"}` or
/// `{"type":"start_mission","mission":{...}}`. A rejected command leaves the
/// session unchanged.
///
/// # Safety
/// `session` must be a live handle; `command_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rover_session_command(session: *mut RoverSession, command_json: *const c_char) -> RoverStatus {
    guard(|| {
        let s = live(session)?;
        let value: serde_json::Value = serde_json::from_str(text(command_json, "command_json")?)
            .map_err(|e| Failure(RoverStatus::Validation, format!("command is not valid JSON: {e}")))?;
        let cmd = Command::from_value(&value)?;
        s.service.handle_command(&cmd)?;
        Ok(())
    })
}

/// Advances the session by `ticks` control ticks.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rover_session_step(session: *mut RoverSession, ticks: u64) -> RoverStatus {
    guard(|| {
        let s = live(session)?;
        for _ in 0..ticks {
            s.service.control_tick();
        }
        Ok(())
    })
}

/// Current telemetry frame as JSON. The path is included only when it
/// changed since the previous telemetry call.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rover_session_telemetry(session: *mut RoverSession, out: *mut *mut c_char) -> RoverStatus {
    guard(|| {
        let s = live(session)?;
        hand_out(out, &json(&s.service.snapshot_telemetry()))
    })
}

/// Run metrics so far as JSON.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rover_session_metrics(session: *mut RoverSession, out: *mut *mut c_char) -> RoverStatus {
    guard(|| {
        let s = live(session)?;
        hand_out(out, &json(&s.service.metrics()))
    })
}

/// Current map (live while mapping, frozen afterwards) as run-length
/// encoded JSON. Fails with `ROVER_STATUS_REJECTED` before mapping starts.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rover_session_map(session: *mut RoverSession, out: *mut *mut c_char) -> RoverStatus {
    guard(|| {
        let s = live(session)?;
        let grid = s
            .service
            .display_map()
            .ok_or_else(|| Failure(RoverStatus::Rejected, "no map has been recorded yet".into()))?;
        hand_out(out, &map_to_json(&grid, s.service.map_version()))
    })
}

/// Plans `mission_json` on a map in the JSON form produced by
/// [`rover_session_map`], starting at (`start_x`, `start_y`). `*out`
/// receives `{"cost": .., "points": [[x, y], ..]}`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rover_plan(
    map_json: *const c_char,
    mission_json: *const c_char,
    start_x: f64,
    start_y: f64,
    robot_radius: f64,
    safety_margin: f64,
    lane_width: f64,
    out: *mut *mut c_char,
) -> RoverStatus {
    guard(|| {
        let map: serde_json::Value = serde_json::from_str(text(map_json, "map_json")?)
            .map_err(|e| Failure(RoverStatus::Validation, format!("map is not valid JSON: {e}")))?;
        let grid = map_from_json(&map)?;
        let mission = bind_mission(&parse_mission(text(mission_json, "mission_json")?)?, &grid.meta)?;
        let start = Pose2D::new(start_x, start_y, 0.0).map_err(|e| Failure(RoverStatus::Validation, e.to_string()))?;
        if !(robot_radius >= 0.0 && safety_margin >= 0.0 && lane_width > 0.0) {
            return Err(Failure(
                RoverStatus::Validation,
                "robot_radius and safety_margin must be nonnegative, lane_width positive".into(),
            ));
        }
        let cmap = inflate_costmap(&grid, robot_radius, safety_margin);
        let path = compile_mission(&cmap, &start, &mission, lane_width)
            .map_err(|e| Failure(RoverStatus::Planning, format!("{}: {e}", e.code())))?;
        hand_out(out, &serde_json::json!({"cost": path.cost, "points": path.points}))
    })
}
