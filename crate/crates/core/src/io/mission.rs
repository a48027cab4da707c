//! Mission JSON codec.
//!
//! Canonical form: keys in the order version, frame, mode, waypoints, region
//! (region omitted when absent), shortest round-trip decimals, no whitespace.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::geometry::{GridMeta, Rect};
use crate::io::ValidationError;
use crate::nav::{Mission, MissionMode, Waypoint};

pub const MISSION_VERSION: u32 = 1;
pub const MISSION_FRAME: &str = "map";

#[derive(Serialize)]
struct Wire<'a> {
    version: u32,
    frame: &'a str,
    mode: MissionMode,
    waypoints: &'a [Waypoint],
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<Rect>,
}

pub fn serialize_mission(m: &Mission) -> String {
    let wire = Wire {
        version: m.version,
        frame: &m.frame,
        mode: m.mode,
        waypoints: &m.waypoints,
        region: m.region,
    };
    serde_json::to_string(&wire).expect("mission serializes")
}

pub fn parse_mission(text: &str) -> Result<Mission, ValidationError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ValidationError::single(format!("mission is not valid JSON: {e}")))?;
    mission_from_value(&value)
}

fn finite(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], what: &str, errs: &mut Vec<String>) {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(format!("{what}: unknown field `{key}`"));
        }
    }
}

/// Validates a decoded JSON value as a mission, collecting every violation.
pub fn mission_from_value(value: &Value) -> Result<Mission, ValidationError> {
    let mut errs = Vec::new();
    let Some(obj) = value.as_object() else {
        return Err(ValidationError::single("mission must be a JSON object"));
    };
    check_keys(obj, &["version", "frame", "mode", "waypoints", "region"], "mission", &mut errs);

    match obj.get("version") {
        None => errs.push("missing field `version`".into()),
        Some(v) if v.as_u64() == Some(MISSION_VERSION as u64) => {}
        Some(v) => errs.push(format!("unsupported version {v}")),
    }
    match obj.get("frame") {
        None => errs.push("missing field `frame`".into()),
        Some(Value::String(s)) if s == MISSION_FRAME => {}
        Some(v) => errs.push(format!("frame must be \"map\", got {v}")),
    }
    let mode = match obj.get("mode").map(|v| v.as_str()) {
        None => {
            errs.push("missing field `mode`".into());
            None
        }
        Some(Some("waypoints")) => Some(MissionMode::Waypoints),
        Some(Some("coverage")) => Some(MissionMode::Coverage),
        Some(_) => {
            errs.push(format!("mode must be \"waypoints\" or \"coverage\", got {}", obj["mode"]));
            None
        }
    };

    let mut waypoints = Vec::new();
    match obj.get("waypoints") {
        None if mode == Some(MissionMode::Coverage) => {}
        None => errs.push("missing field `waypoints`".into()),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let Some(wp) = item.as_object() else {
                    errs.push(format!("waypoint {i} must be an object"));
                    continue;
                };
                check_keys(wp, &["x", "y"], &format!("waypoint {i}"), &mut errs);
                let x = wp.get("x").and_then(finite);
                let y = wp.get("y").and_then(finite);
                if x.is_none() {
                    errs.push(format!("waypoint {i}: `x` must be a finite number"));
                }
                if y.is_none() {
                    errs.push(format!("waypoint {i}: `y` must be a finite number"));
                }
                if let (Some(x), Some(y)) = (x, y) {
                    waypoints.push(Waypoint { x, y });
                }
            }
        }
        Some(_) => errs.push("waypoints must be an array".into()),
    }

    let mut region = None;
    if let Some(r) = obj.get("region") {
        match r.as_object() {
            None => errs.push("region must be an object".into()),
            Some(ro) => {
                check_keys(ro, &["xmin", "ymin", "xmax", "ymax"], "region", &mut errs);
                let get = |k: &str| ro.get(k).and_then(finite);
                let vals = ["xmin", "ymin", "xmax", "ymax"].map(|k| (k, get(k)));
                for (k, v) in &vals {
                    if v.is_none() {
                        errs.push(format!("region: `{k}` must be a finite number"));
                    }
                }
                if let [(_, Some(xmin)), (_, Some(ymin)), (_, Some(xmax)), (_, Some(ymax))] = vals {
                    let rect = Rect::new(xmin, ymin, xmax, ymax);
                    if rect.is_valid() {
                        region = Some(rect);
                    } else {
                        errs.push("region must have xmin < xmax and ymin < ymax".into());
                    }
                }
            }
        }
    }

    match mode {
        Some(MissionMode::Waypoints) => {
            if matches!(obj.get("waypoints"), Some(Value::Array(a)) if a.is_empty()) {
                errs.push("waypoints must be non-empty".into());
            }
            if obj.contains_key("region") {
                errs.push("region is only allowed in coverage mode".into());
            }
        }
        Some(MissionMode::Coverage) => {
            if matches!(obj.get("waypoints"), Some(Value::Array(a)) if !a.is_empty()) {
                errs.push("waypoints must be empty in coverage mode".into());
            }
        }
        None => {}
    }

    if !errs.is_empty() {
        return Err(ValidationError::new(errs));
    }
    Ok(Mission {
        version: MISSION_VERSION,
        frame: MISSION_FRAME.into(),
        mode: mode.expect("validated"),
        waypoints,
        region,
    })
}

/// Checks a mission against a map extent. Coverage missions without a region
/// get the full extent.
pub fn bind_mission(m: &Mission, meta: &GridMeta) -> Result<Mission, ValidationError> {
    let mut errs = Vec::new();
    for (i, wp) in m.waypoints.iter().enumerate() {
        if !meta.contains_point(wp.x, wp.y) {
            errs.push(format!("waypoint {i} ({}, {}) lies outside the map extent", wp.x, wp.y));
        }
    }
    let extent = Rect::new(meta.origin_x, meta.origin_y, meta.x_max(), meta.y_max());
    if let Some(r) = &m.region {
        if !extent.contains_rect(r) {
            errs.push("region extends outside the map extent".into());
        }
    }
    if !errs.is_empty() {
        return Err(ValidationError::new(errs));
    }
    let mut bound = m.clone();
    if bound.mode == MissionMode::Coverage && bound.region.is_none() {
        bound.region = Some(extent);
    }
    Ok(bound)
}
