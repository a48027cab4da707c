use serde_json::{json, Map, Value};

use crate::io::{mission_from_value, serialize_mission, ValidationError};
use crate::nav::Mission;

/// Operator command, shared by the HTTP API and replay scripts.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    StartMapping,
    FinishMapping,
    StartMission(Mission),
    Pause,
    Resume,
    Abort,
    Teleop { v: f64, omega: f64 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::StartMapping => "start_mapping",
            Command::FinishMapping => "finish_mapping",
            Command::StartMission(_) => "start_mission",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Abort => "abort",
            Command::Teleop { .. } => "teleop",
        }
    }

    /// Decodes `{"type": ..., ...}`.
    pub fn from_value(value: &Value) -> Result<Command, ValidationError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ValidationError::single("command must be a JSON object"))?;
        let ty = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| ValidationError::single("command needs a string `type`"))?;
        let only = |allowed: &[&str]| -> Result<(), ValidationError> {
            let extra: Vec<String> = obj
                .keys()
                .filter(|k| k.as_str() != "type" && !allowed.contains(&k.as_str()))
                .map(|k| format!("{ty}: unknown field `{k}`"))
                .collect();
            if extra.is_empty() {
                Ok(())
            } else {
                Err(ValidationError::new(extra))
            }
        };
        match ty {
            "start_mapping" | "finish_mapping" | "pause" | "resume" | "abort" => {
                only(&[])?;
                Ok(match ty {
                    "start_mapping" => Command::StartMapping,
                    "finish_mapping" => Command::FinishMapping,
                    "pause" => Command::Pause,
                    "resume" => Command::Resume,
                    _ => Command::Abort,
                })
            }
            "teleop" => {
                only(&["v", "omega"])?;
                teleop_from_map(obj)
            }
            "start_mission" => {
                only(&["mission"])?;
                let m = obj
                    .get("mission")
                    .ok_or_else(|| ValidationError::single("start_mission needs `mission`"))?;
                Ok(Command::StartMission(mission_from_value(m)?))
            }
            other => Err(ValidationError::single(format!("unknown command type `{other}`"))),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Command::Teleop { v, omega } => json!({"type": "teleop", "v": v, "omega": omega}),
            Command::StartMission(m) => {
                let mission: Value = serde_json::from_str(&serialize_mission(m)).expect("canonical mission");
                json!({"type": "start_mission", "mission": mission})
            }
            other => json!({"type": other.name()}),
        }
    }
}

/// Decodes the teleop body `{"v": .., "omega": ..}`.
pub fn teleop_from_value(value: &Value) -> Result<Command, ValidationError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ValidationError::single("teleop must be a JSON object"))?;
    let extra: Vec<String> = obj
        .keys()
        .filter(|k| !["v", "omega"].contains(&k.as_str()))
        .map(|k| format!("teleop: unknown field `{k}`"))
        .collect();
    if !extra.is_empty() {
        return Err(ValidationError::new(extra));
    }
    teleop_from_map(obj)
}

fn teleop_from_map(obj: &Map<String, Value>) -> Result<Command, ValidationError> {
    let num = |k: &str| obj.get(k).and_then(Value::as_f64).filter(|x| x.is_finite());
    let mut errs = Vec::new();
    if num("v").is_none() {
        errs.push("teleop: `v` must be a finite number".to_string());
    }
    if num("omega").is_none() {
        errs.push("teleop: `omega` must be a finite number".to_string());
    }
    match (num("v"), num("omega")) {
        (Some(v), Some(omega)) => Ok(Command::Teleop { v, omega }),
        _ => Err(ValidationError::new(errs)),
    }
}
