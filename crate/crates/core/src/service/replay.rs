use serde_json::Value;
use thiserror::Error;

use crate::geometry::Pose2D;
use crate::io::{LoadedScenario, ValidationError};
use crate::service::{Command, Event, Mode, Rejection, RunMetrics, Service, ServiceConfig, TelemetryFrame};

/// Ticks allowed after the last script entry before a run is declared stuck.
pub const MAX_TRAILING_TICKS: u64 = 500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub tick: u64,
    pub command: Command,
}

/// Parses `[{"tick": N, "command": {...}}, ...]`; ticks must not decrease.
pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, ValidationError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ValidationError::single(format!("script is not valid JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| ValidationError::single("script must be a JSON array"))?;
    let mut errs = Vec::new();
    let mut out = Vec::with_capacity(items.len());
    let mut last_tick = 0;
    for (i, item) in items.iter().enumerate() {
        let Some(obj) = item.as_object() else {
            errs.push(format!("entry {i} must be an object"));
            continue;
        };
        for k in obj.keys() {
            if k != "tick" && k != "command" {
                errs.push(format!("entry {i}: unknown field `{k}`"));
            }
        }
        let tick = obj.get("tick").and_then(Value::as_u64);
        match tick {
            None => errs.push(format!("entry {i}: `tick` must be a nonnegative integer")),
            Some(t) if t < last_tick => errs.push(format!("entry {i}: tick {t} is before tick {last_tick}")),
            Some(t) => last_tick = t,
        }
        let command = match obj.get("command") {
            None => {
                errs.push(format!("entry {i}: missing `command`"));
                None
            }
            Some(c) => match Command::from_value(c) {
                Ok(c) => Some(c),
                Err(e) => {
                    errs.extend(e.violations.into_iter().map(|v| format!("entry {i}: {v}")));
                    None
                }
            },
        };
        if let (Some(tick), Some(command)) = (tick, command) {
            out.push(ScriptEntry { tick, command });
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(ValidationError::new(errs))
    }
}

pub fn script_to_json(script: &[ScriptEntry]) -> String {
    let items: Vec<Value> = script
        .iter()
        .map(|e| serde_json::json!({"tick": e.tick, "command": e.command.to_value()}))
        .collect();
    serde_json::to_string_pretty(&items).expect("script serializes")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("tick {tick}: {command} rejected ({rejection})")]
    Rejected {
        tick: u64,
        command: &'static str,
        rejection: Rejection,
    },
    #[error("run still executing {MAX_TRAILING_TICKS} ticks after the last script entry (tick {tick})")]
    Stuck { tick: u64 },
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub metrics: RunMetrics,
    pub mode: Mode,
    pub true_pose: Pose2D,
    pub estimate: Pose2D,
    pub events: Vec<Event>,
    pub frames: Vec<TelemetryFrame>,
}

/// Drives a [`Service`] from a script, one tick at a time.
pub struct Replayer {
    service: Service,
    script: Vec<ScriptEntry>,
    next: usize,
}

impl Replayer {
    pub fn new(scenario: &LoadedScenario, script: Vec<ScriptEntry>, seed: u64) -> Self {
        Self::with_service(Service::new(scenario, seed), script)
    }

    pub fn with_config(scenario: &LoadedScenario, script: Vec<ScriptEntry>, seed: u64, config: ServiceConfig) -> Self {
        Self::with_service(Service::with_config(scenario, seed, config), script)
    }

    fn with_service(service: Service, script: Vec<ScriptEntry>) -> Self {
        Self {
            service,
            script,
            next: 0,
        }
    }

    pub fn service(&self) -> &Service {
        &self.service
    }

    /// Applies every entry due at the current tick. Returns whether the run
    /// is over: script consumed and no mission executing.
    pub fn apply_due(&mut self) -> Result<bool, ReplayError> {
        let tick = self.service.sim().clock.tick;
        while let Some(e) = self.script.get(self.next).filter(|e| e.tick <= tick) {
            self.service
                .handle_command(&e.command)
                .map_err(|rejection| ReplayError::Rejected {
                    tick: e.tick,
                    command: e.command.name(),
                    rejection,
                })?;
            self.next += 1;
        }
        Ok(self.next == self.script.len() && self.service.mode() != Mode::Executing)
    }

    /// One control tick, after applying due commands. `Ok(None)` once done.
    pub fn step(&mut self) -> Result<Option<Option<TelemetryFrame>>, ReplayError> {
        if self.apply_due()? {
            return Ok(None);
        }
        let last = self.script.last().map_or(0, |e| e.tick);
        let tick = self.service.sim().clock.tick;
        if tick > last + MAX_TRAILING_TICKS {
            return Err(ReplayError::Stuck { tick });
        }
        Ok(Some(self.service.control_tick()))
    }

    pub fn run(mut self) -> Result<ReplayOutcome, ReplayError> {
        let mut frames = Vec::new();
        while let Some(frame) = self.step()? {
            frames.extend(frame);
        }
        let s = &self.service;
        Ok(ReplayOutcome {
            metrics: s.metrics(),
            mode: s.mode(),
            true_pose: s.sim().state.pose,
            estimate: s.estimate(),
            events: s.events().to_vec(),
            frames,
        })
    }
}

pub fn run_replay(scenario: &LoadedScenario, script: Vec<ScriptEntry>, seed: u64) -> Result<ReplayOutcome, ReplayError> {
    Replayer::new(scenario, script, seed).run()
}
