//! Persistence and interchange: map files, mission JSON, scenarios.

mod mapfile;
mod mission;
mod scenario;

pub use mapfile::{
    export_map, import_map, read_map_files, write_map_files, MapFilePair, MapFormatError, PIXEL_FREE,
    PIXEL_OCCUPIED, PIXEL_UNKNOWN,
};
pub use mission::{bind_mission, mission_from_value, parse_mission, serialize_mission, MISSION_FRAME, MISSION_VERSION};
pub use scenario::{
    load_scenario, map_meta_for, parse_scenario, DebrisSpec, LoadedScenario, RoverSpec, Scenario, StartPose,
    MAP_MARGIN_CELLS,
};

use thiserror::Error;

/// One or more schema or semantic violations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .violations.join("; "))]
pub struct ValidationError {
    pub violations: Vec<String>,
}

impl ValidationError {
    pub fn new(violations: Vec<String>) -> Self {
        Self { violations }
    }

    pub fn single(v: impl Into<String>) -> Self {
        Self {
            violations: vec![v.into()],
        }
    }
}
