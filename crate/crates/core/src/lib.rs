//! Tank-cleaning rover stack: a deterministic planar tank simulator,
//! occupancy-grid SLAM, grid path and coverage planning, map/mission file
//! codecs, and the mission service that ties them into a control loop.

pub mod geometry;
pub mod io;
pub mod rng;
pub mod sim;
pub mod slam;
pub mod nav;
pub mod service;
