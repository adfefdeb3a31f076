//! Recursive Rosette satellite constellations: construction, addressing,
//! ground cells, routing and emulation.
//!
//! Units: radians, kilometres and seconds throughout. Degrees only appear
//! at the CLI and config-file boundary.

pub mod addressing;
pub mod constellation;
pub mod error;
pub mod geocell;
pub mod geom;
pub mod georouting;
pub mod oracle;
pub mod planner;
pub mod routing;
pub mod sim;
pub mod verify;

pub use addressing::{decode, encode, Address, BitLayout, GroundAddress};
pub use constellation::{
    build, ConfigDocument, ConstellationConfig, Direction, Edge, SatAddress, Topology,
};
pub use error::{Error, Result};
pub use geocell::{Alpha0Table, CellGrid, CellId, CellSystem, GeoCoord};
pub use geom::{LatLon, OrbitalElements, PhysicalConstants, UnitVec3};
pub use georouting::{GeoRouteResult, GeoRouter, HopMotion};
pub use planner::{select_size, SizePlan, SizeRequest};
pub use routing::{DisjointPaths, Fib, FibAction, Path};
pub use sim::{Scenario, ScenarioDocument, Summary, TraceRecord};
