//! Occupancy grid, A* agent and navigability repair.

pub mod agent;
pub mod astar;
pub mod grid;
pub mod repair;

pub use agent::{path_time, rerun_validation, simulate_objectives, traversal_time, AgentParams, SimError};
pub use astar::{astar_path, Passability};
pub use grid::{build_nav_grid, CellId, CellKind, NavGrid};
pub use repair::{agent_repair, flood_fill_room, geometric_repair, RepairReport, RepairStatus};
