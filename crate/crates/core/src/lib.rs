//! Energy-aware path planning for a robot that can both drive and fly.
//!
//! The pipeline runs over a 2.5D elevation grid: per-cell height fusion,
//! slope/step traversability, a multimodal costmap, a 3D A* that tags each
//! waypoint ground or aerial, per-mode path pruning, energy accounting against
//! a pure-flight baseline, and a stepped kinematic executor.

pub mod costmap;
pub mod energy;
pub mod error;
pub mod executor;
pub mod grid;
pub mod perception;
pub mod planner;
pub mod postprocess;
pub mod render;
pub mod scenario;

pub use costmap::{generate_costmap, CostmapParams, ModalCostmap};
pub use energy::{drone_baseline, plan_metrics, EnergyModel, PlanMetrics};
pub use error::{Error, Result};
pub use executor::{execute, ExecutorParams, TraceEvent};
pub use grid::{Cell, ElevationGrid, GridMeta, GridText};
pub use perception::{compute_traversability, TraversabilityGrid, TraversabilityParams};
pub use planner::{plan, ModalPath, ModalWaypoint, Mode, PlannerParams};
pub use postprocess::{clear_edge, postprocess};
pub use scenario::{run_scenario, ScenarioConfig, ScenarioReport};
