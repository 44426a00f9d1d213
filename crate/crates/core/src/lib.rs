//! Closed-loop disaster-response simulation and planning.
//!
//! A scenario (terrain, hazard, survivors, fleet) is simulated tick by tick.
//! Each tick a noisy sensor observation is turned into a priority map and
//! priority zones, a planner assigns vehicles and supplies to zones, and the
//! fleet moves along grid shortest paths while a flood or wildfire evolves.

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod grid;
pub mod harness;
pub mod optimizer;
pub mod perception;
pub mod router;
pub mod scenario;

pub use dynamics::{step_hazard, FireState, GroupStatus, WorldState};
pub use engine::{compute_metrics, run_episode, EngineConfig, EpisodeLog, MetricsRecord, Policy};
pub use error::{Error, Result};
pub use grid::Cell;
pub use optimizer::{DecisionProblem, ObjectiveWeights, Plan, SaConfig, SwarmConfig};
pub use perception::{PriorityMap, PriorityParams, SensorParams, Zone, ZoneParams};
pub use router::{shortest_path, CostMap, Path};
pub use scenario::{generate_scenario, HazardKind, Preset, PresetParams, ScenarioSpec, VehicleClass};
pub use harness::{run_benchmark, scalability_test, sensitivity_sweep, BenchConfig, SummaryTable};
