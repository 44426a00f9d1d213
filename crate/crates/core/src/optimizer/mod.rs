//! Dispatch planning: the decision problem, its random-key encoding, the
//! severity-weighted objective, and three planners over it (particle swarm,
//! simulated annealing, greedy).

mod anneal;
mod decode;
mod greedy;
mod pso;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::router::{travel_times, CostMap};
use crate::scenario::VehicleClass;

pub use anneal::{accepts, sa_optimize, SaConfig};
pub use decode::{decode_particle, fitness, Evaluator};
pub use greedy::greedy_plan;
pub use pso::{pso_optimize, pso_optimize_seeded, pso_step, update_particle, Particle, SwarmConfig};

/// A vehicle whose largest zone key falls below this stays in reserve.
pub const IDLE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    pub time: f64,
    pub coverage: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            time: 0.5,
            coverage: 0.5,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        if self.time < 0.0 || self.coverage < 0.0 {
            return Err(Error::config("weights", "must be non-negative"));
        }
        if ((self.time + self.coverage) - 1.0).abs() > 1e-9 {
            return Err(Error::config("weights", "time + coverage must equal 1"));
        }
        Ok(())
    }
}

/// A survivor sighting the planner may route to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanTarget {
    pub cell: Cell,
    pub survivors: u32,
}

/// A zone as seen by the planner; its targets are the contiguous index
/// range `first_target..first_target + target_count` of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanZone {
    pub id: usize,
    pub severity: f64,
    pub centroid: Cell,
    pub first_target: usize,
    pub target_count: usize,
    pub survivors: u64,
}

impl PlanZone {
    pub fn targets(&self) -> std::ops::Range<usize> {
        self.first_target..self.first_target + self.target_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanVehicle {
    pub class: VehicleClass,
    pub cell: Cell,
    pub load: i64,
}

/// Input for building a [`DecisionProblem`]: one entry per zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneInput {
    pub id: usize,
    pub severity: f64,
    pub centroid: Cell,
    pub targets: Vec<PlanTarget>,
}

/// Everything a planner needs at one decision instant, with travel times
/// precomputed on the frozen cost maps.
#[derive(Debug, Clone)]
pub struct DecisionProblem {
    pub zones: Vec<PlanZone>,
    pub targets: Vec<PlanTarget>,
    pub vehicles: Vec<PlanVehicle>,
    pub ground_costs: CostMap,
    pub drone_costs: CostMap,
    pub horizon_s: f64,
    pub supply_available: i64,
    /// `vehicles × targets` travel times from each vehicle's position.
    vehicle_times: Vec<f64>,
    /// Per zone, `[ground, drone]` row-major target-to-target tables.
    zone_tables: Vec<[Vec<f64>; 2]>,
    /// `vehicles × zones`: some target of the zone is reachable.
    reachable: Vec<bool>,
}

fn class_slot(class: VehicleClass) -> usize {
    match class {
        VehicleClass::Ground => 0,
        VehicleClass::Drone => 1,
    }
}

impl DecisionProblem {
    pub fn new(
        zones: Vec<ZoneInput>,
        vehicles: Vec<PlanVehicle>,
        ground_costs: CostMap,
        drone_costs: CostMap,
        horizon_s: f64,
        supply_available: i64,
    ) -> Result<Self> {
        if horizon_s.is_nan() || horizon_s <= 0.0 {
            return Err(Error::Contract("planning horizon must be positive".into()));
        }
        let side = ground_costs.side();
        if drone_costs.side() != side {
            return Err(Error::Contract("cost maps differ in size".into()));
        }
        for v in &vehicles {
            v.cell.check(side)?;
        }
        let mut targets = Vec::new();
        let mut plan_zones = Vec::with_capacity(zones.len());
        for z in zones {
            if !(z.severity > 0.0 && z.severity.is_finite()) {
                return Err(Error::Contract(format!("zone {} has non-positive severity", z.id)));
            }
            for t in &z.targets {
                t.cell.check(side)?;
            }
            let first = targets.len();
            plan_zones.push(PlanZone {
                id: z.id,
                severity: z.severity,
                centroid: z.centroid,
                first_target: first,
                target_count: z.targets.len(),
                survivors: z.targets.iter().map(|t| t.survivors as u64).sum(),
            });
            targets.extend(z.targets);
        }

        let cells: Vec<Cell> = targets.iter().map(|t| t.cell).collect();
        let costs_for = |class| match class {
            VehicleClass::Ground => &ground_costs,
            VehicleClass::Drone => &drone_costs,
        };
        let mut vehicle_times = Vec::with_capacity(vehicles.len() * targets.len());
        for v in &vehicles {
            vehicle_times.extend(travel_times(costs_for(v.class), v.cell, &cells));
        }

        let classes: Vec<VehicleClass> = [VehicleClass::Ground, VehicleClass::Drone]
            .into_iter()
            .filter(|c| vehicles.iter().any(|v| v.class == *c))
            .collect();
        let mut zone_tables = Vec::with_capacity(plan_zones.len());
        for z in &plan_zones {
            let zc = &cells[z.targets()];
            let mut tables: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for &class in &classes {
                let mut memo: HashMap<Cell, Vec<f64>> = HashMap::new();
                let mut table = Vec::with_capacity(zc.len() * zc.len());
                for &from in zc {
                    let row = memo
                        .entry(from)
                        .or_insert_with(|| travel_times(costs_for(class), from, zc));
                    table.extend_from_slice(row);
                }
                tables[class_slot(class)] = table;
            }
            zone_tables.push(tables);
        }

        let t_count = targets.len();
        let mut reachable = Vec::with_capacity(vehicles.len() * plan_zones.len());
        for vi in 0..vehicles.len() {
            let row = &vehicle_times[vi * t_count..(vi + 1) * t_count];
            for z in &plan_zones {
                reachable.push(row[z.targets()].iter().any(|t| t.is_finite()));
            }
        }

        Ok(DecisionProblem {
            zones: plan_zones,
            targets,
            vehicles,
            ground_costs,
            drone_costs,
            horizon_s,
            supply_available,
            vehicle_times,
            zone_tables,
            reachable,
        })
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    /// Encoding length: one key per (vehicle, zone) plus one supply key per zone.
    pub fn dimension(&self) -> usize {
        let k = self.zones.len();
        self.vehicles.len() * k + k
    }

    /// Travel time from vehicle `v`'s position to target `t`.
    #[inline]
    pub fn vehicle_time(&self, v: usize, t: usize) -> f64 {
        self.vehicle_times[v * self.targets.len() + t]
    }

    /// Travel time between two targets of zone `z` for a vehicle class.
    #[inline]
    pub fn target_time(&self, z: usize, class: VehicleClass, from: usize, to: usize) -> f64 {
        let zone = &self.zones[z];
        let n = zone.target_count;
        self.zone_tables[z][class_slot(class)]
            [(from - zone.first_target) * n + (to - zone.first_target)]
    }

    #[inline]
    pub fn can_reach(&self, v: usize, z: usize) -> bool {
        self.reachable[v * self.zones.len() + z]
    }

    pub fn total_weighted_survivors(&self) -> f64 {
        self.zones
            .iter()
            .map(|z| z.severity * z.survivors as f64)
            .sum()
    }

    /// Random-key vector that decodes to `assignment` with the given shares.
    pub fn encode(&self, assignment: &[Option<usize>], supply_share: &[f64]) -> Vec<f64> {
        let k = self.zones.len();
        let mut x = vec![0.0; self.dimension()];
        for (v, a) in assignment.iter().enumerate().take(self.vehicles.len()) {
            if let Some(z) = a {
                if *z < k {
                    x[v * k + z] = 1.0;
                }
            }
        }
        let base = self.vehicles.len() * k;
        for z in 0..k {
            x[base + z] = supply_share.get(z).copied().unwrap_or(0.5).clamp(0.0, 1.0);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteStop {
    pub target: usize,
    /// Predicted arrival on the frozen cost maps.
    pub arrival_s: f64,
}

/// A decoded dispatch plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Zone index per vehicle, `None` for idle.
    pub assignment: Vec<Option<usize>>,
    /// Fraction of available supply earmarked per zone; sums to at most 1.
    pub supply_share: Vec<f64>,
    /// Per-vehicle ordered stops within its zone.
    pub routes: Vec<Vec<RouteStop>>,
}

impl Plan {
    pub fn idle(vehicles: usize, zones: usize) -> Self {
        Plan {
            assignment: vec![None; vehicles],
            supply_share: vec![0.0; zones],
            routes: vec![Vec::new(); vehicles],
        }
    }

    pub fn active_vehicles(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }
}

/// A plan together with the search record that produced it.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub score: f64,
    /// Best-so-far objective; for the swarm one entry per iteration plus the
    /// initial one, for annealing one per evaluation.
    pub trace: Vec<f64>,
    pub best_position: Vec<f64>,
}
