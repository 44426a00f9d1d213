//! Hazard evolution: flood rise and redistribution, wind-driven fire spread,
//! transient obstacle perturbation and ground passability.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Cell, NEIGHBORS4, NEIGHBORS8};
use crate::scenario::{
    FireParams, FloodParams, GridSpec, HazardKind, HazardModel, HazardParams, ScenarioSpec,
    TerrainField, VehicleClass,
};

/// Downhill redistribution passes applied after each rainfall injection.
pub const RELAXATION_PASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FireState {
    Unburned,
    Burning,
    Burned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum GroupStatus {
    Waiting,
    Reached { tick: u32, time_s: f64, vehicle: usize },
    /// Cut off by the hazard before anyone got there.
    Lost { tick: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorState {
    pub cell: Cell,
    pub size: u32,
    pub status: GroupStatus,
}

impl SurvivorState {
    pub fn is_waiting(&self) -> bool {
        matches!(self.status, GroupStatus::Waiting)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub class: VehicleClass,
    pub cell: Cell,
    pub capacity: u32,
    pub load: i64,
    pub speed_kmh: f64,
}

/// The evolving world: hazard fields plus entity positions and stocks.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u32,
    pub grid: GridSpec,
    pub kind: HazardKind,
    pub terrain: Arc<TerrainField>,
    pub blockage_depth_m: f64,
    pub water_depth: Vec<f64>,
    pub fire: Vec<FireState>,
    pub burn_age: Vec<u32>,
    /// Transient obstacles drawn for the current tick.
    pub perturbed: Vec<bool>,
    ground_blocked: Vec<bool>,
    pub survivors: Vec<SurvivorState>,
    pub vehicles: Vec<VehicleState>,
    pub depot_stock: Vec<i64>,
}

impl WorldState {
    /// Initial state: dry ground, ignition cells burning, vehicles loaded from
    /// their start depots in roster order.
    pub fn new(spec: &ScenarioSpec) -> Self {
        let n = spec.grid.cell_count();
        let side = spec.grid.side_cells;
        let mut fire = vec![FireState::Unburned; n];
        if let HazardModel::Wildfire(p) = &spec.hazard.model {
            for c in &p.ignitions {
                fire[c.index(side)] = FireState::Burning;
            }
        }
        let mut depot_stock: Vec<i64> = spec.depots.iter().map(|d| d.stock).collect();
        let vehicles = spec
            .vehicles
            .iter()
            .map(|v| {
                let mut load = 0;
                if let Some(d) = spec.depots.iter().position(|d| d.cell == v.start) {
                    load = depot_stock[d].min(v.capacity as i64);
                    depot_stock[d] -= load;
                }
                VehicleState {
                    class: v.class,
                    cell: v.start,
                    capacity: v.capacity,
                    load,
                    speed_kmh: v.speed_kmh,
                }
            })
            .collect();
        let survivors = spec
            .survivors
            .iter()
            .map(|g| SurvivorState {
                cell: g.cell,
                size: g.size,
                status: GroupStatus::Waiting,
            })
            .collect();
        let mut world = WorldState {
            tick: 0,
            grid: spec.grid,
            kind: spec.hazard_kind(),
            terrain: Arc::new(spec.terrain.clone()),
            blockage_depth_m: spec.hazard.blockage_depth_m(),
            water_depth: vec![0.0; n],
            fire,
            burn_age: vec![0; n],
            perturbed: vec![false; n],
            ground_blocked: vec![false; n],
            survivors,
            vehicles,
            depot_stock,
        };
        world.refresh_blocked();
        world
    }

    pub fn side(&self) -> usize {
        self.grid.side_cells
    }

    /// Blocked by water or fire, ignoring transient perturbation.
    #[inline]
    pub fn hazard_blocked(&self, index: usize) -> bool {
        self.water_depth[index] > self.blockage_depth_m || self.fire[index] != FireState::Unburned
    }

    #[inline]
    pub fn ground_blocked(&self, index: usize) -> bool {
        self.ground_blocked[index]
    }

    pub fn ground_blocked_mask(&self) -> &[bool] {
        &self.ground_blocked
    }

    fn refresh_blocked(&mut self) {
        for i in 0..self.ground_blocked.len() {
            self.ground_blocked[i] = self.hazard_blocked(i) || self.perturbed[i];
        }
    }

    pub fn water_volume(&self) -> f64 {
        self.water_depth.iter().sum()
    }

    pub fn count_fire(&self, state: FireState) -> usize {
        self.fire.iter().filter(|&&s| s == state).count()
    }

    /// Per-cell hazard intensity in [0, 1] used by the sensors.
    pub fn hazard_intensity(&self) -> Vec<f64> {
        match self.kind {
            HazardKind::Flood => self
                .water_depth
                .iter()
                .map(|d| (d / self.blockage_depth_m).clamp(0.0, 1.0))
                .collect(),
            HazardKind::Wildfire => self
                .fire
                .iter()
                .map(|s| match s {
                    FireState::Unburned => 0.0,
                    FireState::Burning => 1.0,
                    FireState::Burned => 0.6,
                })
                .collect(),
        }
    }

    pub fn supply_on_vehicles(&self) -> i64 {
        self.vehicles.iter().map(|v| v.load).sum()
    }

    pub fn supply_in_depots(&self) -> i64 {
        self.depot_stock.iter().sum()
    }

    fn redraw_perturbation<R: Rng + ?Sized>(&mut self, rate: f64, rng: &mut R) {
        if rate <= 0.0 {
            self.perturbed.iter_mut().for_each(|p| *p = false);
            return;
        }
        for p in self.perturbed.iter_mut() {
            *p = rng.random_bool(rate);
        }
    }
}

/// Whether a vehicle of `class` may enter `cell` at the current tick.
pub fn passable(world: &WorldState, cell: Cell, class: VehicleClass) -> Result<bool> {
    cell.check(world.side())?;
    Ok(match class {
        VehicleClass::Drone => true,
        VehicleClass::Ground => !world.ground_blocked(cell.index(world.side())),
    })
}

/// Advances any hazard model by one tick.
pub fn step_hazard<R: Rng + ?Sized>(
    world: &WorldState,
    hazard: &HazardParams,
    rng: &mut R,
) -> WorldState {
    match &hazard.model {
        HazardModel::Flood(p) => step_flood(world, p, hazard.perturbation_rate, rng),
        HazardModel::Wildfire(p) => step_fire(world, p, hazard.perturbation_rate, rng),
    }
}

/// Rainfall on source cells, downhill relaxation, then blockage update.
pub fn step_flood<R: Rng + ?Sized>(
    world: &WorldState,
    params: &FloodParams,
    perturbation_rate: f64,
    rng: &mut R,
) -> WorldState {
    debug_assert_eq!(world.kind, HazardKind::Flood);
    let mut next = world.clone();
    next.tick += 1;
    let side = next.side();
    let inflow = params.rainfall_mm_per_tick / 1000.0;
    if inflow > 0.0 {
        for c in &params.sources {
            next.water_depth[c.index(side)] += inflow;
        }
    }
    for _ in 0..RELAXATION_PASSES {
        relax(&mut next.water_depth, &next.terrain.elevation, side);
    }
    next.blockage_depth_m = params.blockage_depth_m;
    next.redraw_perturbation(perturbation_rate, rng);
    next.refresh_blocked();
    next
}

/// One mass-conserving pass moving water toward lower water surfaces.
fn relax(depth: &mut [f64], elevation: &[f64], side: usize) {
    let before = depth.to_vec();
    let mut delta = vec![0.0; depth.len()];
    let mut lower = [(0usize, 0.0f64); 4];
    for i in 0..before.len() {
        let d = before[i];
        if d <= 0.0 {
            continue;
        }
        let surface = elevation[i] + d;
        let here = Cell::from_index(i, side);
        let mut count = 0;
        let mut total = 0.0;
        let mut steepest: f64 = 0.0;
        for &(dx, dy) in &NEIGHBORS4 {
            if let Some(n) = here.offset(dx, dy, side) {
                let j = n.index(side);
                let drop = surface - (elevation[j] + before[j]);
                if drop > 0.0 {
                    lower[count] = (j, drop);
                    count += 1;
                    total += drop;
                    steepest = steepest.max(drop);
                }
            }
        }
        if count == 0 {
            continue;
        }
        let out = d.min(steepest / 2.0);
        let mut moved = 0.0;
        for &(j, drop) in &lower[..count - 1] {
            let share = out * drop / total;
            delta[j] += share;
            moved += share;
        }
        // Last receiver takes the remainder so the pass conserves mass exactly.
        delta[lower[count - 1].0] += out - moved;
        delta[i] -= out;
    }
    for (d, dd) in depth.iter_mut().zip(&delta) {
        *d = (*d + dd).max(0.0);
    }
}

/// Directional ignition multiplier, clamped to [0, 2].
pub fn wind_alignment(params: &FireParams, dx: i32, dy: i32) -> f64 {
    let theta = params.wind.direction_deg.to_radians();
    let len = ((dx * dx + dy * dy) as f64).sqrt();
    let cos = (dx as f64 * theta.cos() + dy as f64 * theta.sin()) / len;
    (1.0 + params.wind.speed * cos).clamp(0.0, 2.0)
}

/// Stochastic 8-neighbour fire spread followed by burn-out ageing.
pub fn step_fire<R: Rng + ?Sized>(
    world: &WorldState,
    params: &FireParams,
    perturbation_rate: f64,
    rng: &mut R,
) -> WorldState {
    debug_assert_eq!(world.kind, HazardKind::Wildfire);
    let mut next = world.clone();
    next.tick += 1;
    let side = next.side();
    let factors: Vec<f64> = NEIGHBORS8
        .iter()
        .map(|&(dx, dy)| wind_alignment(params, dx, dy))
        .collect();

    for i in 0..world.fire.len() {
        if world.fire[i] != FireState::Burning {
            continue;
        }
        let here = Cell::from_index(i, side);
        for (k, &(dx, dy)) in NEIGHBORS8.iter().enumerate() {
            let Some(n) = here.offset(dx, dy, side) else {
                continue;
            };
            let j = n.index(side);
            if world.fire[j] != FireState::Unburned || next.fire[j] != FireState::Unburned {
                continue;
            }
            let p = (params.spread_probability * next.terrain.fuel[j] * factors[k]).clamp(0.0, 1.0);
            if p > 0.0 && rng.random::<f64>() < p {
                next.fire[j] = FireState::Burning;
                next.burn_age[j] = 0;
            }
        }
    }
    for i in 0..world.fire.len() {
        if world.fire[i] == FireState::Burning {
            next.burn_age[i] = world.burn_age[i] + 1;
            if next.burn_age[i] >= params.burn_ticks {
                next.fire[i] = FireState::Burned;
            }
        }
    }
    next.redraw_perturbation(perturbation_rate, rng);
    next.refresh_blocked();
    next
}
