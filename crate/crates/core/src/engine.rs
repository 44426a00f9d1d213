//! The closed loop: observe, derive priorities and zones, plan, move the
//! fleet for one tick, advance the hazard, and log everything.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_hazard, GroupStatus, WorldState};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::optimizer::{
    greedy_plan, pso_optimize_seeded, sa_optimize, DecisionProblem, ObjectiveWeights, Plan,
    PlanTarget, PlanVehicle, SaConfig, SwarmConfig, ZoneInput,
};
use crate::perception::{
    attach_detections, extract_priority_map, observe, segment_zones, Detection, Observation,
    PriorityMap, PriorityParams, SensorParams, Zone, ZoneParams,
};
use crate::router::{shortest_path, CostMap};
use crate::scenario::{HazardKind, ScenarioSpec, VehicleClass, TICK_SECONDS};

/// Survivors served by one supply unit.
pub const SURVIVORS_PER_UNIT: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Priority zones planned by the particle swarm.
    Hybrid,
    /// Priority zones dispatched greedily by severity.
    PerceptionOnly,
    /// Particle swarm on raw detections: no priority map, uniform severity,
    /// block-quantised survivor positions.
    PsoOnly,
    /// Priority zones planned by simulated annealing at the swarm's budget.
    SimulatedAnnealing,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::Hybrid,
        Policy::PsoOnly,
        Policy::PerceptionOnly,
        Policy::SimulatedAnnealing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Hybrid => "hybrid",
            Policy::PerceptionOnly => "perception_only",
            Policy::PsoOnly => "pso_only",
            Policy::SimulatedAnnealing => "simulated_annealing",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Policy::Hybrid),
            "perception_only" | "cnn_only" => Ok(Policy::PerceptionOnly),
            "pso_only" => Ok(Policy::PsoOnly),
            "simulated_annealing" | "sa" => Ok(Policy::SimulatedAnnealing),
            other => Err(Error::config("policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub policy: Policy,
    pub horizon_ticks: u32,
    pub replan_interval_ticks: u32,
    /// Lookahead of the plan objective, capped by the ticks remaining;
    /// `None` plans over the whole remaining mission.
    pub planning_horizon_ticks: Option<u32>,
    pub swarm: SwarmConfig,
    /// Annealing schedule; its budget is always matched to the swarm's.
    pub sa: SaConfig,
    pub sensor: SensorParams,
    pub priority: PriorityParams,
    pub zones: ZoneParams,
    pub weights: ObjectiveWeights,
    /// Block edge, in cells, for the position quantisation of `pso_only`.
    pub quantization_cells: u32,
    /// Seed searches with the previous cycle's assignment.
    pub warm_start: bool,
    /// Seed the hybrid swarm with the severity-ranked dispatch read off the
    /// priority map.
    pub guided_seed: bool,
    /// Keep a per-tick record of ground-blocked cells in the log.
    pub record_blockage: bool,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            policy: Policy::Hybrid,
            horizon_ticks: 160,
            replan_interval_ticks: 1,
            planning_horizon_ticks: Some(20),
            swarm: SwarmConfig::default(),
            sa: SaConfig::default(),
            sensor: SensorParams::default(),
            priority: PriorityParams::default(),
            zones: ZoneParams::default(),
            weights: ObjectiveWeights::default(),
            quantization_cells: 8,
            warm_start: true,
            guided_seed: true,
            record_blockage: false,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_ticks == 0 {
            return Err(Error::config("horizon_ticks", "must be at least 1"));
        }
        if self.replan_interval_ticks == 0 {
            return Err(Error::config("replan_interval_ticks", "must be at least 1"));
        }
        if self.planning_horizon_ticks == Some(0) {
            return Err(Error::config("planning_horizon_ticks", "must be at least 1"));
        }
        if self.quantization_cells == 0 {
            return Err(Error::config("quantization_cells", "must be at least 1"));
        }
        self.swarm.validate()?;
        self.sa_config().validate()?;
        self.sensor.validate()?;
        self.priority.validate()?;
        self.zones.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    /// Annealing schedule with the budget matched to the swarm.
    pub fn sa_config(&self) -> SaConfig {
        SaConfig {
            budget: self.swarm.evaluations().max(1),
            ..self.sa
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    Reach,
    Deliver,
    Lost,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Move => "move",
            EventKind::Reach => "reach",
            EventKind::Deliver => "deliver",
            EventKind::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u32,
    /// Simulated seconds since the episode start.
    pub time_s: f64,
    pub kind: EventKind,
    pub vehicle: Option<usize>,
    pub cell: Cell,
    pub survivors: u32,
    pub supplies: i64,
}

/// State summary at the end of a tick (after the hazard advanced).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    pub time_s: f64,
    pub reached_survivors: u64,
    pub lost_survivors: u64,
    pub delivered: i64,
    pub on_vehicles: i64,
    pub in_depots: i64,
    pub water_volume: f64,
    pub burning: usize,
    pub burned: usize,
    pub zones: usize,
    pub priority_min: f64,
    pub priority_max: f64,
    pub planner_latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub hazard: Option<HazardKind>,
    pub policy: Option<Policy>,
    pub horizon_ticks: u32,
    pub total_survivors: u64,
    pub total_groups: usize,
    pub supply_total: i64,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<Event>,
    pub latencies_s: Vec<f64>,
    /// Search traces of each replanning cycle (swarm and annealing only).
    pub traces: Vec<Vec<f64>>,
    /// Ground-blocked cells during movement in each tick, when recorded.
    pub blocked: Vec<Vec<bool>>,
    pub final_priority: Option<PriorityMap>,
    pub final_detections: Vec<Detection>,
    pub final_zones: Vec<Zone>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Mean first-reach time over reached groups, simulated minutes.
    pub response_time_min: f64,
    pub coverage_pct: f64,
    /// Mean wall-clock seconds per perceive-and-plan cycle.
    pub decision_latency_s: f64,
    pub reached_survivors: u64,
    pub lost_survivors: u64,
    pub total_survivors: u64,
    pub delivered: i64,
    pub ticks: u32,
}

/// Aggregates an episode log into headline metrics.
pub fn compute_metrics(log: &EpisodeLog) -> Result<MetricsRecord> {
    if log.ticks.is_empty() {
        return Err(Error::Contract("episode log has no ticks".into()));
    }
    let mut reached = 0u64;
    let mut lost = 0u64;
    let mut delivered = 0i64;
    let mut reach_time = 0.0;
    let mut reach_events = 0usize;
    for e in &log.events {
        match e.kind {
            EventKind::Reach => {
                reached += e.survivors as u64;
                reach_time += e.time_s;
                reach_events += 1;
            }
            EventKind::Lost => lost += e.survivors as u64,
            EventKind::Deliver => delivered += e.supplies,
            EventKind::Move => {}
        }
    }
    let response_time_min = if reach_events == 0 {
        log.horizon_ticks as f64 * TICK_SECONDS / 60.0
    } else {
        reach_time / reach_events as f64 / 60.0
    };
    let coverage_pct = if log.total_survivors == 0 {
        100.0
    } else {
        100.0 * reached as f64 / log.total_survivors as f64
    };
    let decision_latency_s = if log.latencies_s.is_empty() {
        0.0
    } else {
        log.latencies_s.iter().sum::<f64>() / log.latencies_s.len() as f64
    };
    Ok(MetricsRecord {
        response_time_min,
        coverage_pct,
        decision_latency_s,
        reached_survivors: reached,
        lost_survivors: lost,
        total_survivors: log.total_survivors,
        delivered,
        ticks: log.ticks.len() as u32,
    })
}

/// Stream ids of the episode seed; hazard evolution draws only from its own
/// stream, so it is identical across policies for one seed.
pub const HAZARD_STREAM: u64 = 1;
pub const SENSOR_STREAM: u64 = 2;
pub const PLANNER_STREAM: u64 = 3;

/// The random stream `stream` of an episode seeded with `seed`.
pub fn episode_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Per-vehicle execution state that outlives a single tick.
#[derive(Debug, Clone, Default)]
struct Itinerary {
    stops: VecDeque<Cell>,
    /// Unspent movement time carried into the next tick.
    carry_s: f64,
}

struct PlanningView {
    problem: DecisionProblem,
    /// Ground-truth cell for every problem target (differs from the
    /// planner's view only under quantisation).
    exec_cells: Vec<Cell>,
}

/// Runs one closed-loop episode.
pub fn run_episode(scenario: &ScenarioSpec, config: &EngineConfig) -> Result<(MetricsRecord, EpisodeLog)> {
    config.validate()?;
    scenario.validate()?;
    let mut episode = Episode::new(scenario, config);
    episode.run()?;
    let log = episode.log;
    let metrics = compute_metrics(&log)?;
    Ok((metrics, log))
}

/// The decision problem the configured policy faces on the first tick, built
/// by the same perception pipeline and sensor stream as [`run_episode`].
pub fn initial_problem(scenario: &ScenarioSpec, config: &EngineConfig) -> Result<DecisionProblem> {
    config.validate()?;
    scenario.validate()?;
    let mut episode = Episode::new(scenario, config);
    let (obs, zones) = episode.perceive();
    Ok(episode.planning_view(&zones, &obs)?.problem)
}

struct Episode<'a> {
    scenario: &'a ScenarioSpec,
    config: &'a EngineConfig,
    world: WorldState,
    itineraries: Vec<Itinerary>,
    groups_at: HashMap<Cell, Vec<usize>>,
    /// Supply allowance per plan zone and the zone of each planned cell.
    allowance: Vec<i64>,
    zone_of_cell: HashMap<Cell, usize>,
    hazard_rng: ChaCha8Rng,
    sensor_rng: ChaCha8Rng,
    planner_rng: ChaCha8Rng,
    last_map: Option<PriorityMap>,
    log: EpisodeLog,
}

impl<'a> Episode<'a> {
    fn new(scenario: &'a ScenarioSpec, config: &'a EngineConfig) -> Self {
        let world = WorldState::new(scenario);
        let mut groups_at: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, g) in world.survivors.iter().enumerate() {
            groups_at.entry(g.cell).or_default().push(i);
        }
        let log = EpisodeLog {
            hazard: Some(scenario.hazard_kind()),
            policy: Some(config.policy),
            horizon_ticks: config.horizon_ticks,
            total_survivors: scenario.total_survivors(),
            total_groups: scenario.survivors.len(),
            supply_total: scenario.supply_total,
            ..EpisodeLog::default()
        };
        Episode {
            scenario,
            config,
            itineraries: vec![Itinerary::default(); world.vehicles.len()],
            world,
            groups_at,
            allowance: Vec::new(),
            zone_of_cell: HashMap::new(),
            hazard_rng: episode_stream(config.seed, HAZARD_STREAM),
            sensor_rng: episode_stream(config.seed, SENSOR_STREAM),
            planner_rng: episode_stream(config.seed, PLANNER_STREAM),
            last_map: None,
            log,
        }
    }

    fn perceive(&mut self) -> (Observation, Vec<Zone>) {
        let cfg = self.config;
        let obs = observe(&self.world, &cfg.sensor, &mut self.sensor_rng);
        let map = extract_priority_map(&obs, &cfg.priority);
        let side = self.world.side();
        let mut zones = segment_zones(&map, cfg.zones.threshold, cfg.zones.max_zones, side);
        attach_detections(&mut zones, &obs, side);
        self.last_map = Some(map);
        (obs, zones)
    }

    fn waiting_groups(&self) -> usize {
        self.world.survivors.iter().filter(|g| g.is_waiting()).count()
    }

    fn run(&mut self) -> Result<()> {
        let cfg = self.config;
        let mut zones_seen = 0;
        let mut priority_range = (0.0, 0.0);
        let mut reached = 0u64;
        let mut lost = 0u64;
        for tick in 0..cfg.horizon_ticks {
            debug_assert_eq!(self.world.tick, tick);
            let mut latency = None;
            if self.waiting_groups() > 0 {
                let started = Instant::now();
                let (obs, zones) = self.perceive();
                let map = self.last_map.take().expect("perceive stores the map");
                zones_seen = zones.len();
                priority_range = (map.min(), map.max());
                if tick % cfg.replan_interval_ticks == 0 {
                    self.replan(&obs, &zones)?;
                    let secs = started.elapsed().as_secs_f64();
                    self.log.latencies_s.push(secs);
                    latency = Some(secs);
                }
                self.log.final_priority = Some(map);
                self.log.final_detections = obs.detections;
                self.log.final_zones = zones;
            }

            if cfg.record_blockage {
                self.log.blocked.push(self.world.ground_blocked_mask().to_vec());
            }
            let (r, _) = self.move_fleet(tick);
            reached += r;

            self.world = step_hazard(&self.world, &self.scenario.hazard, &mut self.hazard_rng);
            lost += self.mark_lost();

            let delivered: i64 = self.log_delivered();
            self.log.ticks.push(TickRecord {
                tick,
                time_s: tick as f64 * TICK_SECONDS,
                reached_survivors: reached,
                lost_survivors: lost,
                delivered,
                on_vehicles: self.world.supply_on_vehicles(),
                in_depots: self.world.supply_in_depots(),
                water_volume: self.world.water_volume(),
                burning: self.world.count_fire(crate::dynamics::FireState::Burning),
                burned: self.world.count_fire(crate::dynamics::FireState::Burned),
                zones: zones_seen,
                priority_min: priority_range.0,
                priority_max: priority_range.1,
                planner_latency_s: latency,
            });
            if self.waiting_groups() == 0 {
                break;
            }
        }
        Ok(())
    }

    fn log_delivered(&self) -> i64 {
        self.log
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Deliver)
            .map(|e| e.supplies)
            .sum()
    }

    fn cost_maps(&self) -> (CostMap, CostMap) {
        let ground_speed = self
            .world
            .vehicles
            .iter()
            .find(|v| v.class == VehicleClass::Ground)
            .map_or(40.0, |v| v.speed_kmh);
        let drone_speed = self
            .world
            .vehicles
            .iter()
            .find(|v| v.class == VehicleClass::Drone)
            .map_or(80.0, |v| v.speed_kmh);
        (
            CostMap::for_vehicle(&self.world, VehicleClass::Ground, ground_speed),
            CostMap::for_vehicle(&self.world, VehicleClass::Drone, drone_speed),
        )
    }

    fn planning_view(&self, zones: &[Zone], obs: &Observation) -> Result<PlanningView> {
        let cfg = self.config;
        let side = self.world.side();
        let remaining = cfg.horizon_ticks - self.world.tick;
        let lookahead = cfg.planning_horizon_ticks.map_or(remaining, |h| h.min(remaining));
        let horizon_s = lookahead.max(1) as f64 * TICK_SECONDS;
        let (ground, drone) = self.cost_maps();
        let vehicles: Vec<PlanVehicle> = self
            .world
            .vehicles
            .iter()
            .map(|v| PlanVehicle {
                class: v.class,
                cell: v.cell,
                load: v.load,
            })
            .collect();
        let supply = self.world.supply_on_vehicles();

        let mut exec_cells = Vec::new();
        let inputs: Vec<ZoneInput> = match cfg.policy {
            Policy::PsoOnly => {
                let q = cfg.quantization_cells;
                let mut blocks: Vec<((u32, u32), Vec<Detection>)> = Vec::new();
                for d in &obs.detections {
                    let key = (d.cell.x / q, d.cell.y / q);
                    match blocks.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, list)) => list.push(*d),
                        None => blocks.push((key, vec![*d])),
                    }
                }
                blocks.sort_by(|a, b| {
                    let sa: u32 = a.1.iter().map(|d| d.count).sum();
                    let sb: u32 = b.1.iter().map(|d| d.count).sum();
                    sb.cmp(&sa).then(a.0.cmp(&b.0))
                });
                blocks.truncate(cfg.zones.max_zones);
                blocks
                    .into_iter()
                    .enumerate()
                    .map(|(id, ((bx, by), dets))| {
                        let centre = Cell::new(
                            (bx * q + q / 2).min(side as u32 - 1),
                            (by * q + q / 2).min(side as u32 - 1),
                        );
                        exec_cells.extend(dets.iter().map(|d| d.cell));
                        ZoneInput {
                            id,
                            severity: 1.0,
                            centroid: centre,
                            targets: dets
                                .iter()
                                .map(|d| PlanTarget {
                                    cell: centre,
                                    survivors: d.count,
                                })
                                .collect(),
                        }
                    })
                    .collect()
            }
            _ => zones
                .iter()
                .filter(|z| !z.targets.is_empty())
                .map(|z| {
                    exec_cells.extend(z.targets.iter().map(|d| d.cell));
                    ZoneInput {
                        id: z.id,
                        severity: z.severity,
                        centroid: z.centroid,
                        targets: z
                            .targets
                            .iter()
                            .map(|d| PlanTarget {
                                cell: d.cell,
                                survivors: d.count,
                            })
                            .collect(),
                    }
                })
                .collect(),
        };
        let problem = DecisionProblem::new(inputs, vehicles, ground, drone, horizon_s, supply)?;
        Ok(PlanningView {
            problem,
            exec_cells,
        })
    }

    /// Encodes the fleet's current commitments for the new zone layout.
    fn incumbent(&self, view: &PlanningView) -> Vec<f64> {
        let p = &view.problem;
        let assignment: Vec<Option<usize>> = self
            .itineraries
            .iter()
            .map(|it| {
                let target = *it.stops.front()?;
                p.zones
                    .iter()
                    .position(|z| z.targets().any(|t| view.exec_cells[t] == target))
                    .or_else(|| {
                        p.zones
                            .iter()
                            .enumerate()
                            .map(|(i, z)| (z.centroid.chebyshev(target), i))
                            .filter(|&(d, _)| d <= 8)
                            .min()
                            .map(|(_, i)| i)
                    })
            })
            .collect();
        p.encode(&assignment, &[])
    }

    fn replan(&mut self, obs: &Observation, zones: &[Zone]) -> Result<()> {
        let cfg = self.config;
        let view = self.planning_view(zones, obs)?;
        let mut seeds: Vec<Vec<f64>> = Vec::new();
        if cfg.warm_start && self.world.tick > 0 {
            seeds.push(self.incumbent(&view));
        }
        if cfg.guided_seed && cfg.policy == Policy::Hybrid {
            let g = greedy_plan(&view.problem);
            seeds.push(view.problem.encode(&g.assignment, &g.supply_share));
        }
        let plan: Plan = match cfg.policy {
            Policy::PerceptionOnly => greedy_plan(&view.problem),
            Policy::Hybrid | Policy::PsoOnly => {
                let out = pso_optimize_seeded(
                    &view.problem,
                    &cfg.swarm,
                    &cfg.weights,
                    &seeds,
                    &mut self.planner_rng,
                )?;
                self.log.traces.push(out.trace);
                out.plan
            }
            Policy::SimulatedAnnealing => {
                let out = sa_optimize(
                    &view.problem,
                    &cfg.sa_config(),
                    &cfg.weights,
                    seeds.first().map(|s| s.as_slice()),
                    &mut self.planner_rng,
                )?;
                self.log.traces.push(out.trace);
                out.plan
            }
        };
        self.apply(&plan, &view);
        Ok(())
    }

    fn apply(&mut self, plan: &Plan, view: &PlanningView) {
        let p = &view.problem;
        for (it, route) in self.itineraries.iter_mut().zip(&plan.routes) {
            let stops: VecDeque<Cell> = route.iter().map(|s| view.exec_cells[s.target]).collect();
            if stops.is_empty() {
                it.carry_s = 0.0;
            }
            it.stops = stops;
        }
        let supply = p.supply_available as f64;
        self.allowance = plan
            .supply_share
            .iter()
            .map(|s| (s * supply).round() as i64)
            .collect();
        self.zone_of_cell.clear();
        for (z, zone) in p.zones.iter().enumerate() {
            for t in zone.targets() {
                self.zone_of_cell.entry(view.exec_cells[t]).or_insert(z);
            }
        }
    }

    /// Moves every vehicle for one tick. Returns survivors reached.
    fn move_fleet(&mut self, tick: u32) -> (u64, i64) {
        let (ground, drone) = self.cost_maps();
        let t0 = tick as f64 * TICK_SECONDS;
        let mut reached = 0;
        let mut delivered = 0;
        for v in 0..self.world.vehicles.len() {
            let vehicle = self.world.vehicles[v];
            let costs = match vehicle.class {
                VehicleClass::Ground => &ground,
                VehicleClass::Drone => &drone,
            };
            let (r, d) = self.reach_at(v, vehicle.cell, tick, t0);
            reached += r;
            delivered += d;
            let mut budget = TICK_SECONDS + self.itineraries[v].carry_s;
            let mut elapsed = 0.0;
            let mut here = vehicle.cell;
            'stops: while let Some(&stop) = self.itineraries[v].stops.front() {
                if !self.has_waiting(stop) || stop == here {
                    self.itineraries[v].stops.pop_front();
                    continue;
                }
                let path = match shortest_path(costs, here, stop) {
                    Ok(Some(path)) => path,
                    _ => {
                        // Cut off for now; the next plan will route around it.
                        self.itineraries[v].stops.pop_front();
                        continue;
                    }
                };
                for &next in &path.cells[1..] {
                    let step = costs.step_cost(here, next);
                    if step > budget {
                        break 'stops;
                    }
                    budget -= step;
                    elapsed += step;
                    here = next;
                    self.world.vehicles[v].cell = here;
                    self.log.events.push(Event {
                        tick,
                        time_s: t0 + elapsed,
                        kind: EventKind::Move,
                        vehicle: Some(v),
                        cell: here,
                        survivors: 0,
                        supplies: 0,
                    });
                    let (r, d) = self.reach_at(v, here, tick, t0 + elapsed);
                    reached += r;
                    delivered += d;
                }
                self.itineraries[v].stops.pop_front();
            }
            self.itineraries[v].carry_s = if self.itineraries[v].stops.is_empty() {
                0.0
            } else {
                budget.min(TICK_SECONDS)
            };
        }
        (reached, delivered)
    }

    fn has_waiting(&self, cell: Cell) -> bool {
        self.groups_at
            .get(&cell)
            .is_some_and(|gs| gs.iter().any(|&g| self.world.survivors[g].is_waiting()))
    }

    fn reach_at(&mut self, v: usize, cell: Cell, tick: u32, time_s: f64) -> (u64, i64) {
        let Some(groups) = self.groups_at.get(&cell) else {
            return (0, 0);
        };
        let mut reached = 0;
        let mut delivered = 0;
        for &g in groups {
            let group = &mut self.world.survivors[g];
            if !group.is_waiting() {
                continue;
            }
            group.status = GroupStatus::Reached {
                tick,
                time_s,
                vehicle: v,
            };
            let size = group.size;
            reached += size as u64;
            self.log.events.push(Event {
                tick,
                time_s,
                kind: EventKind::Reach,
                vehicle: Some(v),
                cell,
                survivors: size,
                supplies: 0,
            });

            let need = size.div_ceil(SURVIVORS_PER_UNIT) as i64;
            let zone = self.zone_of_cell.get(&cell).copied();
            let cap = zone.map_or(i64::MAX, |z| self.allowance[z]);
            let units = need.min(self.world.vehicles[v].load).min(cap).max(0);
            if units > 0 {
                self.world.vehicles[v].load -= units;
                if let Some(z) = zone {
                    self.allowance[z] -= units;
                }
                delivered += units;
                self.log.events.push(Event {
                    tick,
                    time_s,
                    kind: EventKind::Deliver,
                    vehicle: Some(v),
                    cell,
                    survivors: size,
                    supplies: units,
                });
            }
        }
        (reached, delivered)
    }

    /// Groups whose cell is now under water or fire are cut off.
    fn mark_lost(&mut self) -> u64 {
        let side = self.world.side();
        let tick = self.world.tick;
        let mut lost = 0;
        for i in 0..self.world.survivors.len() {
            let g = self.world.survivors[i];
            if g.is_waiting() && self.world.hazard_blocked(g.cell.index(side)) {
                self.world.survivors[i].status = GroupStatus::Lost { tick };
                lost += g.size as u64;
                self.log.events.push(Event {
                    tick,
                    time_s: tick as f64 * TICK_SECONDS,
                    kind: EventKind::Lost,
                    vehicle: None,
                    cell: g.cell,
                    survivors: g.size,
                    supplies: 0,
                });
            }
        }
        lost
    }
}

/// Writes the event log as a comma-separated table.
pub fn write_event_log(log: &EpisodeLog, path: &Path) -> Result<()> {
    let mut out = String::from("tick,time_s,event,vehicle,x,y,survivors,supplies\n");
    for e in &log.events {
        let vehicle = e.vehicle.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:.3},{},{},{},{},{},{}",
            e.tick,
            e.time_s,
            e.kind.as_str(),
            vehicle,
            e.cell.x,
            e.cell.y,
            e.survivors,
            e.supplies
        );
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
