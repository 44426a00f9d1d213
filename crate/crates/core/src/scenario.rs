//! Scenario definitions, the synthetic generator and the scenario file format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cell;

/// Schema version written to and required from scenario files.
pub const SCHEMA_VERSION: u32 = 1;

/// Seconds of simulated time per tick.
pub const TICK_SECONDS: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub side_cells: usize,
    /// Meters per cell edge.
    pub cell_size_m: f64,
}

impl GridSpec {
    pub fn new(side_cells: usize, cell_size_m: f64) -> Self {
        GridSpec {
            side_cells,
            cell_size_m,
        }
    }

    /// Nearest square grid of 100 m cells covering `area_km2`.
    pub fn for_area_km2(area_km2: f64) -> Self {
        let side = (area_km2 * 100.0).sqrt().round() as usize;
        GridSpec::new(side, 100.0)
    }

    pub fn area_km2(&self) -> f64 {
        let edge_km = self.cell_size_m / 1000.0;
        (self.side_cells * self.side_cells) as f64 * edge_km * edge_km
    }

    pub fn cell_count(&self) -> usize {
        self.side_cells * self.side_cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.side_cells < 4 {
            return Err(Error::config("grid.side_cells", "must be at least 4"));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(Error::config("grid.cell_size_m", "must be positive"));
        }
        Ok(())
    }
}

/// Static per-cell terrain, all row-major with `side_cells²` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainField {
    pub elevation: Vec<f64>,
    pub fuel: Vec<f64>,
    pub road: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardKind {
    Flood,
    Wildfire,
}

impl HazardKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HazardKind::Flood => "flood",
            HazardKind::Wildfire => "wildfire",
        }
    }
}

impl std::str::FromStr for HazardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flood" => Ok(HazardKind::Flood),
            "wildfire" | "fire" => Ok(HazardKind::Wildfire),
            other => Err(Error::config("hazard", format!("unknown hazard `{other}`"))),
        }
    }
}

impl std::fmt::Display for HazardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodParams {
    /// Water added to every source cell per tick, in millimetres.
    pub rainfall_mm_per_tick: f64,
    /// Depth above which a cell is impassable for ground vehicles.
    pub blockage_depth_m: f64,
    pub sources: Vec<Cell>,
}

/// Wind blowing *toward* `direction_deg`, measured from +x toward +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wind {
    pub direction_deg: f64,
    /// Normalised speed in [0, 1].
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireParams {
    pub ignitions: Vec<Cell>,
    pub wind: Wind,
    /// Per-tick ignition probability of a fully fuelled, crosswind neighbour.
    pub spread_probability: f64,
    /// Ticks a cell burns before it is burned out.
    pub burn_ticks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardModel {
    Flood(FloodParams),
    Wildfire(FireParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    #[serde(flatten)]
    pub model: HazardModel,
    /// Per-cell, per-tick probability of a transient ground blockage.
    pub perturbation_rate: f64,
}

impl HazardParams {
    pub fn kind(&self) -> HazardKind {
        match self.model {
            HazardModel::Flood(_) => HazardKind::Flood,
            HazardModel::Wildfire(_) => HazardKind::Wildfire,
        }
    }

    /// Depth threshold for ground blockage; floods only.
    pub fn blockage_depth_m(&self) -> f64 {
        match &self.model {
            HazardModel::Flood(p) => p.blockage_depth_m,
            HazardModel::Wildfire(_) => DEFAULT_BLOCKAGE_DEPTH_M,
        }
    }
}

pub const DEFAULT_BLOCKAGE_DEPTH_M: f64 = 0.3;
pub const DEFAULT_BURN_TICKS: u32 = 4;
pub const DEFAULT_PERTURBATION_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorGroup {
    pub cell: Cell,
    pub size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub cell: Cell,
    pub stock: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Ground,
    Drone,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Ground => "ground",
            VehicleClass::Drone => "drone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub class: VehicleClass,
    pub start: Cell,
    pub capacity: u32,
    /// Top speed; ground vehicles reach it on roads only.
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub version: u32,
    pub grid: GridSpec,
    pub terrain: TerrainField,
    pub hazard: HazardParams,
    pub survivors: Vec<SurvivorGroup>,
    pub depots: Vec<Depot>,
    pub vehicles: Vec<VehicleSpec>,
    pub supply_total: i64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn hazard_kind(&self) -> HazardKind {
        self.hazard.kind()
    }

    pub fn total_survivors(&self) -> u64 {
        self.survivors.iter().map(|g| g.size as u64).sum()
    }

    pub fn count_vehicles(&self, class: VehicleClass) -> usize {
        self.vehicles.iter().filter(|v| v.class == class).count()
    }

    /// Checks every structural invariant of the scenario.
    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Validation(e.to_string()))?;
        let side = self.grid.side_cells;
        let n = self.grid.cell_count();
        let t = &self.terrain;
        for (name, len) in [
            ("elevation", t.elevation.len()),
            ("fuel", t.fuel.len()),
            ("road", t.road.len()),
        ] {
            if len != n {
                return Err(Error::Validation(format!(
                    "terrain.{name} has {len} entries, expected {n}"
                )));
            }
        }
        if let Some(i) = t.elevation.iter().position(|e| !e.is_finite()) {
            return Err(Error::Validation(format!("terrain.elevation[{i}] is not finite")));
        }
        if let Some(i) = t.fuel.iter().position(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Validation(format!("terrain.fuel[{i}] outside [0, 1]")));
        }

        let rate = self.hazard.perturbation_rate;
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Validation(
                "hazard.perturbation_rate outside [0, 1]".into(),
            ));
        }
        match &self.hazard.model {
            HazardModel::Flood(p) => {
                if !(p.rainfall_mm_per_tick.is_finite() && p.rainfall_mm_per_tick >= 0.0) {
                    return Err(Error::Validation(
                        "hazard.rainfall_mm_per_tick must be non-negative".into(),
                    ));
                }
                if !(p.blockage_depth_m.is_finite() && p.blockage_depth_m > 0.0) {
                    return Err(Error::Validation(
                        "hazard.blockage_depth_m must be positive".into(),
                    ));
                }
                check_cells("hazard.sources", &p.sources, side)?;
            }
            HazardModel::Wildfire(p) => {
                if !(0.0..=1.0).contains(&p.spread_probability) {
                    return Err(Error::Validation(
                        "hazard.spread_probability outside [0, 1]".into(),
                    ));
                }
                if !(p.wind.speed.is_finite() && p.wind.speed >= 0.0) {
                    return Err(Error::Validation("hazard.wind.speed must be non-negative".into()));
                }
                if !p.wind.direction_deg.is_finite() {
                    return Err(Error::Validation("hazard.wind.direction_deg not finite".into()));
                }
                if p.burn_ticks == 0 {
                    return Err(Error::Validation("hazard.burn_ticks must be positive".into()));
                }
                check_cells("hazard.ignitions", &p.ignitions, side)?;
            }
        }

        for (i, g) in self.survivors.iter().enumerate() {
            if !g.cell.in_bounds(side) {
                return Err(Error::Validation(format!("survivors[{i}] out of bounds")));
            }
            if g.size == 0 {
                return Err(Error::Validation(format!("survivors[{i}] has size 0")));
            }
        }
        if self.supply_total < 0 {
            return Err(Error::Validation(format!(
                "supply_total is negative ({})",
                self.supply_total
            )));
        }
        let mut stock = 0i64;
        for (i, d) in self.depots.iter().enumerate() {
            if !d.cell.in_bounds(side) {
                return Err(Error::Validation(format!("depots[{i}] out of bounds")));
            }
            if d.stock < 0 {
                return Err(Error::Validation(format!("depots[{i}] has negative stock")));
            }
            stock += d.stock;
        }
        if stock != self.supply_total {
            return Err(Error::Validation(format!(
                "depot stock sums to {stock} but supply_total is {}",
                self.supply_total
            )));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if !v.start.in_bounds(side) {
                return Err(Error::Validation(format!("vehicles[{i}] starts out of bounds")));
            }
            if !(v.speed_kmh.is_finite() && v.speed_kmh > 0.0) {
                return Err(Error::Validation(format!("vehicles[{i}] speed must be positive")));
            }
        }
        Ok(())
    }

    /// Writes the scenario as a JSON document.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("scenario not serialisable: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Reads and validates a scenario document.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

fn check_cells(field: &str, cells: &[Cell], side: usize) -> Result<()> {
    match cells.iter().position(|c| !c.in_bounds(side)) {
        Some(i) => Err(Error::Validation(format!("{field}[{i}] out of bounds"))),
        None => Ok(()),
    }
}

/// Writes `spec` to `path` and reads it back.
pub fn roundtrip_scenario(spec: &ScenarioSpec, path: &Path) -> Result<ScenarioSpec> {
    spec.write(path)?;
    ScenarioSpec::read(path)
}

/// Generator parameters; the named presets are fixed instances of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetParams {
    pub side_cells: usize,
    pub cell_size_m: f64,
    pub ground_vehicles: usize,
    pub drones: usize,
    pub survivor_count: u32,
    pub max_group_size: u32,
    pub survivor_clusters: usize,
    /// Standard deviation of group scatter around a cluster centre, in cells.
    pub cluster_spread_cells: f64,
    pub supply_total: u32,
    pub depot_count: usize,
    pub ground_speed_kmh: f64,
    pub drone_speed_kmh: f64,
    pub ground_capacity: u32,
    pub drone_capacity: u32,
    pub road_spacing: usize,
    /// Fraction of road cells knocked out at generation time.
    pub road_damage: f64,
    /// Max displacement, in cells, applied to hazard seed placement.
    pub seed_jitter: u32,
    pub flood_sources: usize,
    pub rainfall_mm_per_tick: f64,
    pub blockage_depth_m: f64,
    pub fire_ignitions: usize,
    pub spread_probability: f64,
    pub burn_ticks: u32,
    pub perturbation_rate: f64,
}

impl PresetParams {
    /// Full experimental scale: 100 km², 60 ground vehicles, 12 drones,
    /// 6,000 survivors and 1,200 supply units.
    pub fn benchmark() -> Self {
        PresetParams {
            side_cells: 100,
            cell_size_m: 100.0,
            ground_vehicles: 60,
            drones: 12,
            survivor_count: 6_000,
            max_group_size: 11,
            survivor_clusters: 40,
            cluster_spread_cells: 3.0,
            supply_total: 1_200,
            depot_count: 4,
            ground_speed_kmh: 40.0,
            drone_speed_kmh: 80.0,
            ground_capacity: 30,
            drone_capacity: 5,
            road_spacing: 7,
            road_damage: 0.05,
            seed_jitter: 2,
            flood_sources: 96,
            rainfall_mm_per_tick: 600.0,
            blockage_depth_m: DEFAULT_BLOCKAGE_DEPTH_M,
            fire_ignitions: 6,
            spread_probability: 0.3,
            burn_ticks: DEFAULT_BURN_TICKS,
            perturbation_rate: DEFAULT_PERTURBATION_RATE,
        }
    }

    /// One tenth of the benchmark population on a quarter of its area.
    pub fn desk() -> Self {
        PresetParams {
            side_cells: 50,
            ground_vehicles: 12,
            drones: 3,
            survivor_count: 600,
            survivor_clusters: 10,
            supply_total: 120,
            depot_count: 2,
            flood_sources: 24,
            fire_ignitions: 2,
            ..Self::benchmark()
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.side_cells, self.cell_size_m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side_cells < 4 {
            return Err(Error::config("side_cells", "must be at least 4"));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(Error::config("cell_size_m", "must be positive"));
        }
        if self.survivor_count > 0 && self.survivor_clusters == 0 {
            return Err(Error::config(
                "survivor_clusters",
                "must be at least 1 when survivors are requested",
            ));
        }
        if self.survivor_count > 0 && self.max_group_size == 0 {
            return Err(Error::config("max_group_size", "must be at least 1"));
        }
        if !(self.cluster_spread_cells.is_finite() && self.cluster_spread_cells >= 0.0) {
            return Err(Error::config("cluster_spread_cells", "must be non-negative"));
        }
        let fleet = self.ground_vehicles + self.drones;
        if (fleet > 0 || self.supply_total > 0) && self.depot_count == 0 {
            return Err(Error::config(
                "depot_count",
                "must be at least 1 when vehicles or supplies exist",
            ));
        }
        for (field, speed) in [
            ("ground_speed_kmh", self.ground_speed_kmh),
            ("drone_speed_kmh", self.drone_speed_kmh),
        ] {
            if !(speed.is_finite() && speed > 0.0) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.road_spacing == 0 {
            return Err(Error::config("road_spacing", "must be at least 1"));
        }
        for (field, p) in [
            ("road_damage", self.road_damage),
            ("spread_probability", self.spread_probability),
            ("perturbation_rate", self.perturbation_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
        }
        if !(self.rainfall_mm_per_tick.is_finite() && self.rainfall_mm_per_tick >= 0.0) {
            return Err(Error::config("rainfall_mm_per_tick", "must be non-negative"));
        }
        if !(self.blockage_depth_m.is_finite() && self.blockage_depth_m > 0.0) {
            return Err(Error::config("blockage_depth_m", "must be positive"));
        }
        if self.burn_ticks == 0 {
            return Err(Error::config("burn_ticks", "must be at least 1"));
        }
        Ok(())
    }
}

impl Default for PresetParams {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Benchmark,
    Desk,
    Custom(PresetParams),
}

impl Preset {
    pub fn params(&self) -> PresetParams {
        match self {
            Preset::Benchmark => PresetParams::benchmark(),
            Preset::Desk => PresetParams::desk(),
            Preset::Custom(p) => p.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Benchmark => "benchmark",
            Preset::Desk => "desk",
            Preset::Custom(_) => "custom",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(Preset::Benchmark),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }
}

/// Builds a synthetic scenario; a pure function of its arguments.
pub fn generate_scenario(seed: u64, kind: HazardKind, preset: &Preset) -> Result<ScenarioSpec> {
    let p = preset.params();
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = p.side_cells;
    let grid = p.grid();

    let elevation = gen_elevation(side, &mut rng);
    let road = gen_roads(side, p.road_spacing, p.road_damage, &mut rng);
    let fuel = gen_fuel(side, &road, &mut rng);

    let hazard_seeds = match kind {
        HazardKind::Flood => lowland_cells(&elevation, side, p.flood_sources, &mut rng),
        HazardKind::Wildfire => (0..p.fire_ignitions)
            .map(|_| {
                let lo = side / 4;
                let hi = side - side / 4;
                Cell::new(
                    rng.random_range(lo..hi.max(lo + 1)) as u32,
                    rng.random_range(lo..hi.max(lo + 1)) as u32,
                )
            })
            .collect(),
    };
    let hazard_seeds: Vec<Cell> = hazard_seeds
        .into_iter()
        .map(|c| jitter(c, p.seed_jitter, side, &mut rng))
        .collect();

    let model = match kind {
        HazardKind::Flood => HazardModel::Flood(FloodParams {
            rainfall_mm_per_tick: p.rainfall_mm_per_tick,
            blockage_depth_m: p.blockage_depth_m,
            sources: hazard_seeds.clone(),
        }),
        HazardKind::Wildfire => HazardModel::Wildfire(FireParams {
            ignitions: hazard_seeds.clone(),
            wind: Wind {
                direction_deg: rng.random_range(0.0..360.0),
                speed: rng.random_range(0.3..0.8),
            },
            spread_probability: p.spread_probability,
            burn_ticks: p.burn_ticks,
        }),
    };

    let depots = place_depots(&p, &road, &hazard_seeds, &mut rng);
    let vehicles = place_vehicles(&p, &depots);
    let survivors = place_survivors(&p, &hazard_seeds, &mut rng);

    let spec = ScenarioSpec {
        version: SCHEMA_VERSION,
        grid,
        terrain: TerrainField {
            elevation,
            fuel,
            road,
        },
        hazard: HazardParams {
            model,
            perturbation_rate: p.perturbation_rate,
        },
        survivors,
        depots,
        vehicles,
        supply_total: p.supply_total as i64,
        seed,
    };
    debug_assert!(spec.validate().is_ok());
    Ok(spec)
}

/// Tilted plane plus a handful of Gaussian hills and hollows, in metres.
fn gen_elevation(side: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = side as f64;
    let tilt_x = rng.random_range(-0.2..0.2);
    let tilt_y = rng.random_range(-0.2..0.2);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
                rng.random_range(-12.0..15.0),
                rng.random_range(0.08..0.25) * s,
            )
        })
        .collect();
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let (xf, yf) = (x as f64, y as f64);
            let mut h = 20.0 + tilt_x * xf + tilt_y * yf;
            for &(cx, cy, amp, r) in &bumps {
                let d2 = (xf - cx).powi(2) + (yf - cy).powi(2);
                h += amp * (-d2 / (2.0 * r * r)).exp();
            }
            out.push(h);
        }
    }
    out
}

/// Jittered Manhattan road lattice with random segment damage.
fn gen_roads(side: usize, spacing: usize, damage: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut road = vec![false; side * side];
    let mut lines = |horizontal: bool, rng: &mut ChaCha8Rng| {
        let mut at = rng.random_range(0..spacing.min(side));
        while at < side {
            for k in 0..side {
                let (x, y) = if horizontal { (k, at) } else { (at, k) };
                road[y * side + x] = true;
            }
            at += spacing + rng.random_range(0..=spacing / 3);
        }
    };
    lines(true, rng);
    lines(false, rng);
    for r in road.iter_mut() {
        if *r && rng.random_bool(damage) {
            *r = false;
        }
    }
    road
}

fn gen_fuel(side: usize, road: &[bool], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = side as f64;
    let patches: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
                rng.random_range(0.1..0.3) * s,
            )
        })
        .collect();
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            if road[y * side + x] {
                out.push(0.2);
                continue;
            }
            let mut f: f64 = 0.55;
            for &(cx, cy, r) in &patches {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                f += 0.4 * (-d2 / (2.0 * r * r)).exp();
            }
            f += rng.random_range(-0.05..0.05);
            out.push(f.clamp(0.0, 1.0));
        }
    }
    out
}

/// Samples `n` cells from the lowest 4% of the terrain.
fn lowland_cells(elevation: &[f64], side: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Cell> {
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..elevation.len()).collect();
    order.sort_by(|&a, &b| elevation[a].total_cmp(&elevation[b]).then(a.cmp(&b)));
    let pool = (elevation.len() / 25).max(n).min(elevation.len());
    (0..n)
        .map(|_| Cell::from_index(order[rng.random_range(0..pool)], side))
        .collect()
}

fn jitter(c: Cell, amount: u32, side: usize, rng: &mut ChaCha8Rng) -> Cell {
    if amount == 0 {
        return c;
    }
    let a = amount as i32;
    let dx = rng.random_range(-a..=a);
    let dy = rng.random_range(-a..=a);
    let x = (c.x as i32 + dx).clamp(0, side as i32 - 1);
    let y = (c.y as i32 + dy).clamp(0, side as i32 - 1);
    Cell::new(x as u32, y as u32)
}

fn min_distance(c: Cell, others: &[Cell]) -> f64 {
    others
        .iter()
        .map(|o| c.euclidean(*o))
        .fold(f64::INFINITY, f64::min)
}

/// Depots go on road cells well away from the hazard seeds when possible.
fn place_depots(
    p: &PresetParams,
    road: &[bool],
    hazard_seeds: &[Cell],
    rng: &mut ChaCha8Rng,
) -> Vec<Depot> {
    let side = p.side_cells;
    let n = p.depot_count;
    if n == 0 {
        return Vec::new();
    }
    let roads: Vec<usize> = (0..road.len()).filter(|&i| road[i]).collect();
    let mut cells: Vec<Cell> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(f64, Cell)> = None;
        for _ in 0..24 {
            let c = if roads.is_empty() {
                Cell::new(
                    rng.random_range(0..side) as u32,
                    rng.random_range(0..side) as u32,
                )
            } else {
                Cell::from_index(roads[rng.random_range(0..roads.len())], side)
            };
            let score = min_distance(c, hazard_seeds).min(side as f64 / 3.0)
                + min_distance(c, &cells).min(side as f64 / 3.0);
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, c));
            }
        }
        cells.push(best.expect("at least one candidate").1);
    }
    let total = p.supply_total as i64;
    let share = total / n as i64;
    let extra = total % n as i64;
    cells
        .into_iter()
        .enumerate()
        .map(|(i, cell)| Depot {
            cell,
            stock: share + i64::from((i as i64) < extra),
        })
        .collect()
}

fn place_vehicles(p: &PresetParams, depots: &[Depot]) -> Vec<VehicleSpec> {
    let mut out = Vec::with_capacity(p.ground_vehicles + p.drones);
    let classes = std::iter::repeat_n(VehicleClass::Ground, p.ground_vehicles)
        .chain(std::iter::repeat_n(VehicleClass::Drone, p.drones));
    for (i, class) in classes.enumerate() {
        let (capacity, speed_kmh) = match class {
            VehicleClass::Ground => (p.ground_capacity, p.ground_speed_kmh),
            VehicleClass::Drone => (p.drone_capacity, p.drone_speed_kmh),
        };
        out.push(VehicleSpec {
            class,
            start: depots[i % depots.len()].cell,
            capacity,
            speed_kmh,
        });
    }
    out
}

/// Poisson-disc cluster centres with Gaussian scatter of groups around them.
fn place_survivors(
    p: &PresetParams,
    hazard_seeds: &[Cell],
    rng: &mut ChaCha8Rng,
) -> Vec<SurvivorGroup> {
    if p.survivor_count == 0 {
        return Vec::new();
    }
    let side = p.side_cells;
    let s = side as f64;
    let min_gap = 0.7 * s / (p.survivor_clusters as f64).sqrt();
    let mut centres: Vec<Cell> = Vec::with_capacity(p.survivor_clusters);
    let mut attempts = 0;
    while centres.len() < p.survivor_clusters {
        let c = Cell::new(
            rng.random_range(0..side) as u32,
            rng.random_range(0..side) as u32,
        );
        attempts += 1;
        // Relax the disc constraint rather than loop forever on small grids.
        if attempts > 200 * p.survivor_clusters || min_distance(c, &centres) >= min_gap {
            centres.push(c);
        }
    }

    let scatter = Normal::new(0.0, p.cluster_spread_cells.max(1e-9)).expect("finite sigma");
    let mut groups = Vec::new();
    let mut remaining = p.survivor_count;
    let mut k = 0usize;
    while remaining > 0 {
        let centre = centres[k % centres.len()];
        k += 1;
        let size = rng.random_range(1..=p.max_group_size).min(remaining);
        let mut cell = centre;
        for _ in 0..16 {
            let x = (centre.x as f64 + scatter.sample(rng)).round();
            let y = (centre.y as f64 + scatter.sample(rng)).round();
            let c = Cell::new(x.clamp(0.0, s - 1.0) as u32, y.clamp(0.0, s - 1.0) as u32);
            if !hazard_seeds.contains(&c) {
                cell = c;
                break;
            }
        }
        groups.push(SurvivorGroup { cell, size });
        remaining -= size;
    }
    groups
}
