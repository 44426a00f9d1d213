//! Experiment protocols: paired policy benchmark, inertia sweep, area
//! scaling and swarm convergence, plus the figure-data exports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{initial_problem, run_episode, EngineConfig, EpisodeLog, EventKind, MetricsRecord, Policy};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::optimizer::{pso_optimize, SwarmConfig};
use crate::perception::{pixel_of_cell, write_grid_csv, write_pgm, OBS_SIDE};
use crate::scenario::{generate_scenario, GridSpec, HazardKind, Preset, ScenarioSpec};

/// Per-run table columns, in order.
pub const RUNS_HEADER: &str = "hazard,policy,rep,response_time_min,coverage_pct,decision_latency_s";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SCALE_FILE: &str = "scale.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub hazards: Vec<HazardKind>,
    pub policies: Vec<Policy>,
    pub repetitions: u32,
    pub preset: Preset,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Template for every episode; `policy` and `seed` are overwritten per run.
    pub engine: EngineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            hazards: vec![HazardKind::Flood, HazardKind::Wildfire],
            policies: Policy::ALL.to_vec(),
            repetitions: 30,
            preset: Preset::Desk,
            base_seed: 0,
            output_dir: PathBuf::from("results"),
            engine: EngineConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.hazards.is_empty() {
            return Err(Error::config("hazards", "must name at least one hazard"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "must name at least one policy"));
        }
        self.preset.params().validate()?;
        self.engine.validate()
    }

    /// Scenario and episode seed of repetition `rep`.
    pub fn seed_for(&self, rep: u32) -> u64 {
        self.base_seed ^ rep as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub hazard: HazardKind,
    pub policy: Policy,
    pub rep: u32,
    pub metrics: MetricsRecord,
}

/// Sample statistics of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single sample).
    pub std: f64,
    /// Normal-approximation 95% confidence half-width of the mean.
    pub ci95: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(samples: &[f64]) -> Stat {
        let n = samples.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            std,
            ci95: 1.96 * std / (n as f64).sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub hazard: HazardKind,
    pub policy: Policy,
    pub runs: usize,
    pub response_time_min: Stat,
    pub coverage_pct: Stat,
    pub decision_latency_s: Stat,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, hazard: HazardKind, policy: Policy) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.hazard == hazard && r.policy == policy)
    }

    /// Groups runs by (hazard, policy) in first-seen order.
    pub fn from_runs(runs: &[RunRecord]) -> SummaryTable {
        let mut keys: Vec<(HazardKind, Policy)> = Vec::new();
        for r in runs {
            if !keys.contains(&(r.hazard, r.policy)) {
                keys.push((r.hazard, r.policy));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(hazard, policy)| {
                let sel: Vec<&MetricsRecord> = runs
                    .iter()
                    .filter(|r| r.hazard == hazard && r.policy == policy)
                    .map(|r| &r.metrics)
                    .collect();
                let col = |f: fn(&MetricsRecord) -> f64| Stat::of(&sel.iter().map(|m| f(m)).collect::<Vec<_>>());
                SummaryRow {
                    hazard,
                    policy,
                    runs: sel.len(),
                    response_time_min: col(|m| m.response_time_min),
                    coverage_pct: col(|m| m.coverage_pct),
                    decision_latency_s: col(|m| m.decision_latency_s),
                }
            })
            .collect();
        SummaryTable { rows }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub runs: Vec<RunRecord>,
    pub summary: SummaryTable,
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::io(format!("writing {}", path.display()), e)
}

/// Creates the output directory and proves it writable by creating `file`.
fn prepare_output(dir: &Path, file: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(file);
    fs::write(&path, "").map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn format_runs(runs: &[RunRecord]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for r in runs {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.hazard, r.policy, r.rep, m.response_time_min, m.coverage_pct, m.decision_latency_s
        );
    }
    out
}

pub fn format_summary(table: &SummaryTable) -> String {
    let mut out = String::from("hazard,policy,runs");
    for metric in ["response_time_min", "coverage_pct", "decision_latency_s"] {
        for stat in ["mean", "std", "ci95"] {
            let _ = write!(out, ",{metric}_{stat}");
        }
    }
    out.push('\n');
    for r in &table.rows {
        let _ = write!(out, "{},{},{}", r.hazard, r.policy, r.runs);
        for s in [&r.response_time_min, &r.coverage_pct, &r.decision_latency_s] {
            let _ = write!(out, ",{:.6},{:.6},{:.6}", s.mean, s.std, s.ci95);
        }
        out.push('\n');
    }
    out
}

/// Parses a per-run table written by [`run_benchmark`].
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 1,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RUNS_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header `{RUNS_HEADER}`"))),
    }
    let mut runs = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(i + 1, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(i + 1, e.to_string()));
        runs.push(RunRecord {
            hazard: f[0].parse().map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
            policy: f[1].parse().map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
            rep: f[2].parse().map_err(|e: std::num::ParseIntError| parse_err(i + 1, e.to_string()))?,
            metrics: MetricsRecord {
                response_time_min: num(f[3])?,
                coverage_pct: num(f[4])?,
                decision_latency_s: num(f[5])?,
                reached_survivors: 0,
                lost_survivors: 0,
                total_survivors: 0,
                delivered: 0,
                ticks: 0,
            },
        });
    }
    Ok(runs)
}

/// Runs every (hazard, rep, policy) episode without writing anything.
/// Policies within a repetition share the scenario instance and seed.
pub fn collect_runs(config: &BenchConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.hazards.len() * config.policies.len() * config.repetitions as usize);
    for &hazard in &config.hazards {
        for rep in 0..config.repetitions {
            let seed = config.seed_for(rep);
            let scenario = generate_scenario(seed, hazard, &config.preset)?;
            for &policy in &config.policies {
                let engine = EngineConfig {
                    policy,
                    seed,
                    ..config.engine.clone()
                };
                let (metrics, _) = run_episode(&scenario, &engine)?;
                runs.push(RunRecord {
                    hazard,
                    policy,
                    rep,
                    metrics,
                });
            }
        }
    }
    // Table order: hazard, then policy in configured order, then rep.
    let order = |p: Policy| config.policies.iter().position(|&q| q == p).unwrap_or(usize::MAX);
    runs.sort_by_key(|r| {
        (
            config.hazards.iter().position(|&h| h == r.hazard).unwrap_or(usize::MAX),
            order(r.policy),
            r.rep,
        )
    });
    Ok(runs)
}

/// The paired policy benchmark; writes `runs.csv` and `summary.csv`.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchOutput> {
    config.validate()?;
    let runs_path = prepare_output(&config.output_dir, RUNS_FILE)?;
    let summary_path = prepare_output(&config.output_dir, SUMMARY_FILE)?;
    let runs = collect_runs(config)?;
    let summary = SummaryTable::from_runs(&runs);
    write_text(&runs_path, &format_runs(&runs))?;
    write_text(&summary_path, &format_summary(&summary))?;
    Ok(BenchOutput { runs, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub inertia: f64,
    pub hazard: HazardKind,
    pub runs: usize,
    pub response_time_min: Stat,
    pub coverage_pct: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Mean first-cycle convergence trace per inertia.
    pub convergence: Vec<(f64, Vec<f64>)>,
}

/// Hybrid policy at each inertia on identical seeds. Writes `sweep.csv` and
/// `convergence.csv`.
pub fn sensitivity_sweep(inertias: &[f64], config: &BenchConfig) -> Result<SweepOutput> {
    if inertias.is_empty() {
        return Err(Error::config("inertias", "must list at least one value"));
    }
    config.validate()?;
    for &w in inertias {
        SwarmConfig {
            inertia: w,
            ..config.engine.swarm
        }
        .validate()?;
    }
    let sweep_path = prepare_output(&config.output_dir, SWEEP_FILE)?;
    let conv_path = prepare_output(&config.output_dir, CONVERGENCE_FILE)?;

    let mut rows = Vec::new();
    for &hazard in &config.hazards {
        for &inertia in inertias {
            let mut bench = config.clone();
            bench.hazards = vec![hazard];
            bench.policies = vec![Policy::Hybrid];
            bench.engine.swarm.inertia = inertia;
            let runs = collect_runs(&bench)?;
            let summary = SummaryTable::from_runs(&runs);
            let row = &summary.rows[0];
            rows.push(SweepRow {
                inertia,
                hazard,
                runs: row.runs,
                response_time_min: row.response_time_min,
                coverage_pct: row.coverage_pct,
            });
        }
    }

    let seeds: Vec<u64> = (0..config.repetitions).map(|r| config.seed_for(r)).collect();
    let study = convergence_study(&seeds, inertias, config.hazards[0], &config.preset, &config.engine)?;
    let convergence: Vec<(f64, Vec<f64>)> = inertias
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let traces: Vec<&Vec<f64>> = study.iter().map(|s| &s.traces[i]).collect();
            let len = traces[0].len();
            let mean = (0..len)
                .map(|t| traces.iter().map(|tr| tr[t]).sum::<f64>() / traces.len() as f64)
                .collect();
            (w, mean)
        })
        .collect();

    let mut out = String::from("hazard,inertia,runs,response_time_min_mean,response_time_min_std,coverage_pct_mean,coverage_pct_std\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.hazard,
            r.inertia,
            r.runs,
            r.response_time_min.mean,
            r.response_time_min.std,
            r.coverage_pct.mean,
            r.coverage_pct.std
        );
    }
    write_text(&sweep_path, &out)?;
    write_text(&conv_path, &format_convergence(&convergence))?;
    Ok(SweepOutput { rows, convergence })
}

/// Convergence traces of one planning problem under several inertias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSample {
    pub seed: u64,
    /// One trace per inertia, in the order given.
    pub traces: Vec<Vec<f64>>,
}

impl ConvergenceSample {
    pub fn finals(&self) -> Vec<f64> {
        self.traces.iter().map(|t| *t.last().expect("trace has the initial entry")).collect()
    }
}

/// For each seed, builds the first-tick hybrid planning problem and runs an
/// unseeded swarm at every inertia with the same random stream.
pub fn convergence_study(
    seeds: &[u64],
    inertias: &[f64],
    hazard: HazardKind,
    preset: &Preset,
    engine: &EngineConfig,
) -> Result<Vec<ConvergenceSample>> {
    let mut samples = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let scenario = generate_scenario(seed, hazard, preset)?;
        let cfg = EngineConfig {
            policy: Policy::Hybrid,
            seed,
            ..engine.clone()
        };
        let problem = initial_problem(&scenario, &cfg)?;
        let mut traces = Vec::with_capacity(inertias.len());
        for &inertia in inertias {
            let swarm = SwarmConfig {
                inertia,
                seed,
                ..engine.swarm
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            traces.push(pso_optimize(&problem, &swarm, &engine.weights, &mut rng)?.trace);
        }
        samples.push(ConvergenceSample { seed, traces });
    }
    Ok(samples)
}

pub fn format_convergence(series: &[(f64, Vec<f64>)]) -> String {
    let mut out = String::from("inertia,iteration,gbest_score\n");
    for (w, trace) in series {
        for (i, s) in trace.iter().enumerate() {
            let _ = writeln!(out, "{w},{i},{s:.9}");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub area_km2: f64,
    pub side_cells: usize,
    pub hazard: HazardKind,
    pub policy: Policy,
    pub runs: usize,
    pub response_time_min: Stat,
    pub coverage_pct: Stat,
    pub decision_latency_s: Stat,
}

/// Re-runs the benchmark with the grid side set from each area and every
/// other preset parameter (fleet, population, hazard seeds) unchanged.
/// Writes `scale.csv`.
pub fn scalability_test(areas_km2: &[f64], config: &BenchConfig) -> Result<Vec<ScaleRow>> {
    if areas_km2.is_empty() {
        return Err(Error::config("areas", "must list at least one area"));
    }
    if let Some(a) = areas_km2.iter().find(|&&a| !(a >= 1.0 && a.is_finite())) {
        return Err(Error::config("areas", format!("{a} km² is below the 1 km² minimum")));
    }
    config.validate()?;
    let path = prepare_output(&config.output_dir, SCALE_FILE)?;
    let mut rows = Vec::new();
    for &area in areas_km2 {
        let mut params = config.preset.params();
        params.side_cells = GridSpec::for_area_km2(area).side_cells;
        let bench = BenchConfig {
            preset: if params == config.preset.params() {
                config.preset.clone()
            } else {
                Preset::Custom(params.clone())
            },
            ..config.clone()
        };
        let runs = collect_runs(&bench)?;
        for r in SummaryTable::from_runs(&runs).rows {
            rows.push(ScaleRow {
                area_km2: area,
                side_cells: params.side_cells,
                hazard: r.hazard,
                policy: r.policy,
                runs: r.runs,
                response_time_min: r.response_time_min,
                coverage_pct: r.coverage_pct,
                decision_latency_s: r.decision_latency_s,
            });
        }
    }
    let mut out = String::from(
        "area_km2,side_cells,hazard,policy,runs,response_time_min_mean,coverage_pct_mean,decision_latency_s_mean\n",
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.area_km2,
            r.side_cells,
            r.hazard,
            r.policy,
            r.runs,
            r.response_time_min.mean,
            r.coverage_pct.mean,
            r.decision_latency_s.mean
        );
    }
    write_text(&path, &out)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Routes,
    Heatmap,
    Convergence,
}

impl std::str::FromStr for FigureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "routes" => Ok(FigureKind::Routes),
            "heatmap" => Ok(FigureKind::Heatmap),
            "convergence" => Ok(FigureKind::Convergence),
            other => Err(Error::config("kind", format!("unknown figure kind `{other}`"))),
        }
    }
}

/// Whatever a figure export may draw on; absent pieces are reported by name.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub scenario: Option<ScenarioSpec>,
    pub log: Option<EpisodeLog>,
    pub convergence: Vec<(f64, Vec<f64>)>,
}

fn missing(name: &str) -> Error {
    Error::io(
        format!("missing artifact `{name}`"),
        io::Error::new(io::ErrorKind::NotFound, name.to_string()),
    )
}

/// Writes the data files behind one figure into directory `dir` and returns
/// their paths.
///
/// * routes: `routes.csv` (`vehicle,class,seq,tick,x,y`), `zones.csv`
///   (`zone,x,y` boundary pixels in world-cell units), `points.csv`
///   (`kind,x,y,value`).
/// * heatmap: `heatmap.csv` (256 rows of 256 values), `heatmap.pgm`,
///   `detections.csv` (`px,py,x,y,count`).
/// * convergence: `convergence.csv` (`inertia,iteration,gbest_score`).
pub fn export_figure_data(artifacts: &RunArtifacts, kind: FigureKind, dir: &Path) -> Result<Vec<PathBuf>> {
    match kind {
        FigureKind::Routes => {
            let scenario = artifacts.scenario.as_ref().ok_or_else(|| missing("scenario"))?;
            let log = artifacts.log.as_ref().ok_or_else(|| missing("episode log"))?;
            let paths = [dir.join("routes.csv"), dir.join("zones.csv"), dir.join("points.csv")];
            prepare_output(dir, "routes.csv")?;
            write_text(&paths[0], &format_routes(scenario, log))?;
            write_text(&paths[1], &format_zone_outlines(log, scenario.grid.side_cells))?;
            write_text(&paths[2], &format_points(scenario))?;
            Ok(paths.to_vec())
        }
        FigureKind::Heatmap => {
            let log = artifacts.log.as_ref().ok_or_else(|| missing("episode log"))?;
            let map = log.final_priority.as_ref().ok_or_else(|| missing("priority map"))?;
            let side = artifacts
                .scenario
                .as_ref()
                .map(|s| s.grid.side_cells)
                .ok_or_else(|| missing("scenario"))?;
            let paths = [dir.join("heatmap.csv"), dir.join("heatmap.pgm"), dir.join("detections.csv")];
            prepare_output(dir, "heatmap.csv")?;
            write_grid_csv(&map.values, OBS_SIDE, &paths[0])?;
            write_pgm(&map.values, OBS_SIDE, &paths[1])?;
            let mut out = String::from("px,py,x,y,count\n");
            for d in &log.final_detections {
                let p = pixel_of_cell(d.cell, side);
                let _ = writeln!(out, "{},{},{},{},{}", p % OBS_SIDE, p / OBS_SIDE, d.cell.x, d.cell.y, d.count);
            }
            write_text(&paths[2], &out)?;
            Ok(paths.to_vec())
        }
        FigureKind::Convergence => {
            if artifacts.convergence.is_empty() {
                return Err(missing("convergence traces"));
            }
            let path = prepare_output(dir, CONVERGENCE_FILE)?;
            write_text(&path, &format_convergence(&artifacts.convergence))?;
            Ok(vec![path])
        }
    }
}

/// One polyline per vehicle: its start cell, then every cell it entered.
pub fn format_routes(scenario: &ScenarioSpec, log: &EpisodeLog) -> String {
    let mut out = String::from("vehicle,class,seq,tick,x,y\n");
    for (v, spec) in scenario.vehicles.iter().enumerate() {
        let class = spec.class.as_str();
        let _ = writeln!(out, "{v},{class},0,0,{},{}", spec.start.x, spec.start.y);
        let moves = log
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Move && e.vehicle == Some(v));
        for (i, e) in moves.enumerate() {
            let _ = writeln!(out, "{v},{class},{},{},{},{}", i + 1, e.tick, e.cell.x, e.cell.y);
        }
    }
    out
}

/// Boundary pixels of the last tick's zones, in world-cell coordinates.
pub fn format_zone_outlines(log: &EpisodeLog, world_side: usize) -> String {
    let scale = world_side as f64 / OBS_SIDE as f64;
    let mut out = String::from("zone,x,y\n");
    for z in &log.final_zones {
        let members: BTreeSet<u32> = z.member_pixels.iter().copied().collect();
        for &p in &z.member_pixels {
            let c = Cell::from_index(p as usize, OBS_SIDE);
            let interior = crate::grid::NEIGHBORS4.iter().all(|&(dx, dy)| {
                c.offset(dx, dy, OBS_SIDE)
                    .is_some_and(|n| members.contains(&(n.index(OBS_SIDE) as u32)))
            });
            if !interior {
                let _ = writeln!(
                    out,
                    "{},{:.4},{:.4}",
                    z.id,
                    (c.x as f64 + 0.5) * scale,
                    (c.y as f64 + 0.5) * scale
                );
            }
        }
    }
    out
}

pub fn format_points(scenario: &ScenarioSpec) -> String {
    let mut out = String::from("kind,x,y,value\n");
    for g in &scenario.survivors {
        let _ = writeln!(out, "survivor,{},{},{}", g.cell.x, g.cell.y, g.size);
    }
    for d in &scenario.depots {
        let _ = writeln!(out, "depot,{},{},{}", d.cell.x, d.cell.y, d.stock);
    }
    out
}
