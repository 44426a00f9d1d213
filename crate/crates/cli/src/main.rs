//! Command-line front end: scenario generation, single episodes, the
//! benchmark protocols and figure-data export.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use swarmrelief::engine::write_event_log;
use swarmrelief::harness::{
    convergence_study, export_figure_data, format_summary, FigureKind, RunArtifacts, SummaryTable,
};
use swarmrelief::{
    generate_scenario, run_benchmark, run_episode, scalability_test, sensitivity_sweep, BenchConfig, EngineConfig,
    HazardKind, Policy, Preset, ScenarioSpec,
};

#[derive(Parser, Debug)]
#[command(name = "swarmrelief", version, about = "Disaster-response simulation and planning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate a scenario and write it as JSON to `--out`.
    Gen,
    /// Run one episode; writes the event log, metrics and figure data.
    Run,
    /// Paired policy benchmark; writes runs.csv and summary.csv.
    Bench,
    /// Hybrid policy at each inertia; writes sweep.csv and convergence.csv.
    Sweep,
    /// Benchmark at each area with the fleet fixed; writes scale.csv.
    Scale,
    /// Write the data files behind one figure (`--kind`).
    Export,
}

/// Every flag. A value given in the `--config` file wins over the flag.
#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    /// TOML file whose keys override the flags of the same name.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Scenario preset: desk or benchmark.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    /// Scenario and episode seed; the base seed of the protocols.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repetitions per hazard and policy.
    #[arg(long, global = true)]
    reps: Option<u32>,
    /// Comma-separated hazards.
    #[arg(long, global = true, value_delimiter = ',')]
    hazards: Option<Vec<HazardKind>>,
    /// Comma-separated policies; `run` and `export` use the first.
    #[arg(long, global = true, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    /// Comma-separated inertia weights.
    #[arg(long, global = true, value_delimiter = ',')]
    inertias: Option<Vec<f64>>,
    /// Comma-separated areas in km².
    #[arg(long, global = true, value_delimiter = ',')]
    areas: Option<Vec<f64>>,
    /// Output directory, or the scenario file for `gen`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario JSON to use instead of generating one.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Figure kind for `export`: routes, heatmap or convergence.
    #[arg(long, global = true)]
    kind: Option<FigureKind>,
    /// Engine parameters; settable only from the config file.
    #[arg(skip)]
    engine: Option<EngineConfig>,
}

impl Settings {
    fn merge(self, file: Settings) -> Settings {
        Settings {
            config: self.config,
            preset: file.preset.or(self.preset),
            seed: file.seed.or(self.seed),
            reps: file.reps.or(self.reps),
            hazards: file.hazards.or(self.hazards),
            policies: file.policies.or(self.policies),
            inertias: file.inertias.or(self.inertias),
            areas: file.areas.or(self.areas),
            out: file.out.or(self.out),
            scenario: file.scenario.or(self.scenario),
            kind: file.kind.or(self.kind),
            engine: file.engine.or(self.engine),
        }
    }

    fn load(self) -> Result<Settings> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(self.merge(file))
    }

    fn bench(&self) -> BenchConfig {
        let d = BenchConfig::default();
        BenchConfig {
            hazards: self.hazards.clone().unwrap_or(d.hazards),
            policies: self.policies.clone().unwrap_or(d.policies),
            repetitions: self.reps.unwrap_or(d.repetitions),
            preset: self.preset.clone().unwrap_or(d.preset),
            base_seed: self.seed.unwrap_or(d.base_seed),
            output_dir: self.out.clone().unwrap_or(d.output_dir),
            engine: self.engine.clone().unwrap_or(d.engine),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    fn hazard(&self) -> HazardKind {
        self.hazards.as_ref().and_then(|h| h.first().copied()).unwrap_or(HazardKind::Flood)
    }

    fn policy(&self) -> Policy {
        self.policies.as_ref().and_then(|p| p.first().copied()).unwrap_or(Policy::Hybrid)
    }

    fn scenario(&self) -> Result<ScenarioSpec> {
        match &self.scenario {
            Some(path) => Ok(ScenarioSpec::read(path)?),
            None => Ok(generate_scenario(
                self.seed.unwrap_or(0),
                self.hazard(),
                &self.preset.clone().unwrap_or(Preset::Desk),
            )?),
        }
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            policy: self.policy(),
            seed: self.seed.unwrap_or(0),
            record_blockage: true,
            ..self.engine.clone().unwrap_or_default()
        }
    }
}

fn print_summary(table: &SummaryTable) {
    print!("{}", format_summary(table));
}

fn episode_artifacts(settings: &Settings) -> Result<RunArtifacts> {
    let scenario = settings.scenario()?;
    let (_, log) = run_episode(&scenario, &settings.engine())?;
    Ok(RunArtifacts {
        scenario: Some(scenario),
        log: Some(log),
        ..RunArtifacts::default()
    })
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(command: Command, settings: &Settings) -> Result<()> {
    match command {
        Command::Gen => {
            let path = settings.out.clone().context("`gen` needs --out <file>")?;
            let scenario = settings.scenario()?;
            scenario.write(&path)?;
            println!("wrote {}", path.display());
        }
        Command::Run => {
            let dir = settings.out_dir();
            let artifacts = episode_artifacts(settings)?;
            let log = artifacts.log.as_ref().expect("episode log");
            let metrics = swarmrelief::compute_metrics(log)?;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_event_log(log, &dir.join("events.csv"))?;
            let mut paths = vec![dir.join("events.csv")];
            paths.extend(export_figure_data(&artifacts, FigureKind::Routes, &dir)?);
            paths.extend(export_figure_data(&artifacts, FigureKind::Heatmap, &dir)?);
            report_paths(&paths);
            println!(
                "response_time_min={:.3} coverage_pct={:.3} decision_latency_s={:.4} reached={} lost={} total={}",
                metrics.response_time_min,
                metrics.coverage_pct,
                metrics.decision_latency_s,
                metrics.reached_survivors,
                metrics.lost_survivors,
                metrics.total_survivors
            );
        }
        Command::Bench => print_summary(&run_benchmark(&settings.bench())?.summary),
        Command::Sweep => {
            let inertias = settings.inertias.clone().unwrap_or_else(|| vec![0.5, 0.7, 0.9]);
            let out = sensitivity_sweep(&inertias, &settings.bench())?;
            println!("inertia,hazard,runs,response_time_min_mean,coverage_pct_mean");
            for r in &out.rows {
                println!(
                    "{},{},{},{:.6},{:.6}",
                    r.inertia, r.hazard, r.runs, r.response_time_min.mean, r.coverage_pct.mean
                );
            }
        }
        Command::Scale => {
            let areas = settings.areas.clone().context("`scale` needs --areas")?;
            let rows = scalability_test(&areas, &settings.bench())?;
            println!("area_km2,hazard,policy,runs,response_time_min_mean,coverage_pct_mean");
            for r in &rows {
                println!(
                    "{},{},{},{},{:.6},{:.6}",
                    r.area_km2, r.hazard, r.policy, r.runs, r.response_time_min.mean, r.coverage_pct.mean
                );
            }
        }
        Command::Export => {
            let kind = settings.kind.context("`export` needs --kind routes|heatmap|convergence")?;
            let dir = settings.out_dir();
            let artifacts = match kind {
                FigureKind::Convergence => {
                    let inertias = settings.inertias.clone().unwrap_or_else(|| vec![0.5, 0.7, 0.9]);
                    let preset = settings.preset.clone().unwrap_or(Preset::Desk);
                    let seed = settings.seed.unwrap_or(0);
                    let study =
                        convergence_study(&[seed], &inertias, settings.hazard(), &preset, &settings.engine())?;
                    RunArtifacts {
                        convergence: inertias.into_iter().zip(study[0].traces.clone()).collect(),
                        ..RunArtifacts::default()
                    }
                }
                _ => episode_artifacts(settings)?,
            };
            report_paths(&export_figure_data(&artifacts, kind, &dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.settings.load().and_then(|s| run(cli.command, &s));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already print their source; skip repeats.
            let mut message = e.to_string();
            for cause in e.chain().skip(1).map(ToString::to_string) {
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
