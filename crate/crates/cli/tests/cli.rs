use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmrelief")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small engine so the protocol commands finish quickly.
const QUICK_ENGINE: &str = "[engine]\nhorizon_ticks = 12\n\n[engine.swarm]\nparticle_count = 8\niterations = 5\n";

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{extra}\n{QUICK_ENGINE}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_writes_a_readable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let o = cli(&["gen", "--seed", "3", "--hazards", "wildfire", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = swarmrelief::ScenarioSpec::read(&path).unwrap();
    let want = swarmrelief::generate_scenario(3, swarmrelief::HazardKind::Wildfire, &swarmrelief::Preset::Desk).unwrap();
    assert_eq!(spec, want);
}

#[test]
fn bench_writes_the_runs_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "");
    let o = cli(&[
        "bench",
        "--config",
        &config,
        "--reps",
        "2",
        "--hazards",
        "flood",
        "--policies",
        "hybrid,perception_only",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut lines = runs.lines();
    assert_eq!(lines.next(), Some("hazard,policy,rep,response_time_min,coverage_pct,decision_latency_s"));
    assert_eq!(lines.count(), 4);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "reps = 1\npolicies = [\"perception_only\"]");
    let o = cli(&[
        "bench",
        "--config",
        &config,
        "--reps",
        "5",
        "--hazards",
        "flood",
        "--policies",
        "hybrid",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    let rows: Vec<&str> = runs.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("flood,perception_only,0,"));
}

#[test]
fn sweep_and_scale_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "reps = 1\nhazards = [\"flood\"]");
    let o = cli(&["sweep", "--config", &config, "--inertias", "0.5,0.9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 3);
    let o = cli(&[
        "scale",
        "--config",
        &config,
        "--policies",
        "hybrid",
        "--areas",
        "25,30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("scale.csv")).unwrap().lines().count(), 3);
}

#[test]
fn run_and_export_write_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "");
    let o = cli(&["run", "--config", &config, "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("coverage_pct="));
    for f in ["events.csv", "routes.csv", "zones.csv", "points.csv", "heatmap.csv", "heatmap.pgm", "detections.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let conv = dir.path().join("conv");
    let o = cli(&[
        "export",
        "--config",
        &config,
        "--kind",
        "convergence",
        "--inertias",
        "0.5,0.7",
        "--out",
        conv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // Five iterations plus the initial swarm, per inertia.
    assert_eq!(std::fs::read_to_string(conv.join("convergence.csv")).unwrap().lines().count(), 1 + 2 * 6);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["bench".into(), "--policies".into(), "telepathy".into()],
        vec!["bench".into(), "--reps".into(), "0".into(), "--out".into(), dir.path().join("o").display().to_string()],
        vec!["run".into(), "--scenario".into(), dir.path().join("absent.json").display().to_string()],
        vec!["gen".into()],
        vec!["export".into()],
        vec!["bench".into(), "--config".into(), dir.path().join("absent.toml").display().to_string()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = cli(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!stderr(&o).trim().is_empty(), "{args:?}");
    }
}
