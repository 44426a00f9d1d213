use std::path::Path;

use swarmrelief::scenario::{generate_scenario, roundtrip_scenario, HazardModel, ScenarioSpec};
use swarmrelief::{Error, HazardKind, Preset, PresetParams, VehicleClass};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/benchmark_flood_42.json");

/// Re-checks every placement invariant straight from the public fields,
/// without calling `ScenarioSpec::validate`.
fn independent_violations(s: &ScenarioSpec) -> Vec<String> {
    let mut bad = Vec::new();
    let side = s.grid.side_cells as u32;
    let n = (side * side) as usize;
    let inside = |x: u32, y: u32| x < side && y < side;
    if side < 4 {
        bad.push("grid side".to_string());
    }
    if s.terrain.elevation.len() != n || s.terrain.fuel.len() != n || s.terrain.road.len() != n {
        bad.push("terrain length".into());
    }
    if s.terrain.fuel.iter().any(|f| !(*f >= 0.0 && *f <= 1.0)) {
        bad.push("fuel range".into());
    }
    for g in &s.survivors {
        if !inside(g.cell.x, g.cell.y) || g.size == 0 {
            bad.push(format!("survivor {:?}", g));
        }
    }
    for d in &s.depots {
        if !inside(d.cell.x, d.cell.y) || d.stock < 0 {
            bad.push(format!("depot {:?}", d));
        }
    }
    let stock: i64 = s.depots.iter().map(|d| d.stock).sum();
    if stock != s.supply_total || s.supply_total < 0 {
        bad.push("supply balance".into());
    }
    for v in &s.vehicles {
        if !inside(v.start.x, v.start.y) || v.speed_kmh <= 0.0 {
            bad.push(format!("vehicle {:?}", v));
        }
    }
    match &s.hazard.model {
        HazardModel::Flood(p) => {
            if p.rainfall_mm_per_tick < 0.0 || p.sources.iter().any(|c| !inside(c.x, c.y)) {
                bad.push("flood params".into());
            }
        }
        HazardModel::Wildfire(p) => {
            if !(0.0..=1.0).contains(&p.spread_probability)
                || p.wind.speed < 0.0
                || p.ignitions.iter().any(|c| !inside(c.x, c.y))
            {
                bad.push("fire params".into());
            }
        }
    }
    if !(0.0..=1.0).contains(&s.hazard.perturbation_rate) {
        bad.push("perturbation rate".into());
    }
    bad
}

#[test]
fn desk_wildfire_passes_independent_validator() {
    let s = generate_scenario(9, HazardKind::Wildfire, &Preset::Desk).unwrap();
    assert_eq!(independent_violations(&s), Vec::<String>::new());
    assert_eq!(s.hazard_kind(), HazardKind::Wildfire);
}

#[test]
fn many_seeds_pass_independent_validator() {
    for seed in 0..40 {
        for kind in [HazardKind::Flood, HazardKind::Wildfire] {
            let s = generate_scenario(seed, kind, &Preset::Desk).unwrap();
            assert!(independent_violations(&s).is_empty(), "seed {seed} {kind}");
        }
    }
}

#[test]
fn benchmark_flood_counts() {
    let s = generate_scenario(42, HazardKind::Flood, &Preset::Benchmark).unwrap();
    assert_eq!(s.grid.side_cells, 100);
    assert_eq!(s.count_vehicles(VehicleClass::Ground), 60);
    assert_eq!(s.count_vehicles(VehicleClass::Drone), 12);
    assert_eq!(s.total_survivors(), 6_000);
    assert_eq!(s.supply_total, 1_200);
}

#[test]
fn zero_survivor_preset_gives_empty_list() {
    let p = PresetParams {
        survivor_count: 0,
        ..PresetParams::desk()
    };
    let s = generate_scenario(7, HazardKind::Flood, &Preset::Custom(p)).unwrap();
    assert!(s.survivors.is_empty());
    assert!(independent_violations(&s).is_empty());
}

#[test]
fn roundtrip_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, kind) in [(1, HazardKind::Flood), (2, HazardKind::Wildfire)] {
        let s = generate_scenario(seed, kind, &Preset::Desk).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        assert_eq!(roundtrip_scenario(&s, &path).unwrap(), s);
    }
}

#[test]
fn negative_supply_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = generate_scenario(3, HazardKind::Flood, &Preset::Desk).unwrap();
    let mut doc = serde_json::to_value(&s).unwrap();
    doc["supply_total"] = serde_json::json!(-5);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let err = ScenarioSpec::read(&path).unwrap_err();
    assert!(matches!(err, Error::Validation(ref m) if m.contains("supply_total")), "{err}");
}

#[test]
fn malformed_file_reports_line_and_column() {
    let text = "{\n  \"version\": 1,\n  \"grid\": oops\n}";
    let err = ScenarioSpec::parse(text, Path::new("x.json")).unwrap_err();
    match err {
        Error::Parse { line, column, .. } => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("expected parse error, got {other}"),
    }
}

#[test]
fn missing_field_is_a_parse_error() {
    let err = ScenarioSpec::parse("{\"version\": 1}", Path::new("x.json")).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }));
}

#[test]
fn shipped_fixture_counts_match_a_second_pass() {
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    let s = ScenarioSpec::read(Path::new(FIXTURE)).unwrap();

    // Second pass over the raw document, independent of the typed reader.
    let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    let survivors = raw["survivors"].as_array().unwrap();
    let people: u64 = survivors.iter().map(|g| g["size"].as_u64().unwrap()).sum();
    let vehicles = raw["vehicles"].as_array().unwrap();
    let drones = vehicles.iter().filter(|v| v["class"] == "drone").count();
    let stock: i64 = raw["depots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["stock"].as_i64().unwrap())
        .sum();

    assert_eq!(s.survivors.len(), survivors.len());
    assert_eq!(s.total_survivors(), people);
    assert_eq!(s.vehicles.len(), vehicles.len());
    assert_eq!(s.count_vehicles(VehicleClass::Drone), drones);
    assert_eq!(s.supply_total, stock);
    assert_eq!((people, vehicles.len() - drones, drones, stock), (6_000, 60, 12, 1_200));
}

#[test]
fn shipped_fixture_matches_the_generator() {
    let s = ScenarioSpec::read(Path::new(FIXTURE)).unwrap();
    let g = generate_scenario(42, HazardKind::Flood, &Preset::Benchmark).unwrap();
    assert_eq!(s, g);
}
