mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmrelief::perception::{
    attach_detections, cell_of_pixel, convolve, extract_priority_map, gaussian_kernel, observe, segment_zones,
    Observation, OBS_SIDE,
};
use swarmrelief::scenario::{generate_scenario, GridSpec, HazardModel, SurvivorGroup, TerrainField};
use swarmrelief::{step_hazard, Cell, HazardKind, PriorityMap, PriorityParams, Preset, SensorParams, WorldState};

/// Straightforward bilinear resampling with pixel-centre alignment.
fn reference_resample(field: &[f64], side: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(OBS_SIDE * OBS_SIDE);
    let s = side as f64 / OBS_SIDE as f64;
    let at = |x: usize, y: usize| field[y * side + x];
    for py in 0..OBS_SIDE {
        for px in 0..OBS_SIDE {
            let u = ((px as f64 + 0.5) * s - 0.5).max(0.0).min((side - 1) as f64);
            let v = ((py as f64 + 0.5) * s - 0.5).max(0.0).min((side - 1) as f64);
            let (x0, y0) = (u.floor() as usize, v.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(side - 1), (y0 + 1).min(side - 1));
            let (fx, fy) = (u - x0 as f64, v - y0 as f64);
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

fn map_with_squares(squares: &[(usize, usize, usize, f64)]) -> PriorityMap {
    let mut values = vec![0.0; OBS_SIDE * OBS_SIDE];
    for &(x0, y0, w, v) in squares {
        for y in y0..y0 + w {
            for x in x0..x0 + w {
                values[y * OBS_SIDE + x] = v;
            }
        }
    }
    PriorityMap { values }
}

#[test]
fn noiseless_hazard_channel_is_the_resampled_field() {
    for kind in [HazardKind::Flood, HazardKind::Wildfire] {
        let spec = generate_scenario(12, kind, &Preset::Desk).unwrap();
        let mut w = WorldState::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..8 {
            w = step_hazard(&w, &spec.hazard, &mut rng);
        }
        let obs = observe(&w, &SensorParams::perfect(), &mut rng);
        let expect = reference_resample(&w.hazard_intensity(), w.side());
        for (a, b) in obs.hazard.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let waiting = w.survivors.iter().filter(|g| g.is_waiting()).count();
        assert_eq!(obs.detections.len(), waiting);
    }
}

#[test]
fn zero_recall_gives_an_empty_survivor_channel() {
    let spec = generate_scenario(3, HazardKind::Flood, &Preset::Desk).unwrap();
    let w = WorldState::new(&spec);
    let params = SensorParams {
        survivor_recall: 0.0,
        false_positive_rate: 0.0,
        ..SensorParams::default()
    };
    let obs = observe(&w, &params, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(obs.survivors.iter().all(|&v| v == 0.0));
    assert!(obs.detections.is_empty());
}

/// Central interval of Binomial(n, p) holding at least `mass`, from the exact pmf.
fn binomial_interval(n: u64, p: f64, mass: f64) -> (u64, u64) {
    let mut logpmf = Vec::with_capacity(n as usize + 1);
    let mut lgamma = vec![0.0f64; n as usize + 2];
    for k in 2..=n as usize + 1 {
        lgamma[k] = lgamma[k - 1] + ((k - 1) as f64).ln();
    }
    for k in 0..=n as usize {
        let choose = lgamma[n as usize + 1] - lgamma[k + 1] - lgamma[n as usize - k + 1];
        logpmf.push(choose + k as f64 * p.ln() + (n as usize - k) as f64 * (1.0 - p).ln());
    }
    let tail = (1.0 - mass) / 2.0;
    let mut acc = 0.0;
    let mut lo = 0;
    while acc + logpmf[lo].exp() <= tail {
        acc += logpmf[lo].exp();
        lo += 1;
    }
    let mut acc = 0.0;
    let mut hi = n as usize;
    while acc + logpmf[hi].exp() <= tail {
        acc += logpmf[hi].exp();
        hi -= 1;
    }
    (lo as u64, hi as u64)
}

#[test]
fn recall_follows_the_binomial_law() {
    let mut spec = generate_scenario(5, HazardKind::Flood, &Preset::Desk).unwrap();
    let side = spec.grid.side_cells;
    spec.survivors = (0..1000)
        .map(|i| SurvivorGroup {
            cell: Cell::from_index(i * 2 % (side * side), side),
            size: 1,
        })
        .collect();
    let w = WorldState::new(&spec);
    let params = SensorParams {
        hazard_noise_sigma: 0.0,
        survivor_recall: 0.9,
        false_positive_rate: 0.0,
    };
    let (lo, hi) = binomial_interval(1000, 0.9, 0.99);
    let mut inside = 0;
    let mut total = 0u64;
    for seed in 0..100 {
        let obs = observe(&w, &params, &mut ChaCha8Rng::seed_from_u64(seed));
        let n = obs.detections.len() as u64;
        total += n;
        if (lo..=hi).contains(&n) {
            inside += 1;
        }
    }
    // At 99% per seed, 100 seeds leave on average one outside.
    assert!(inside >= 96, "{inside} of 100 seeds inside [{lo}, {hi}]");
    let (tlo, thi) = binomial_interval(100_000, 0.9, 0.99);
    assert!((tlo..=thi).contains(&total), "pooled {total} outside [{tlo}, {thi}]");
}

#[test]
fn zero_observation_gives_zero_map_and_no_zones() {
    let map = extract_priority_map(&Observation::zeros(0), &PriorityParams::default());
    assert!(map.values.iter().all(|&v| v == 0.0));
    assert!(segment_zones(&map, 0.3, 32, 50).is_empty());
}

#[test]
fn unit_pixel_peaks_and_decays_within_support() {
    let mut field = vec![0.0; OBS_SIDE * OBS_SIDE];
    let (cx, cy) = (100usize, 120usize);
    field[cy * OBS_SIDE + cx] = 1.0;
    let taps = gaussian_kernel(5);
    let out = convolve(&field, OBS_SIDE, &taps);
    // Direct 2-D convolution by definition.
    for dy in -3i64..=3 {
        for dx in -3i64..=3 {
            let v = out[(cy as i64 + dy) as usize * OBS_SIDE + (cx as i64 + dx) as usize];
            let expect = if dx.abs() <= 2 && dy.abs() <= 2 {
                taps[(dx + 2) as usize] * taps[(dy + 2) as usize]
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-15);
        }
    }
    for d in 0..2usize {
        let a = out[cy * OBS_SIDE + cx + d];
        let b = out[cy * OBS_SIDE + cx + d + 1];
        assert!(a > b);
    }
}

#[test]
fn two_blobs_give_two_zones_with_centroids_inside() {
    let map = map_with_squares(&[(10, 10, 20, 0.9), (150, 150, 30, 0.6)]);
    let zones = segment_zones(&map, 0.3, 32, 256);
    assert_eq!(zones.len(), 2);
    let oracle = common::union_find_components(&map.values, OBS_SIDE, 0.3);
    assert_eq!(oracle.len(), 2);
    for z in &zones {
        assert!(oracle.contains(&z.member_pixels));
        let centre = Cell::new(z.centroid.x, z.centroid.y).index(OBS_SIDE) as u32;
        assert!(z.member_pixels.binary_search(&centre).is_ok());
    }
}

#[test]
fn fifty_blobs_keep_the_strongest_32() {
    let mut squares = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for i in 0..50 {
        let (gx, gy) = (i % 10, i / 10);
        let w = rng.random_range(2..=12);
        squares.push((gx * 25 + 2, gy * 25 + 2, w, rng.random_range(0.4..1.0)));
    }
    let map = map_with_squares(&squares);
    let zones = segment_zones(&map, 0.3, 32, 256);
    assert_eq!(zones.len(), 32);
    // Sort-and-truncate oracle over every component's severity.
    let mut all: Vec<f64> = common::union_find_components(&map.values, OBS_SIDE, 0.3)
        .iter()
        .map(|c| c.iter().map(|&p| map.values[p as usize]).sum())
        .collect();
    assert_eq!(all.len(), 50);
    all.sort_by(|a, b| b.total_cmp(a));
    for (z, s) in zones.iter().zip(&all) {
        assert!((z.severity - s).abs() < 1e-9);
    }
}

#[test]
fn zones_match_union_find_on_noisy_maps() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..OBS_SIDE * OBS_SIDE).map(|_| rng.random::<f64>()).collect();
        let map = PriorityMap::from_raw(convolve(&raw, OBS_SIDE, &gaussian_kernel(5)));
        let mut zones = segment_zones(&map, 0.6, usize::MAX, 256);
        let mut oracle = common::union_find_components(&map.values, OBS_SIDE, 0.6);
        let mut got: Vec<Vec<u32>> = zones.drain(..).map(|z| z.member_pixels).collect();
        got.sort();
        oracle.sort();
        assert_eq!(got, oracle, "seed {seed}");
    }
}

#[test]
fn zones_are_disjoint_and_connected_on_a_real_scene() {
    let spec = generate_scenario(21, HazardKind::Wildfire, &Preset::Desk).unwrap();
    let mut w = WorldState::new(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        w = step_hazard(&w, &spec.hazard, &mut rng);
    }
    let obs = observe(&w, &SensorParams::default(), &mut rng);
    let map = extract_priority_map(&obs, &PriorityParams::default());
    assert!(map.min() == 0.0 && map.max() == 1.0);
    let mut zones = segment_zones(&map, 0.3, 32, w.side());
    attach_detections(&mut zones, &obs, w.side());
    let mut owner = vec![usize::MAX; OBS_SIDE * OBS_SIDE];
    for z in &zones {
        for &p in &z.member_pixels {
            assert_eq!(owner[p as usize], usize::MAX);
            owner[p as usize] = z.id;
        }
        let sum: u32 = z.targets.iter().map(|d| d.count).sum();
        assert_eq!(sum, z.estimated_survivors);
    }
    // Each zone is exactly one union-find component of its own mask.
    for z in &zones {
        let mask: Vec<f64> = (0..OBS_SIDE * OBS_SIDE)
            .map(|p| if owner[p] == z.id { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(common::union_find_components(&mask, OBS_SIDE, 0.5).len(), 1);
    }
}

#[test]
fn pixel_and_cell_maps_stay_in_bounds() {
    for side in [4usize, 50, 71, 100, 141, 300] {
        for p in [0, OBS_SIDE - 1, OBS_SIDE * OBS_SIDE - 1, 12345] {
            assert!(cell_of_pixel(p, side).in_bounds(side));
        }
    }
}

#[test]
fn hazard_free_grid_has_no_hazard_signal() {
    let mut spec = generate_scenario(4, HazardKind::Flood, &Preset::Desk).unwrap();
    if let HazardModel::Flood(p) = &mut spec.hazard.model {
        p.sources.clear();
    }
    let n = spec.grid.cell_count();
    spec.grid = GridSpec::new(spec.grid.side_cells, 100.0);
    spec.terrain = TerrainField {
        elevation: vec![0.0; n],
        fuel: vec![0.0; n],
        road: vec![false; n],
    };
    let w = WorldState::new(&spec);
    let obs = observe(&w, &SensorParams::perfect(), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(obs.hazard.iter().all(|&v| v == 0.0));
    assert!(obs.sensor_readings.iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalisation_is_idempotent(values in prop::collection::vec(-50.0f64..50.0, 2..200)) {
        let once = PriorityMap::from_raw(values);
        let twice = once.renormalized();
        prop_assert!(once.values.iter().all(|v| (0.0..=1.0).contains(v)));
        for (a, b) in once.values.iter().zip(&twice.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_constant_input_spans_unit_interval(values in prop::collection::vec(0.0f64..10.0, 2..200)) {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-9);
        let m = PriorityMap::from_raw(values);
        prop_assert_eq!(m.min(), 0.0);
        prop_assert_eq!(m.max(), 1.0);
    }

    #[test]
    fn smoothing_preserves_constants(c in -5.0f64..5.0, width in 1usize..9) {
        let side = 16;
        let out = convolve(&vec![c; side * side], side, &gaussian_kernel(width));
        prop_assert!(out.iter().all(|v| (v - c).abs() < 1e-12));
    }
}
