//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::Rng;
use swarmrelief::grid::Cell;
use swarmrelief::optimizer::{DecisionProblem, ObjectiveWeights, PlanTarget, PlanVehicle, ZoneInput, IDLE_THRESHOLD};
use swarmrelief::router::{shortest_path, CostMap};
use swarmrelief::scenario::VehicleClass;

/// Exact path cost as `orth + diag * sqrt(2)`, both integers, for maps with
/// integer cell costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactCost {
    pub orth: u64,
    pub diag: u64,
}

impl ExactCost {
    pub fn value(self) -> f64 {
        self.orth as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }

    /// Strict comparison of `a + b√2` values without rounding.
    pub fn less_than(self, other: ExactCost) -> bool {
        // a1 + b1√2 < a2 + b2√2  <=>  (a1 - a2) < (b2 - b1)√2
        let da = self.orth as i128 - other.orth as i128;
        let db = other.diag as i128 - self.diag as i128;
        match (da < 0, db < 0) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => 2 * db * db < da * da,
            (false, false) => da * da < 2 * db * db,
        }
    }
}

/// Cost of a cell sequence: entering each cell after the first.
pub fn exact_cost_of(costs: &[u64], side: usize, cells: &[Cell]) -> ExactCost {
    let mut c = ExactCost { orth: 0, diag: 0 };
    for w in cells.windows(2) {
        let k = costs[w[1].index(side)];
        if w[0].x != w[1].x && w[0].y != w[1].y {
            c.diag += k;
        } else {
            c.orth += k;
        }
    }
    c
}

/// Minimum over all simple 8-connected paths, by exhaustive DFS. Cells with
/// cost 0 are walls (the source may be one).
pub fn brute_force_min(costs: &[u64], side: usize, src: Cell, dst: Cell) -> Option<ExactCost> {
    fn dfs(
        costs: &[u64],
        side: usize,
        here: Cell,
        dst: Cell,
        acc: ExactCost,
        seen: &mut Vec<bool>,
        best: &mut Option<ExactCost>,
    ) {
        if here == dst {
            if best.is_none_or(|b| acc.less_than(b)) {
                *best = Some(acc);
            }
            return;
        }
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (here.x as i32 + dx, here.y as i32 + dy);
                if nx < 0 || ny < 0 || nx >= side as i32 || ny >= side as i32 {
                    continue;
                }
                let next = Cell::new(nx as u32, ny as u32);
                let i = next.index(side);
                if seen[i] || costs[i] == 0 {
                    continue;
                }
                let mut step = acc;
                if dx != 0 && dy != 0 {
                    step.diag += costs[i];
                } else {
                    step.orth += costs[i];
                }
                seen[i] = true;
                dfs(costs, side, next, dst, step, seen, best);
                seen[i] = false;
            }
        }
    }
    let mut seen = vec![false; side * side];
    seen[src.index(side)] = true;
    let mut best = None;
    dfs(costs, side, src, dst, ExactCost { orth: 0, diag: 0 }, &mut seen, &mut best);
    best
}

pub fn to_cost_map(costs: &[u64], side: usize) -> CostMap {
    CostMap::new(
        side,
        costs
            .iter()
            .map(|&c| if c == 0 { f64::INFINITY } else { c as f64 })
            .collect(),
    )
}

/// A random 2-vehicle, 3-zone instance on a 10x10 grid with a few walls.
pub fn toy_instance<R: Rng>(rng: &mut R) -> DecisionProblem {
    toy_instance_sized(rng, 2, 3)
}

pub fn toy_instance_sized<R: Rng>(rng: &mut R, vehicles: usize, zones: usize) -> DecisionProblem {
    let side = 10usize;
    let mut ground = vec![12.0; side * side];
    for _ in 0..8 {
        ground[rng.random_range(0..side * side)] = f64::INFINITY;
    }
    let free = |rng: &mut R, g: &[f64]| loop {
        let c = Cell::new(rng.random_range(0..side as u32), rng.random_range(0..side as u32));
        if g[c.index(side)].is_finite() {
            break c;
        }
    };
    let zone_inputs: Vec<ZoneInput> = (0..zones)
        .map(|id| {
            let n = rng.random_range(1..=3);
            let targets: Vec<PlanTarget> = (0..n)
                .map(|_| PlanTarget {
                    cell: free(rng, &ground),
                    survivors: rng.random_range(1..=10),
                })
                .collect();
            ZoneInput {
                id,
                severity: rng.random_range(0.5..3.0),
                centroid: targets[0].cell,
                targets,
            }
        })
        .collect();
    let vehicle_list: Vec<PlanVehicle> = (0..vehicles)
        .map(|_| PlanVehicle {
            class: if rng.random_bool(0.3) {
                VehicleClass::Drone
            } else {
                VehicleClass::Ground
            },
            cell: free(rng, &ground),
            load: 5,
        })
        .collect();
    DecisionProblem::new(
        zone_inputs,
        vehicle_list,
        CostMap::new(side, ground),
        CostMap::uniform(side, 6.0),
        rng.random_range(60.0..400.0),
        10,
    )
    .unwrap()
}

fn leg(p: &DecisionProblem, class: VehicleClass, from: Cell, to: Cell) -> f64 {
    let costs = match class {
        VehicleClass::Ground => &p.ground_costs,
        VehicleClass::Drone => &p.drone_costs,
    };
    match shortest_path(costs, from, to).unwrap() {
        Some(path) => path.cost,
        None => f64::INFINITY,
    }
}

fn reachable(p: &DecisionProblem, v: usize, z: usize) -> bool {
    let veh = &p.vehicles[v];
    p.zones[z]
        .targets()
        .any(|t| leg(p, veh.class, veh.cell, p.targets[t].cell).is_finite())
}

/// Reference assignment rule: per-vehicle argmax (first maximum), idle
/// below the threshold or when the zone is unreachable.
pub fn reference_assignment(p: &DecisionProblem, x: &[f64]) -> Vec<Option<usize>> {
    let k = p.zones.len();
    (0..p.vehicles.len())
        .map(|v| {
            let keys = &x[v * k..(v + 1) * k];
            let mut best: Option<usize> = None;
            for z in 0..k {
                if best.is_none_or(|b| keys[z] > keys[b]) {
                    best = Some(z);
                }
            }
            best.filter(|&z| keys[z] >= IDLE_THRESHOLD && reachable(p, v, z))
        })
        .collect()
}

/// Reference routing: within each zone, repeatedly commit the
/// (vehicle, target) pair with the earliest arrival, until the earliest
/// exceeds the horizon. Returns per-vehicle `(target, arrival)` lists.
pub fn reference_routes(p: &DecisionProblem, assignment: &[Option<usize>]) -> Vec<Vec<(usize, f64)>> {
    let mut routes = vec![Vec::new(); p.vehicles.len()];
    for z in 0..p.zones.len() {
        let members: Vec<usize> = (0..p.vehicles.len()).filter(|&v| assignment[v] == Some(z)).collect();
        let targets: Vec<usize> = p.zones[z].targets().collect();
        let mut taken = vec![false; targets.len()];
        let mut at: Vec<Cell> = members.iter().map(|&v| p.vehicles[v].cell).collect();
        let mut clock = vec![0.0; members.len()];
        loop {
            let mut pick: Option<(usize, usize, f64)> = None;
            for (m, &v) in members.iter().enumerate() {
                for (j, &t) in targets.iter().enumerate() {
                    if taken[j] {
                        continue;
                    }
                    let arrival = clock[m] + leg(p, p.vehicles[v].class, at[m], p.targets[t].cell);
                    if arrival.is_finite() && pick.is_none_or(|(_, _, a)| arrival < a) {
                        pick = Some((m, j, arrival));
                    }
                }
            }
            let Some((m, j, arrival)) = pick else { break };
            if arrival > p.horizon_s {
                break;
            }
            taken[j] = true;
            at[m] = p.targets[targets[j]].cell;
            clock[m] = arrival;
            routes[members[m]].push((targets[j], arrival));
        }
    }
    routes
}

/// Reference objective of an assignment.
pub fn reference_objective(p: &DecisionProblem, assignment: &[Option<usize>], w: &ObjectiveWeights) -> f64 {
    let routes = reference_routes(p, assignment);
    let mut time_sum = 0.0;
    let mut reached = 0usize;
    let mut weighted = 0.0;
    for route in &routes {
        for &(t, arrival) in route {
            time_sum += arrival;
            reached += 1;
            let z = p.zones.iter().position(|z| z.targets().contains(&t)).unwrap();
            weighted += p.zones[z].severity * p.targets[t].survivors as f64;
        }
    }
    let total: f64 = p.zones.iter().map(|z| z.severity * z.survivors as f64).sum();
    let t_norm = if reached == 0 {
        1.0
    } else {
        (time_sum / reached as f64 / p.horizon_s).clamp(0.0, 1.0)
    };
    let c = if total > 0.0 { weighted / total } else { 0.0 };
    w.time * t_norm + w.coverage * (1.0 - c)
}

/// Exhaustive optimum over every vehicle-to-zone-or-idle assignment. Supply
/// shares do not enter the objective, so one share vector per assignment
/// suffices.
pub fn brute_force_optimum(p: &DecisionProblem, w: &ObjectiveWeights) -> f64 {
    let v = p.vehicles.len();
    let options = p.zones.len() + 1;
    let mut best = f64::INFINITY;
    for code in 0..options.pow(v as u32) {
        let mut c = code;
        let assignment: Vec<Option<usize>> = (0..v)
            .map(|i| {
                let o = c % options;
                c /= options;
                if o == 0 || !reachable(p, i, o - 1) {
                    None
                } else {
                    Some(o - 1)
                }
            })
            .collect();
        best = best.min(reference_objective(p, &assignment, w));
    }
    best
}

/// Union-find labelling of 8-connected super-threshold pixels; returns the
/// components as sorted pixel lists, in no particular order.
pub fn union_find_components(values: &[f64], side: usize, threshold: f64) -> Vec<Vec<u32>> {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let on = |i: usize| values[i] > threshold;
    for i in 0..n {
        if !on(i) {
            continue;
        }
        let (x, y) = (i % side, i / side);
        // Union with the already-visited half of the neighbourhood.
        let back = [(-1i32, 0i32), (-1, -1), (0, -1), (1, -1)];
        for (dx, dy) in back {
            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
            if nx < 0 || ny < 0 || nx >= side as i32 {
                continue;
            }
            let j = ny as usize * side + nx as usize;
            if on(j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
    for i in (0..n).filter(|&i| on(i)) {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i as u32);
    }
    groups.into_values().collect()
}

/// One random grid of side 2 to 4 with integer costs and about a quarter of
/// cells walled; checks `shortest_path` against exhaustive enumeration.
pub fn router_oracle_case<R: Rng>(rng: &mut R) -> Result<(), String> {
    let side = rng.random_range(2..=4usize);
    let n = side * side;
    let mut costs: Vec<u64> = (0..n)
        .map(|_| if rng.random_bool(0.25) { 0 } else { rng.random_range(1..=9) })
        .collect();
    let src = Cell::from_index(rng.random_range(0..n), side);
    let dst = Cell::from_index(rng.random_range(0..n), side);
    if rng.random_bool(0.5) {
        // Keep the source open in half the cases; a walled source may still leave.
        costs[src.index(side)] = costs[src.index(side)].max(1);
    }
    let map = to_cost_map(&costs, side);
    let got = shortest_path(&map, src, dst).map_err(|e| e.to_string())?;
    let want = if src == dst {
        Some(ExactCost { orth: 0, diag: 0 })
    } else {
        brute_force_min(&costs, side, src, dst)
    };
    match (got, want) {
        (None, None) => Ok(()),
        (Some(p), Some(w)) => {
            if src == dst {
                return if p.cells.is_empty() && p.cost == 0.0 {
                    Ok(())
                } else {
                    Err("src = dst must give an empty path".into())
                };
            }
            if p.cells.first() != Some(&src) || p.cells.last() != Some(&dst) {
                return Err(format!("path endpoints wrong: {:?}", p.cells));
            }
            for pair in p.cells.windows(2) {
                if pair[0].chebyshev(pair[1]) != 1 || costs[pair[1].index(side)] == 0 {
                    return Err(format!("bad step {:?} -> {:?}", pair[0], pair[1]));
                }
            }
            let exact = exact_cost_of(&costs, side, &p.cells);
            if exact != w && (exact.less_than(w) || w.less_than(exact)) {
                return Err(format!("cost {} but optimum {}", exact.value(), w.value()));
            }
            if (p.cost - exact.value()).abs() > 1e-9 * exact.value().max(1.0) {
                return Err(format!("reported {} but path sums to {}", p.cost, exact.value()));
            }
            Ok(())
        }
        (g, w) => Err(format!(
            "reachability mismatch: got {:?}, oracle {:?}",
            g.map(|p| p.cost),
            w.map(|c| c.value())
        )),
    }
}

/// Runs the default swarm on toy instance `seed` and returns
/// `(swarm objective, exhaustive optimum)`.
pub fn optimizer_oracle_case(seed: u64) -> (f64, f64) {
    use rand::SeedableRng;
    use swarmrelief::optimizer::pso_optimize;
    use swarmrelief::SwarmConfig;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = toy_instance(&mut rng);
    let w = ObjectiveWeights::default();
    let config = SwarmConfig {
        seed,
        ..SwarmConfig::default()
    };
    let out = pso_optimize(&p, &config, &w, &mut rng).unwrap();
    (out.score, brute_force_optimum(&p, &w))
}
