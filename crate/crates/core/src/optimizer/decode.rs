use crate::error::{Error, Result};

use super::{DecisionProblem, ObjectiveWeights, Plan, RouteStop, IDLE_THRESHOLD};

#[derive(Debug, Clone, Copy)]
struct Candidate {
    arrival: f64,
    target: usize,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    weighted_covered: f64,
    time_sum: f64,
    reached: usize,
}

/// Reusable decoder and objective for one problem. Holds scratch buffers so
/// the hot evaluation loop does not allocate.
pub struct Evaluator<'a> {
    problem: &'a DecisionProblem,
    weights: ObjectiveWeights,
    assignment: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
    position: Vec<Option<usize>>,
    clock: Vec<f64>,
    best: Vec<Option<Candidate>>,
    taken: Vec<bool>,
    denominator: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a DecisionProblem, weights: ObjectiveWeights) -> Self {
        let v = problem.vehicle_count();
        Evaluator {
            problem,
            weights,
            assignment: vec![None; v],
            members: vec![Vec::new(); problem.zone_count()],
            position: vec![None; v],
            clock: vec![0.0; v],
            best: vec![None; v],
            taken: vec![false; problem.targets.len()],
            denominator: problem.total_weighted_survivors(),
        }
    }

    pub fn problem(&self) -> &DecisionProblem {
        self.problem
    }

    /// Objective value of the plan encoded by `x`.
    pub fn score(&mut self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.problem.dimension());
        self.assign(x);
        let tally = self.route(None);
        self.objective(tally)
    }

    /// Full decode of `x` into a plan.
    pub fn decode(&mut self, x: &[f64]) -> Plan {
        let p = self.problem;
        self.assign(x);
        let mut routes = vec![Vec::new(); p.vehicle_count()];
        self.route(Some(&mut routes));
        let k = p.zone_count();
        let keys = &x[p.vehicle_count() * k..];
        let total: f64 = keys.iter().sum();
        let supply_share = if total > 0.0 {
            keys.iter().map(|s| s / total).collect()
        } else {
            vec![0.0; k]
        };
        Plan {
            assignment: self.assignment.clone(),
            supply_share,
            routes,
        }
    }

    /// Routes for an explicit assignment (used by the greedy planner).
    pub(crate) fn routes_for(&mut self, assignment: &[Option<usize>]) -> Vec<Vec<RouteStop>> {
        self.assignment.copy_from_slice(assignment);
        self.rebuild_members();
        let mut routes = vec![Vec::new(); self.problem.vehicle_count()];
        self.route(Some(&mut routes));
        routes
    }

    fn assign(&mut self, x: &[f64]) {
        let p = self.problem;
        let k = p.zone_count();
        for v in 0..p.vehicle_count() {
            let keys = &x[v * k..(v + 1) * k];
            let mut choice = None;
            let mut top = f64::NEG_INFINITY;
            for (z, &key) in keys.iter().enumerate() {
                if key > top {
                    top = key;
                    choice = Some(z);
                }
            }
            if top < IDLE_THRESHOLD {
                choice = None;
            }
            // Repair: a zone the vehicle cannot reach means idle.
            self.assignment[v] = choice.filter(|&z| p.can_reach(v, z));
        }
        self.rebuild_members();
    }

    fn rebuild_members(&mut self) {
        for m in self.members.iter_mut() {
            m.clear();
        }
        for (v, a) in self.assignment.iter().enumerate() {
            if let Some(z) = a {
                self.members[*z].push(v);
            }
        }
    }

    fn nearest(&self, z: usize, v: usize) -> Option<Candidate> {
        let p = self.problem;
        let class = p.vehicles[v].class;
        let mut best: Option<Candidate> = None;
        for t in p.zones[z].targets() {
            if self.taken[t] {
                continue;
            }
            let leg = match self.position[v] {
                None => p.vehicle_time(v, t),
                Some(from) => p.target_time(z, class, from, t),
            };
            let arrival = self.clock[v] + leg;
            if arrival.is_finite() && best.is_none_or(|b| arrival < b.arrival) {
                best = Some(Candidate { arrival, target: t });
            }
        }
        best
    }

    /// Earliest-arrival insertion: within each zone, repeatedly extend the
    /// vehicle that can reach an unvisited target soonest.
    fn route(&mut self, mut record: Option<&mut Vec<Vec<RouteStop>>>) -> Tally {
        let p = self.problem;
        let horizon = p.horizon_s;
        let mut tally = Tally::default();
        for z in 0..p.zone_count() {
            if self.members[z].is_empty() {
                continue;
            }
            let members = std::mem::take(&mut self.members[z]);
            for t in p.zones[z].targets() {
                self.taken[t] = false;
            }
            for &v in &members {
                self.position[v] = None;
                self.clock[v] = 0.0;
            }
            for &v in &members {
                self.best[v] = self.nearest(z, v);
            }
            let mut covered = 0u64;
            loop {
                let mut pick: Option<(usize, Candidate)> = None;
                for &v in &members {
                    if let Some(c) = self.best[v] {
                        if pick.is_none_or(|(_, b)| c.arrival < b.arrival) {
                            pick = Some((v, c));
                        }
                    }
                }
                let Some((v, c)) = pick else { break };
                if c.arrival > horizon {
                    break;
                }
                self.taken[c.target] = true;
                self.position[v] = Some(c.target);
                self.clock[v] = c.arrival;
                covered += p.targets[c.target].survivors as u64;
                tally.time_sum += c.arrival;
                tally.reached += 1;
                if let Some(routes) = record.as_deref_mut() {
                    routes[v].push(RouteStop {
                        target: c.target,
                        arrival_s: c.arrival,
                    });
                }
                for &u in &members {
                    if u == v || self.best[u].is_some_and(|b| b.target == c.target) {
                        self.best[u] = self.nearest(z, u);
                    }
                }
            }
            tally.weighted_covered += p.zones[z].severity * covered as f64;
            self.members[z] = members;
        }
        tally
    }

    fn objective(&self, tally: Tally) -> f64 {
        objective_value(
            self.weights,
            self.problem.horizon_s,
            self.denominator,
            tally,
        )
    }
}

fn objective_value(weights: ObjectiveWeights, horizon: f64, denominator: f64, t: Tally) -> f64 {
    let time_norm = if t.reached == 0 {
        1.0
    } else {
        (t.time_sum / t.reached as f64 / horizon).clamp(0.0, 1.0)
    };
    let coverage = if denominator > 0.0 {
        (t.weighted_covered / denominator).clamp(0.0, 1.0)
    } else {
        0.0
    };
    weights.time * time_norm + weights.coverage * (1.0 - coverage)
}

/// Decodes a random-key vector into a dispatch plan.
pub fn decode_particle(x: &[f64], problem: &DecisionProblem) -> Result<Plan> {
    if x.len() != problem.dimension() {
        return Err(Error::Contract(format!(
            "position has {} keys, problem needs {}",
            x.len(),
            problem.dimension()
        )));
    }
    Ok(Evaluator::new(problem, ObjectiveWeights::default()).decode(x))
}

/// Objective of a plan, lower is better. Targets count as covered when the
/// predicted arrival falls within the planning horizon.
pub fn fitness(plan: &Plan, problem: &DecisionProblem, weights: &ObjectiveWeights) -> Result<f64> {
    let v_count = problem.vehicle_count();
    if plan.assignment.len() != v_count || plan.routes.len() != v_count {
        return Err(Error::Contract("plan does not match the vehicle roster".into()));
    }
    let mut covered = vec![0u64; problem.zone_count()];
    let mut seen = vec![false; problem.targets.len()];
    let mut tally = Tally::default();
    for (v, (assigned, route)) in plan.assignment.iter().zip(&plan.routes).enumerate() {
        let Some(z) = *assigned else {
            if !route.is_empty() {
                return Err(Error::Contract(format!("idle vehicle {v} has a route")));
            }
            continue;
        };
        if z >= problem.zone_count() {
            return Err(Error::Contract(format!("vehicle {v} assigned to unknown zone {z}")));
        }
        if !problem.can_reach(v, z) {
            return Err(Error::Contract(format!("vehicle {v} cannot reach zone {z}")));
        }
        let range = problem.zones[z].targets();
        for stop in route {
            if !range.contains(&stop.target) {
                return Err(Error::Contract(format!(
                    "vehicle {v} routed to target {} outside zone {z}",
                    stop.target
                )));
            }
            if !stop.arrival_s.is_finite() || stop.arrival_s < 0.0 {
                return Err(Error::Contract(format!("vehicle {v} has an unreachable stop")));
            }
            if std::mem::replace(&mut seen[stop.target], true) {
                continue;
            }
            if stop.arrival_s <= problem.horizon_s {
                covered[z] += problem.targets[stop.target].survivors as u64;
                tally.time_sum += stop.arrival_s;
                tally.reached += 1;
            }
        }
    }
    tally.weighted_covered = covered
        .iter()
        .zip(&problem.zones)
        .map(|(&c, z)| z.severity * c as f64)
        .sum();
    Ok(objective_value(
        *weights,
        problem.horizon_s,
        problem.total_weighted_survivors(),
        tally,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::optimizer::fixtures::small_problem;
    use crate::optimizer::{PlanTarget, PlanVehicle, ZoneInput};
    use crate::router::CostMap;
    use crate::scenario::VehicleClass;
    use proptest::prelude::*;

    const W: ObjectiveWeights = ObjectiveWeights {
        time: 0.5,
        coverage: 0.5,
    };

    #[test]
    fn no_zones_means_everyone_idles() {
        let p = DecisionProblem::new(
            vec![],
            vec![PlanVehicle {
                class: VehicleClass::Drone,
                cell: Cell::new(1, 1),
                load: 5,
            }],
            CostMap::uniform(4, 1.0),
            CostMap::uniform(4, 1.0),
            100.0,
            5,
        )
        .unwrap();
        let plan = decode_particle(&[], &p).unwrap();
        assert_eq!(plan, Plan::idle(1, 0));
        assert_eq!(fitness(&plan, &p, &W).unwrap(), 1.0);
    }

    #[test]
    fn single_vehicle_takes_its_largest_key() {
        let zone = |x| ZoneInput {
            id: 0,
            severity: 1.0,
            centroid: Cell::new(x, 0),
            targets: vec![PlanTarget {
                cell: Cell::new(x, 0),
                survivors: 1,
            }],
        };
        let p = DecisionProblem::new(
            vec![zone(2), zone(3)],
            vec![PlanVehicle {
                class: VehicleClass::Ground,
                cell: Cell::new(0, 0),
                load: 1,
            }],
            CostMap::uniform(4, 1.0),
            CostMap::uniform(4, 1.0),
            100.0,
            1,
        )
        .unwrap();
        let plan = decode_particle(&[0.9, 0.1, 0.5, 0.5], &p).unwrap();
        assert_eq!(plan.assignment, vec![Some(0)]);
    }

    #[test]
    fn keys_below_threshold_mean_idle() {
        let p = small_problem(1000.0);
        let x = [0.04, 0.01, 0.0, 0.9, 0.2, 0.3, 0.5, 0.5, 0.5];
        let plan = decode_particle(&x, &p).unwrap();
        assert_eq!(plan.assignment, vec![None, Some(0)]);
        assert!(plan.routes[0].is_empty());
    }

    #[test]
    fn unreachable_zone_is_repaired_to_idle() {
        let mut costs = vec![1.0; 16];
        // Wall off column 3 for ground vehicles.
        for y in 0..4 {
            costs[y * 4 + 2] = f64::INFINITY;
        }
        let p = DecisionProblem::new(
            vec![ZoneInput {
                id: 0,
                severity: 1.0,
                centroid: Cell::new(3, 3),
                targets: vec![PlanTarget {
                    cell: Cell::new(3, 3),
                    survivors: 2,
                }],
            }],
            vec![
                PlanVehicle {
                    class: VehicleClass::Ground,
                    cell: Cell::new(0, 0),
                    load: 1,
                },
                PlanVehicle {
                    class: VehicleClass::Drone,
                    cell: Cell::new(0, 0),
                    load: 1,
                },
            ],
            CostMap::new(4, costs),
            CostMap::uniform(4, 1.0),
            100.0,
            2,
        )
        .unwrap();
        let plan = decode_particle(&[1.0, 1.0, 0.5], &p).unwrap();
        assert_eq!(plan.assignment, vec![None, Some(0)]);
        let mut forced = plan.clone();
        forced.assignment[0] = Some(0);
        assert!(matches!(fitness(&forced, &p, &W), Err(Error::Contract(_))));
    }

    #[test]
    fn wrong_length_is_a_contract_error() {
        let p = small_problem(1000.0);
        assert!(matches!(decode_particle(&[0.5; 3], &p), Err(Error::Contract(_))));
    }

    #[test]
    fn half_coverage_at_half_horizon_scores_one_half() {
        // Two equal zones of equal size; one is reached at exactly half the
        // horizon, the other not at all.
        let zone = |id, x| ZoneInput {
            id,
            severity: 1.0,
            centroid: Cell::new(x, 0),
            targets: vec![PlanTarget {
                cell: Cell::new(x, 0),
                survivors: 4,
            }],
        };
        let p = DecisionProblem::new(
            vec![zone(0, 5), zone(1, 9)],
            vec![PlanVehicle {
                class: VehicleClass::Ground,
                cell: Cell::new(0, 0),
                load: 1,
            }],
            CostMap::uniform(10, 10.0),
            CostMap::uniform(10, 10.0),
            100.0,
            1,
        )
        .unwrap();
        let plan = decode_particle(&[1.0, 0.0, 0.5, 0.5], &p).unwrap();
        assert_eq!(plan.routes[0][0].arrival_s, 50.0);
        let f = fitness(&plan, &p, &W).unwrap();
        assert!((f - 0.5).abs() < 1e-12, "{f}");
    }

    #[test]
    fn score_matches_fitness_of_decoded_plan() {
        let p = small_problem(120.0);
        let mut ev = Evaluator::new(&p, W);
        let x = [0.3, 0.9, 0.2, 0.8, 0.1, 0.7, 0.2, 0.4, 0.6];
        let plan = ev.decode(&x);
        assert!((ev.score(&x) - fitness(&plan, &p, &W).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fitness_stays_in_unit_interval(x in prop::collection::vec(0.0f64..=1.0, 9), h in 1.0f64..500.0) {
            let p = small_problem(h);
            let plan = decode_particle(&x, &p).unwrap();
            let f = fitness(&plan, &p, &W).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn scaling_a_vehicles_keys_keeps_its_zone(
            x in prop::collection::vec(0.06f64..=1.0, 9),
            scale in 0.1f64..1.0,
        ) {
            let p = small_problem(1000.0);
            let mut y = x.clone();
            for key in &mut y[0..3] {
                *key *= scale;
            }
            let a = decode_particle(&x, &p).unwrap();
            let b = decode_particle(&y, &p).unwrap();
            // Only scaling that keeps the maximum above the idle threshold
            // preserves the argmax decision.
            if y[0..3].iter().cloned().fold(0.0, f64::max) >= IDLE_THRESHOLD {
                prop_assert_eq!(a.assignment[0], b.assignment[0]);
            }
        }
    }
}
