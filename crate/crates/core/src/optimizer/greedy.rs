use super::{DecisionProblem, Evaluator, ObjectiveWeights, Plan};

/// Severity-first dispatch without search: each zone, strongest first, takes
/// the unassigned vehicle nearest its centroid in straight-line distance
/// among those that can reach it (lowest index on ties).
pub fn greedy_plan(problem: &DecisionProblem) -> Plan {
    let v_count = problem.vehicle_count();
    let mut order: Vec<usize> = (0..problem.zone_count()).collect();
    order.sort_by(|&a, &b| {
        problem.zones[b]
            .severity
            .total_cmp(&problem.zones[a].severity)
            .then(a.cmp(&b))
    });
    let mut assignment = vec![None; v_count];
    for z in order {
        if problem.zones[z].target_count == 0 {
            continue;
        }
        let mut pick: Option<(f64, usize)> = None;
        for v in (0..v_count).filter(|&v| assignment[v].is_none()) {
            if !problem.can_reach(v, z) {
                continue;
            }
            let d = problem.vehicles[v].cell.euclidean(problem.zones[z].centroid);
            if pick.is_none_or(|(best, _)| d < best) {
                pick = Some((d, v));
            }
        }
        if let Some((_, v)) = pick {
            assignment[v] = Some(z);
        }
    }

    let total: f64 = problem.zones.iter().map(|z| z.severity).sum();
    let supply_share = problem
        .zones
        .iter()
        .map(|z| if total > 0.0 { z.severity / total } else { 0.0 })
        .collect();
    let routes = Evaluator::new(problem, ObjectiveWeights::default()).routes_for(&assignment);
    Plan {
        assignment,
        supply_share,
        routes,
    }
}
