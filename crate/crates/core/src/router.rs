//! Cost-minimal grid paths and nearest-neighbour survivor tours.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dynamics::WorldState;
use crate::error::Result;
use crate::grid::{Cell, NEIGHBORS8};
use crate::scenario::VehicleClass;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Per-cell traversal time in seconds for one vehicle class; `INFINITY`
/// marks impassable cells. Entering a cell costs its value, diagonally √2
/// times its value.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    side: usize,
    costs: Vec<f64>,
}

impl CostMap {
    pub fn new(side: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), side * side, "cost map size");
        debug_assert!(costs.iter().all(|&c| c > 0.0), "costs must be positive");
        CostMap { side, costs }
    }

    pub fn uniform(side: usize, cost: f64) -> Self {
        CostMap::new(side, vec![cost; side * side])
    }

    /// Traversal times for a vehicle at the world's current tick. Ground
    /// vehicles travel at full speed on roads and half speed elsewhere.
    pub fn for_vehicle(world: &WorldState, class: VehicleClass, speed_kmh: f64) -> Self {
        let side = world.side();
        let metres = world.grid.cell_size_m;
        let full = metres / (speed_kmh / 3.6);
        let costs = match class {
            VehicleClass::Drone => vec![full; side * side],
            VehicleClass::Ground => (0..side * side)
                .map(|i| {
                    if world.ground_blocked(i) {
                        f64::INFINITY
                    } else if world.terrain.road[i] {
                        full
                    } else {
                        2.0 * full
                    }
                })
                .collect(),
        };
        CostMap { side, costs }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn cost(&self, cell: Cell) -> f64 {
        self.costs[cell.index(self.side)]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    #[inline]
    pub fn is_passable(&self, cell: Cell) -> bool {
        self.cost(cell).is_finite()
    }

    /// Time to step from `from` into the 8-adjacent cell `to`.
    #[inline]
    pub fn step_cost(&self, from: Cell, to: Cell) -> f64 {
        let c = self.cost(to);
        if from.x != to.x && from.y != to.y {
            c * SQRT2
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Cells from source to destination inclusive; empty when they coincide.
    pub cells: Vec<Cell>,
    pub cost: f64,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    cost: f64,
    seq: u64,
    node: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (cost, insertion order).
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source travel times with predecessor links.
#[derive(Debug, Clone)]
pub struct DistanceField {
    side: usize,
    pub dist: Vec<f64>,
    parent: Vec<u32>,
}

impl DistanceField {
    #[inline]
    pub fn to(&self, cell: Cell) -> f64 {
        self.dist[cell.index(self.side)]
    }

    /// Walks predecessor links back from `dst`.
    pub fn path_to(&self, dst: Cell) -> Option<Vec<Cell>> {
        let mut i = dst.index(self.side);
        if !self.dist[i].is_finite() {
            return None;
        }
        let mut cells = vec![dst];
        while self.parent[i] != u32::MAX {
            i = self.parent[i] as usize;
            cells.push(Cell::from_index(i, self.side));
        }
        cells.reverse();
        Some(cells)
    }
}

fn search(costs: &CostMap, src: Cell, stop_at: Option<Cell>) -> DistanceField {
    let side = costs.side;
    let n = side * side;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let s = src.index(side);
    dist[s] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        seq,
        node: s as u32,
    });
    let stop = stop_at.map(|c| c.index(side));
    while let Some(Entry { cost, node, .. }) = heap.pop() {
        let u = node as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        if Some(u) == stop {
            break;
        }
        let here = Cell::from_index(u, side);
        for &(dx, dy) in &NEIGHBORS8 {
            let Some(next) = here.offset(dx, dy, side) else {
                continue;
            };
            let v = next.index(side);
            if done[v] {
                continue;
            }
            let step = costs.step_cost(here, next);
            if !step.is_finite() {
                continue;
            }
            let candidate = cost + step;
            if candidate < dist[v] {
                dist[v] = candidate;
                parent[v] = u as u32;
                seq += 1;
                heap.push(Entry {
                    cost: candidate,
                    seq,
                    node: v as u32,
                });
            }
        }
    }
    DistanceField { side, dist, parent }
}

/// Travel times from `src` to every cell. The source may itself be
/// impassable (a stranded vehicle can still drive out).
pub fn distance_field(costs: &CostMap, src: Cell) -> Result<DistanceField> {
    src.check(costs.side)?;
    Ok(search(costs, src, None))
}

/// Travel times from `src` to each of `dsts`, stopping the search once all
/// of them are settled. Unreachable destinations get `INFINITY`.
pub fn travel_times(costs: &CostMap, src: Cell, dsts: &[Cell]) -> Vec<f64> {
    let side = costs.side;
    let n = side * side;
    let mut wanted = vec![false; n];
    let mut left = 0usize;
    for d in dsts {
        let i = d.index(side);
        if !wanted[i] {
            wanted[i] = true;
            left += 1;
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let s = src.index(side);
    dist[s] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        seq,
        node: s as u32,
    });
    while let Some(Entry { cost, node, .. }) = heap.pop() {
        let u = node as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        if wanted[u] {
            left -= 1;
            if left == 0 {
                break;
            }
        }
        let here = Cell::from_index(u, side);
        for &(dx, dy) in &NEIGHBORS8 {
            let Some(next) = here.offset(dx, dy, side) else {
                continue;
            };
            let v = next.index(side);
            if done[v] {
                continue;
            }
            let candidate = cost + costs.step_cost(here, next);
            if candidate < dist[v] {
                dist[v] = candidate;
                seq += 1;
                heap.push(Entry {
                    cost: candidate,
                    seq,
                    node: v as u32,
                });
            }
        }
    }
    dsts.iter()
        .map(|d| {
            let i = d.index(side);
            if done[i] {
                dist[i]
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Minimal-cost 8-connected path, or `None` when `dst` is unreachable.
pub fn shortest_path(costs: &CostMap, src: Cell, dst: Cell) -> Result<Option<Path>> {
    src.check(costs.side)?;
    dst.check(costs.side)?;
    if src == dst {
        return Ok(Some(Path {
            cells: Vec::new(),
            cost: 0.0,
        }));
    }
    let field = search(costs, src, Some(dst));
    Ok(field.path_to(dst).map(|cells| Path {
        cost: field.to(dst),
        cells,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub cell: Cell,
    /// Indices into the input target list served at this cell.
    pub targets: Vec<usize>,
    /// Cumulative travel time from the start.
    pub arrival_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tour {
    pub visits: Vec<Visit>,
    pub skipped: Vec<usize>,
}

/// Greedy nearest-neighbour tour; co-located targets share one visit and
/// unreachable targets end up in `skipped`.
pub fn route_tour(costs: &CostMap, start: Cell, targets: &[Cell]) -> Result<Tour> {
    start.check(costs.side)?;
    for t in targets {
        t.check(costs.side)?;
    }
    let mut pending: Vec<usize> = (0..targets.len()).collect();
    let mut tour = Tour::default();
    let mut here = start;
    let mut clock = 0.0;
    while !pending.is_empty() {
        let field = search(costs, here, None);
        let next = pending
            .iter()
            .copied()
            .filter(|&t| field.to(targets[t]).is_finite())
            .min_by(|&a, &b| {
                field
                    .to(targets[a])
                    .total_cmp(&field.to(targets[b]))
                    .then(a.cmp(&b))
            });
        let Some(t) = next else {
            tour.skipped.append(&mut pending);
            break;
        };
        let cell = targets[t];
        clock += field.to(cell);
        let (served, rest): (Vec<usize>, Vec<usize>) =
            pending.into_iter().partition(|&i| targets[i] == cell);
        pending = rest;
        tour.visits.push(Visit {
            cell,
            targets: served,
            arrival_s: clock,
        });
        here = cell;
    }
    tour.skipped.sort_unstable();
    Ok(tour)
}
