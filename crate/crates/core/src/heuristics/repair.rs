//! Greedy and nearby repair operators.

use crate::charging::ChargingModel;
use crate::model::{AugmentedNetwork, NodeId, Sortie};
use crate::solution::{
    canonicalize_copies, check_feasible, check_partial, prune_stations, restore_feasibility_g, Solution, VariantFlags, ViolationKind,
    EPS,
};

use super::HeuristicError;

fn insert_at(sol: &Solution, pos: usize, node: NodeId) -> Solution {
    let mut out = sol.clone();
    out.ev_route.insert(pos, node);
    out.charges.clear();
    out
}

/// Feasible version of `sol`: itself, or g(s) applied to it when only the
/// battery is the problem.
fn feasible_or_g(
    sol: Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Option<(Solution, f64)> {
    match check_partial(&sol, net, model, flags) {
        Ok(t) => Some((sol, t.completion)),
        Err(v) if v.kind() == ViolationKind::Energy => {
            let fixed = restore_feasibility_g(&sol, net)?;
            let t = check_partial(&fixed, net, model, flags).ok()?;
            Some((fixed, t.completion))
        }
        Err(_) => None,
    }
}

/// Inserts `node` on the EV route at the position with the least completion
/// time. Positions that run out of energy are priced after g(s) restores
/// feasibility.
pub fn best_insertion(
    sol: &Solution,
    node: NodeId,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Option<Solution> {
    let mut best: Option<(f64, Solution)> = None;
    for pos in 1..sol.ev_route.len() {
        if let Some((cand, completion)) = feasible_or_g(insert_at(sol, pos, node), net, model, flags) {
            if best.as_ref().is_none_or(|(c, _)| completion < *c - EPS) {
                best = Some((completion, cand));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Phase 1 of the greedy repair: drops station visits the partial solution
/// no longer needs, then inserts every removed node at least cost.
pub fn greedy_phase1(
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Solution, HeuristicError> {
    let mut sol = partial.clone();
    if !removed.is_empty() || check_partial(&sol, net, model, flags).is_err() {
        sol = feasible_or_g(sol, net, model, flags)
            .map(|(s, _)| s)
            .ok_or_else(|| HeuristicError::RepairFailure("partial solution is infeasible".into()))?;
        sol = prune_stations(&sol, net, model, flags);
    }
    for &node in removed {
        sol = best_insertion(&sol, node, net, model, flags)
            .ok_or_else(|| HeuristicError::RepairFailure(format!("no feasible position for node {node}")))?;
    }
    Ok(sol)
}

fn is_drone_endpoint(sol: &Solution, v: NodeId) -> bool {
    sol.sorties.iter().any(|s| s.launch == v || s.retrieve == v)
}

fn with_sortie(sol: &Solution, route_pos: usize, sortie: Sortie) -> Solution {
    let mut out = sol.clone();
    out.ev_route.remove(route_pos);
    out.sorties.push(sortie);
    out.sort_sorties();
    out.charges.clear();
    out
}

/// Phase 2 of the greedy repair: scans the route and turns each customer
/// into a sortie from its predecessor to its successor when the result is
/// feasible and no slower.
pub fn greedy_phase2(sol: &Solution, net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Solution {
    let mut current = sol.clone();
    let Ok(t) = check_feasible(&current, net, model, flags) else {
        return current;
    };
    let mut current_cost = t.completion;
    let mut p = 1;
    while p + 1 < current.ev_route.len() {
        let route = &current.ev_route;
        let j = route[p];
        if net.is_customer(j) && net.drone_eligible(j) && !is_drone_endpoint(&current, j) {
            let (prev, next) = (route[p - 1], route[p + 1]);
            if net.is_sortie(prev, j, next) {
                let cand = with_sortie(&current, p, Sortie::new(prev, j, next));
                if let Ok(t) = check_feasible(&cand, net, model, flags) {
                    if t.completion <= current_cost + EPS {
                        current = cand;
                        current_cost = t.completion;
                    }
                }
            }
        }
        p += 1;
    }
    current
}

/// Greedy repair: least-cost insertion, then sortie conversion, then
/// removal of redundant station visits.
pub fn repair_greedy(
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Solution, HeuristicError> {
    let sol = greedy_phase1(partial, removed, net, model, flags)?;
    let sol = greedy_phase2(&sol, net, model, flags);
    Ok(prune_stations(&sol, net, model, flags))
}

/// Phase 1 of the nearby repair: each removed node goes right before the
/// route customer closest to it (Euclidean, ties to the lowest id), or
/// before the depot end when the route has no customer. Falls back to
/// least-cost insertion when that position cannot be made feasible.
pub fn nearby_phase1(
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Solution, HeuristicError> {
    let mut sol = greedy_phase1(partial, &[], net, model, flags)?;
    for &node in removed {
        let here = net.node(node).pos;
        let target = sol
            .ev_route
            .iter()
            .enumerate()
            .filter(|(_, &v)| net.is_customer(v))
            .min_by(|(_, &a), (_, &b)| {
                here.euclidean(&net.node(a).pos)
                    .total_cmp(&here.euclidean(&net.node(b).pos))
                    .then(a.cmp(&b))
            })
            .map(|(p, _)| p)
            .unwrap_or(sol.ev_route.len() - 1);
        sol = match feasible_or_g(insert_at(&sol, target, node), net, model, flags) {
            Some((s, _)) => s,
            None => best_insertion(&sol, node, net, model, flags)
                .ok_or_else(|| HeuristicError::RepairFailure(format!("no feasible position for node {node}")))?,
        };
    }
    Ok(sol)
}

/// Route position ranges `[lo, hi]` in which the drone is on board (it may
/// be launched at `lo` and retrieved at `hi`).
fn free_segments(sol: &Solution) -> Vec<(usize, usize)> {
    let pos_of = |v: NodeId| sol.ev_route.iter().position(|&x| x == v).unwrap();
    let mut spans: Vec<(usize, usize)> = sol.sorties.iter().map(|s| (pos_of(s.launch), pos_of(s.retrieve))).collect();
    spans.sort_unstable();
    let mut out = Vec::new();
    let mut lo = 0;
    for (a, b) in spans {
        out.push((lo, a));
        lo = b;
    }
    out.push((lo, sol.ev_route.len() - 1));
    out
}

/// Best sortie inside the drone-free segments by saving, ties to the lowest
/// launch position, then retrieve position, then customer position.
fn best_segment_sortie(
    sol: &Solution,
    current_cost: f64,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Option<(f64, f64, Solution)> {
    let route = &sol.ev_route;
    let mut best: Option<(f64, f64, Solution)> = None;
    for (lo, hi) in free_segments(sol) {
        for l in lo..hi {
            for r in l + 2..=hi {
                for m in l + 1..r {
                    let j = route[m];
                    if !net.is_customer(j) || !net.drone_eligible(j) || is_drone_endpoint(sol, j) {
                        continue;
                    }
                    if !net.is_sortie(route[l], j, route[r]) {
                        continue;
                    }
                    let cand = with_sortie(sol, m, Sortie::new(route[l], j, route[r]));
                    let Ok(t) = check_feasible(&cand, net, model, flags) else {
                        continue;
                    };
                    let saving = current_cost - t.completion;
                    if saving > EPS && best.as_ref().is_none_or(|(b, _, _)| saving > *b + EPS) {
                        best = Some((saving, t.completion, cand));
                    }
                }
            }
        }
    }
    best
}

/// Phase 2 of the nearby repair: applies the sortie with the greatest saving
/// within the drone-free segments, splits, and repeats until no sortie saves
/// time.
pub fn nearby_phase2(sol: &Solution, net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Solution {
    let mut current = sol.clone();
    let Ok(t) = check_feasible(&current, net, model, flags) else {
        return current;
    };
    let mut current_cost = t.completion;
    while let Some((_, next_cost, next)) = best_segment_sortie(&current, current_cost, net, model, flags) {
        current = next;
        current_cost = next_cost;
    }
    current
}

/// Nearby repair: insertion next to the closest customer, then segment-wise
/// best-saving sorties, then removal of redundant station visits.
pub fn repair_nearby(
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Solution, HeuristicError> {
    let sol = nearby_phase1(partial, removed, net, model, flags)?;
    let sol = nearby_phase2(&sol, net, model, flags);
    let sol = prune_stations(&sol, net, model, flags);
    canonicalize_copies(&sol, net).ok_or_else(|| HeuristicError::RepairFailure("too many station visits".into()))
}
