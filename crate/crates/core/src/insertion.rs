//! Sortie insertion on a fixed EV route: choose non-overlapping sorties for a
//! set of drone customers minimising the EV's total waiting time. Used by
//! the CP repair operator.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::charging::ChargingModel;
use crate::heuristics::{greedy_phase1, greedy_phase2, remove_customers, HeuristicError};
use crate::model::{AugmentedNetwork, NodeId, Sortie};
use crate::solution::{
    check_feasible, evaluate_partial, prune_stations, restore_feasibility_g, Solution, VariantFlags, ViolationKind, EPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InsertionError {
    #[error("route is not feasible for the EV alone: {0}")]
    InfeasibleRoute(String),
    #[error("drone customer {0} is also on the route")]
    CustomerOnRoute(NodeId),
    #[error("no feasible sortie selection covers every drone customer")]
    InfeasibleSubproblem,
}

/// A sortie option: serve `customer`, launching at route position
/// `launch_pos` and retrieving at `retrieve_pos`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub customer: NodeId,
    pub launch_pos: usize,
    pub retrieve_pos: usize,
    /// Drone time from launch to landing, handling included.
    pub duration_s: f64,
    /// Delay the sortie adds to the EV.
    pub waiting_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionProblem {
    pub route: Vec<NodeId>,
    pub arrival: Vec<f64>,
    pub departure: Vec<f64>,
    pub drone_customers: Vec<NodeId>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionSelection {
    /// Indices into `InsertionProblem::candidates`.
    pub chosen: Vec<usize>,
    pub total_waiting: f64,
}

/// Enumerates every `(customer, l, r)` with `l < r` whose flight fits the
/// customer's budget (and the leg-length limit when set). The waiting of a
/// candidate is how much later the EV leaves `r` because of it: the drone's
/// lead over the EV's own travel time from `l` to `r`, plus handling times.
pub fn build_insertion_problem(
    route_solution: &Solution,
    drone_customers: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<InsertionProblem, InsertionError> {
    let ev_only = Solution { ev_route: route_solution.ev_route.clone(), sorties: Vec::new(), charges: Default::default() };
    for &j in drone_customers {
        if ev_only.ev_route.contains(&j) {
            return Err(InsertionError::CustomerOnRoute(j));
        }
    }
    let timeline =
        evaluate_partial(&ev_only, net, model, flags).map_err(|v| InsertionError::InfeasibleRoute(v.to_string()))?;
    let arrival: Vec<f64> = timeline.stops.iter().map(|s| s.t_arrive).collect();
    let departure: Vec<f64> = timeline.stops.iter().map(|s| s.t_depart).collect();
    let route = ev_only.ev_route;
    let handling = if flags.lrt { net.launch_s + net.retrieve_s } else { 0.0 };

    let mut candidates = Vec::new();
    for l in 0..route.len() {
        for r in l + 1..route.len() {
            if let Some(limit) = flags.max_leg {
                let between = route[l + 1..r].iter().filter(|&&v| net.is_customer(v)).count();
                if between > limit {
                    continue;
                }
            }
            for &j in drone_customers {
                if !net.is_sortie(route[l], j, route[r]) {
                    continue;
                }
                let drone = net.drone_time(route[l], j) + net.service(j) + net.drone_time(j, route[r]);
                let truck = arrival[r] - departure[l];
                candidates.push(Candidate {
                    customer: j,
                    launch_pos: l,
                    retrieve_pos: r,
                    duration_s: drone + handling,
                    waiting_s: (drone - truck).max(0.0) + handling,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        (a.launch_pos, a.retrieve_pos, a.customer).cmp(&(b.launch_pos, b.retrieve_pos, b.customer))
    });
    Ok(InsertionProblem { route, arrival, departure, drone_customers: drone_customers.to_vec(), candidates })
}

impl InsertionProblem {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "customer,l,r,duration_s,waiting_s")?;
        for c in &self.candidates {
            writeln!(out, "{},{},{},{:.6},{:.6}", c.customer, c.launch_pos, c.retrieve_pos, c.duration_s, c.waiting_s)?;
        }
        Ok(())
    }
}

struct Search<'a> {
    p: &'a InsertionProblem,
    bit: HashMap<NodeId, usize>,
    by_launch: Vec<Vec<usize>>,
    min_wait: Vec<f64>,
    full: u64,
    best: f64,
    best_choice: Vec<usize>,
    stack: Vec<usize>,
    seen: HashMap<(usize, u64), f64>,
}

impl Search<'_> {
    fn lower_bound(&self, mask: u64) -> f64 {
        (0..self.min_wait.len())
            .filter(|&b| mask & (1 << b) == 0)
            .map(|b| self.min_wait[b])
            .sum()
    }

    fn dfs(&mut self, pos: usize, mask: u64, cost: f64) {
        if mask == self.full {
            if cost < self.best - EPS {
                self.best = cost;
                self.best_choice = self.stack.clone();
            }
            return;
        }
        if pos + 1 >= self.p.route.len() || cost + self.lower_bound(mask) >= self.best - EPS {
            return;
        }
        match self.seen.get(&(pos, mask)) {
            Some(&c) if c <= cost + EPS => return,
            _ => {
                self.seen.insert((pos, mask), cost);
            }
        }
        for k in 0..self.by_launch[pos].len() {
            let idx = self.by_launch[pos][k];
            let cand = self.p.candidates[idx];
            let b = 1u64 << self.bit[&cand.customer];
            if mask & b != 0 {
                continue;
            }
            self.stack.push(idx);
            self.dfs(cand.retrieve_pos + 1, mask | b, cost + cand.waiting_s);
            self.stack.pop();
        }
        self.dfs(pos + 1, mask, cost);
    }
}

/// Exact depth-first branch and bound over launch positions. Selected
/// intervals `[l, r]` are pairwise disjoint, endpoints included. Lower
/// bound: cost so far plus each uncovered customer's cheapest candidate.
/// A `(position, covered set)` state reached again at no lower cost is
/// pruned.
pub fn solve_insertion(p: &InsertionProblem) -> Result<InsertionSelection, InsertionError> {
    if p.drone_customers.is_empty() {
        return Ok(InsertionSelection { chosen: Vec::new(), total_waiting: 0.0 });
    }
    if p.drone_customers.len() > 63 {
        return Err(InsertionError::InfeasibleSubproblem);
    }
    let bit: HashMap<NodeId, usize> = p.drone_customers.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut min_wait = vec![f64::INFINITY; p.drone_customers.len()];
    let mut by_launch = vec![Vec::new(); p.route.len()];
    for (idx, c) in p.candidates.iter().enumerate() {
        let b = bit[&c.customer];
        min_wait[b] = min_wait[b].min(c.waiting_s);
        by_launch[c.launch_pos].push(idx);
    }
    if min_wait.iter().any(|w| w.is_infinite()) {
        return Err(InsertionError::InfeasibleSubproblem);
    }
    let mut search = Search {
        p,
        bit,
        by_launch,
        min_wait,
        full: (1u64 << p.drone_customers.len()) - 1,
        best: f64::INFINITY,
        best_choice: Vec::new(),
        stack: Vec::new(),
        seen: HashMap::new(),
    };
    search.dfs(0, 0, 0.0);
    if search.best.is_infinite() {
        return Err(InsertionError::InfeasibleSubproblem);
    }
    let mut chosen = search.best_choice;
    chosen.sort_unstable();
    Ok(InsertionSelection { chosen, total_waiting: search.best })
}

/// Attaches the selected sorties to the route.
pub fn graft(p: &InsertionProblem, sel: &InsertionSelection) -> Solution {
    let sorties = sel
        .chosen
        .iter()
        .map(|&i| {
            let c = p.candidates[i];
            Sortie::new(p.route[c.launch_pos], c.customer, p.route[c.retrieve_pos])
        })
        .collect();
    Solution { ev_route: p.route.clone(), sorties, charges: Default::default() }
}

/// CP repair: inserts the removed nodes greedily, dissolves every sortie,
/// moves up to three random route customers to the drone pool, and
/// re-assigns the pool optimally with [`solve_insertion`]. Falls back to
/// route insertion plus greedy sortie conversion when the subproblem has no
/// cover or the grafted solution cannot be made feasible.
pub fn repair_cp<R: Rng>(
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    rng: &mut R,
) -> Result<Solution, HeuristicError> {
    let inserted = greedy_phase1(partial, removed, net, model, flags)?;
    let mut pool: Vec<NodeId> = inserted.drone_customers();
    let mut base = Solution { ev_route: inserted.ev_route.clone(), sorties: Vec::new(), charges: Default::default() };

    let eligible: Vec<NodeId> = base
        .ev_route
        .iter()
        .copied()
        .filter(|&v| net.is_customer(v) && net.drone_eligible(v))
        .collect();
    let extra = rng.gen_range(0..=eligible.len().min(3));
    let mut eligible = eligible;
    let mut picks = Vec::with_capacity(extra);
    for _ in 0..extra {
        let idx = rng.gen_range(0..eligible.len());
        picks.push(eligible.swap_remove(idx));
    }
    if !picks.is_empty() {
        base = remove_customers(&base, net, &picks).0;
        pool.extend(picks);
    }

    let fallback = |base: &Solution, pool: &[NodeId]| -> Result<Solution, HeuristicError> {
        let sol = greedy_phase1(base, pool, net, model, flags)?;
        let sol = greedy_phase2(&sol, net, model, flags);
        Ok(prune_stations(&sol, net, model, flags))
    };

    let grafted = build_insertion_problem(&base, &pool, net, model, flags)
        .and_then(|p| solve_insertion(&p).map(|sel| graft(&p, &sel)));
    let Ok(grafted) = grafted else {
        return fallback(&base, &pool);
    };
    let feasible = match check_feasible(&grafted, net, model, flags) {
        Ok(_) => Some(grafted),
        Err(v) if v.kind() == ViolationKind::Energy => restore_feasibility_g(&grafted, net)
            .filter(|s| check_feasible(s, net, model, flags).is_ok()),
        Err(_) => None,
    };
    match feasible {
        Some(sol) => Ok(prune_stations(&sol, net, model, flags)),
        None => fallback(&base, &pool),
    }
}
