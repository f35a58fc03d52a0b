//! Solutions, timeline simulation with minimal charging, feasibility checks
//! and station insertion to restore energy feasibility.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::ChargingModel;
use crate::model::{AugmentedNetwork, NodeId, Sortie};

/// Numerical slack used by every feasibility comparison.
pub const EPS: f64 = 1e-9;
/// Number of arcs g(s) may step back from the violating arc.
pub const BACKTRACK_LIMIT: usize = 3;
const ABSENT: usize = usize::MAX;

/// Side constraints switched on for a run. The Range variant is carried by
/// the network's per-customer budgets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantFlags {
    /// Charge launch and retrieve handling times.
    pub lrt: bool,
    /// Maximum number of customers the EV may visit during one sortie.
    pub max_leg: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub ev_route: Vec<NodeId>,
    pub sorties: Vec<Sortie>,
    /// SoC added at each visited station; filled in from a timeline.
    #[serde(default)]
    pub charges: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Structure,
    Energy,
    DroneRange,
    MaxLeg,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error("energy deficit on arc {from} -> {to}")]
    Energy { from: NodeId, to: NodeId },
    #[error("charge plan overfills the battery at node {node}")]
    ChargeLimit { node: NodeId },
    #[error("sortie {0} exceeds the drone flight budget")]
    DroneRange(Sortie),
    #[error("sortie {sortie} spans {customers} customers, limit {limit}")]
    MaxLeg { sortie: Sortie, customers: usize, limit: usize },
}

impl Violation {
    pub fn kind(&self) -> ViolationKind {
        match self {
            Violation::Structure(_) => ViolationKind::Structure,
            Violation::Energy { .. } | Violation::ChargeLimit { .. } => ViolationKind::Energy,
            Violation::DroneRange(_) => ViolationKind::DroneRange,
            Violation::MaxLeg { .. } => ViolationKind::MaxLeg,
        }
    }
}

/// Timing and battery state at one route position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stop {
    pub node: NodeId,
    pub t_arrive: f64,
    pub t_depart: f64,
    /// Drone event time at this node (launch or retrieve), if any.
    pub t_drone: Option<f64>,
    pub soc_arrive: f64,
    /// SoC after charging, before any launch drain.
    pub soc_depart_pre: f64,
    /// SoC after the launch drain.
    pub soc_depart_post: f64,
    pub charge: f64,
    pub charge_time: f64,
    /// EV idle time waiting for the drone.
    pub wait: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DroneLeg {
    pub sortie: Sortie,
    pub t_launch: f64,
    /// Departure from the customer; the drone hovers there if early.
    pub t_customer: f64,
    pub t_retrieve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    pub stops: Vec<Stop>,
    pub drone: Vec<DroneLeg>,
    pub completion: f64,
}

impl Timeline {
    pub fn total_charge_time(&self) -> f64 {
        self.stops.iter().map(|s| s.charge_time).sum()
    }

    pub fn total_wait(&self) -> f64 {
        self.stops.iter().map(|s| s.wait).sum()
    }

    /// Charge amounts keyed by station node.
    pub fn charges(&self, net: &AugmentedNetwork) -> BTreeMap<NodeId, f64> {
        self.stops
            .iter()
            .filter(|s| net.is_station(s.node))
            .map(|s| (s.node, s.charge))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,t_arrive,t_depart,soc_arrive,soc_depart,wait")?;
        for s in &self.stops {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.9},{:.9},{:.6}",
                s.node, s.t_arrive, s.t_depart, s.soc_arrive, s.soc_depart_post, s.wait
            )?;
        }
        Ok(())
    }
}

/// How station charge amounts are chosen during simulation.
#[derive(Debug, Clone, Copy)]
pub enum ChargePlan<'a> {
    /// Charge only what the next leg needs beyond the arriving SoC.
    Minimal,
    /// Charge the given amounts (missing stations charge nothing).
    Fixed(&'a BTreeMap<NodeId, f64>),
}

/// Route positions and drone events of a structurally valid solution.
#[derive(Debug, Clone)]
pub struct Layout {
    pub pos: Vec<usize>,
    pub launch_at: Vec<Option<usize>>,
    pub retrieve_at: Vec<Option<usize>>,
}

impl Layout {
    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.pos.get(node).copied().filter(|&p| p != ABSENT)
    }
}

fn structure(msg: impl Into<String>) -> Violation {
    Violation::Structure(msg.into())
}

/// Checks the structural invariants and returns positional lookups.
pub fn validate_structure(sol: &Solution, net: &AugmentedNetwork) -> Result<Layout, Violation> {
    validate_layout(sol, net, true)
}

fn validate_layout(sol: &Solution, net: &AugmentedNetwork, require_cover: bool) -> Result<Layout, Violation> {
    let n_nodes = net.n_nodes();
    let route = &sol.ev_route;
    if route.len() < 2 {
        return Err(structure("route must contain both depots"));
    }
    if route[0] != net.depot_start() || route[route.len() - 1] != net.depot_end() {
        return Err(structure("route must start at the depot start and end at the depot end"));
    }
    let mut pos = vec![ABSENT; n_nodes];
    for (p, &v) in route.iter().enumerate() {
        if v >= n_nodes {
            return Err(structure(format!("unknown node {v}")));
        }
        if pos[v] != ABSENT {
            return Err(structure(format!("node {v} visited twice")));
        }
        if p > 0 && p + 1 < route.len() && (v == net.depot_start() || v == net.depot_end()) {
            return Err(structure("depot inside the route"));
        }
        pos[v] = p;
    }
    let mut launch_at = vec![None; route.len()];
    let mut retrieve_at = vec![None; route.len()];
    let mut drone_served = vec![false; n_nodes];
    for (idx, s) in sol.sorties.iter().enumerate() {
        let j = s.customer;
        if j >= n_nodes || !net.is_customer(j) {
            return Err(structure(format!("sortie {s} does not serve a customer")));
        }
        if !net.drone_eligible(j) {
            return Err(structure(format!("customer {j} cannot be served by drone")));
        }
        if pos[j] != ABSENT || drone_served[j] {
            return Err(structure(format!("customer {j} served twice")));
        }
        drone_served[j] = true;
        let (pi, pk) = match (pos.get(s.launch), pos.get(s.retrieve)) {
            (Some(&a), Some(&b)) if a != ABSENT && b != ABSENT => (a, b),
            _ => return Err(structure(format!("sortie {s} endpoints are not on the route"))),
        };
        if pi >= pk {
            return Err(structure(format!("sortie {s} retrieves before it launches")));
        }
        if launch_at[pi].is_some() {
            return Err(structure(format!("node {} launches twice", s.launch)));
        }
        if retrieve_at[pk].is_some() {
            return Err(structure(format!("node {} retrieves twice", s.retrieve)));
        }
        launch_at[pi] = Some(idx);
        retrieve_at[pk] = Some(idx);
    }
    for c in net.customer_nodes() {
        if require_cover && pos[c] == ABSENT && !drone_served[c] {
            return Err(structure(format!("customer {c} is not served")));
        }
    }
    let mut busy_until: Option<usize> = None;
    for p in 0..route.len() {
        if retrieve_at[p].is_some() {
            if launch_at[p].is_some() {
                let v = route[p];
                if !net.is_customer(v) || net.service(v) > 0.0 {
                    return Err(structure(format!(
                        "node {v} both retrieves and launches but has a dwell time"
                    )));
                }
            }
            busy_until = None;
        }
        if let Some(idx) = launch_at[p] {
            if busy_until.is_some() {
                return Err(structure(format!("sortie {} launches while the drone is away", sol.sorties[idx])));
            }
            busy_until = Some(idx);
        }
    }
    Ok(Layout { pos, launch_at, retrieve_at })
}

/// Customers strictly between a sortie's launch and retrieve positions.
pub fn customers_between(sol: &Solution, net: &AugmentedNetwork, layout: &Layout, s: &Sortie) -> usize {
    let (a, b) = (layout.pos[s.launch], layout.pos[s.retrieve]);
    sol.ev_route[a + 1..b].iter().filter(|&&v| net.is_customer(v)).count()
}

struct EnergyProfile {
    soc_arrive: Vec<f64>,
    soc_pre: Vec<f64>,
    soc_post: Vec<f64>,
    charge_from: Vec<f64>,
    charge_to: Vec<f64>,
}

fn drains(sol: &Solution, net: &AugmentedNetwork, layout: &Layout) -> Vec<f64> {
    layout
        .launch_at
        .iter()
        .map(|l| l.map_or(0.0, |idx| net.launch_drain(&sol.sorties[idx])))
        .collect()
}

/// Charge points are the depot start and every station on the route.
fn next_charge_point(route: &[NodeId], net: &AugmentedNetwork, from: usize) -> usize {
    (from + 1..route.len())
        .find(|&q| net.is_station(route[q]))
        .unwrap_or(route.len() - 1)
}

/// First arc (by route position) on which the battery runs out under the
/// minimal charging rule, if any.
pub fn first_energy_violation(sol: &Solution, net: &AugmentedNetwork, layout: &Layout) -> Option<usize> {
    let route = &sol.ev_route;
    let drain = drains(sol, net, layout);
    let mut p = 0;
    while p + 1 < route.len() {
        let q = next_charge_point(route, net, p);
        let mut need = 0.0;
        for r in p..q {
            need += drain[r] + net.ev_energy(route[r], route[r + 1]) / net.qt_s;
            if need > 1.0 + EPS {
                return Some(r);
            }
        }
        p = q;
    }
    None
}

fn energy_profile(
    sol: &Solution,
    net: &AugmentedNetwork,
    layout: &Layout,
    plan: ChargePlan<'_>,
) -> Result<EnergyProfile, Violation> {
    let route = &sol.ev_route;
    let n = route.len();
    let drain = drains(sol, net, layout);
    let arc: Vec<f64> = route.windows(2).map(|w| net.ev_energy(w[0], w[1]) / net.qt_s).collect();
    let mut prof = EnergyProfile {
        soc_arrive: vec![0.0; n],
        soc_pre: vec![0.0; n],
        soc_post: vec![0.0; n],
        charge_from: vec![0.0; n],
        charge_to: vec![0.0; n],
    };
    prof.soc_arrive[0] = 1.0;
    let mut p = 0;
    while p + 1 < n {
        let q = next_charge_point(route, net, p);
        let arriving = prof.soc_arrive[p];
        let depart = match plan {
            ChargePlan::Minimal => {
                let mut need = 0.0;
                for r in p..q {
                    need += drain[r] + arc[r];
                    if need > 1.0 + EPS {
                        return Err(Violation::Energy { from: route[r], to: route[r + 1] });
                    }
                }
                if p == 0 {
                    arriving
                } else {
                    arriving.max(need).min(1.0)
                }
            }
            ChargePlan::Fixed(amounts) => {
                let add = if p == 0 { 0.0 } else { amounts.get(&route[p]).copied().unwrap_or(0.0) };
                if add < -EPS || arriving + add > 1.0 + EPS {
                    return Err(Violation::ChargeLimit { node: route[p] });
                }
                (arriving + add.max(0.0)).min(1.0)
            }
        };
        prof.charge_from[p] = arriving;
        prof.charge_to[p] = depart;
        for r in p..q {
            let pre = if r == p { depart } else { prof.soc_arrive[r] };
            prof.soc_pre[r] = pre;
            prof.soc_post[r] = pre - drain[r];
            let next = prof.soc_post[r] - arc[r];
            if prof.soc_post[r] < -EPS || next < -EPS {
                return Err(Violation::Energy { from: route[r], to: route[r + 1] });
            }
            prof.soc_arrive[r + 1] = next.max(0.0);
        }
        p = q;
    }
    let last = n - 1;
    prof.soc_pre[last] = prof.soc_arrive[last];
    prof.soc_post[last] = prof.soc_arrive[last];
    prof.charge_from[last] = prof.soc_arrive[last];
    prof.charge_to[last] = prof.soc_arrive[last];
    Ok(prof)
}

/// Simulates the solution with minimal charging.
pub fn evaluate(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Timeline, Violation> {
    simulate(sol, net, model, flags, ChargePlan::Minimal)
}

/// Simulates the solution under a charge plan.
///
/// The EV leaves a node once served (customers) or charged (stations). At a
/// retrieve node it arrives, then waits until the drone has landed; with
/// handling times on, `launch_s` delays both vehicles after the launch node
/// and `retrieve_s` is added to both arrivals at the retrieve node. A drone
/// that reaches its customer early hovers there, so its departure from the
/// customer is pinned to the rendezvous.
pub fn simulate(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    plan: ChargePlan<'_>,
) -> Result<Timeline, Violation> {
    simulate_layout(sol, net, model, flags, plan, validate_structure(sol, net)?)
}

/// Simulates a solution that may leave customers unserved, e.g. a route
/// under construction.
pub fn evaluate_partial(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Timeline, Violation> {
    simulate_layout(sol, net, model, flags, ChargePlan::Minimal, validate_layout(sol, net, false)?)
}

fn simulate_layout(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    plan: ChargePlan<'_>,
    layout: Layout,
) -> Result<Timeline, Violation> {
    let prof = energy_profile(sol, net, &layout, plan)?;
    let route = &sol.ev_route;
    let n = route.len();
    let (s_l, s_r) = if flags.lrt { (net.launch_s, net.retrieve_s) } else { (0.0, 0.0) };

    let mut stops = Vec::with_capacity(n);
    let mut drone_ready = vec![0.0; sol.sorties.len()];
    let mut t_launch = vec![0.0; sol.sorties.len()];
    let mut t_retrieve = vec![0.0; sol.sorties.len()];
    let mut prev_depart = 0.0;
    for p in 0..n {
        let v = route[p];
        let mut t_arrive = 0.0;
        let mut wait = 0.0;
        let mut t_drone = None;
        if p > 0 {
            let handling = if layout.launch_at[p - 1].is_some() { s_l } else { 0.0 };
            let ev_ready = prev_depart + net.ev_time(route[p - 1], v) + handling;
            t_arrive = ev_ready;
            if let Some(idx) = layout.retrieve_at[p] {
                let s = &sol.sorties[idx];
                let drone_at = drone_ready[idx] + net.drone_time(s.customer, v) + s_r;
                let ev_at = ev_ready + s_r;
                t_arrive = ev_at.max(drone_at);
                wait = (drone_at - ev_at).max(0.0);
                t_retrieve[idx] = t_arrive;
                t_drone = Some(t_arrive);
            }
        }
        let (charge, charge_time) = if net.is_station(v) {
            let (a, b) = (prof.charge_from[p], prof.charge_to[p]);
            let dur = model
                .charge_duration(a, b)
                .map_err(|_| Violation::ChargeLimit { node: v })?;
            (b - a, dur)
        } else {
            (0.0, 0.0)
        };
        let dwell = if net.is_customer(v) { net.service(v) } else { charge_time };
        let t_depart = t_arrive + dwell;
        if let Some(idx) = layout.launch_at[p] {
            let s = &sol.sorties[idx];
            t_launch[idx] = t_depart;
            drone_ready[idx] = t_depart + s_l + net.drone_time(v, s.customer) + net.service(s.customer);
            t_drone = Some(t_depart);
        }
        stops.push(Stop {
            node: v,
            t_arrive,
            t_depart,
            t_drone,
            soc_arrive: prof.soc_arrive[p],
            soc_depart_pre: prof.soc_pre[p],
            soc_depart_post: prof.soc_post[p],
            charge,
            charge_time,
            wait,
        });
        prev_depart = t_depart;
    }

    let mut drone = Vec::with_capacity(sol.sorties.len());
    for (idx, s) in sol.sorties.iter().enumerate() {
        let t_customer = t_retrieve[idx] - s_r - net.drone_time(s.customer, s.retrieve);
        let flight = (t_retrieve[idx] - s_r) - t_customer + net.drone_time(s.launch, s.customer);
        if flight > net.budget(s.customer) + EPS {
            return Err(Violation::DroneRange(*s));
        }
        drone.push(DroneLeg { sortie: *s, t_launch: t_launch[idx], t_customer, t_retrieve: t_retrieve[idx] });
    }
    let completion = stops[n - 1].t_arrive;
    Ok(Timeline { stops, drone, completion })
}

/// Full feasibility check: structure, drone budgets, the leg-length limit and
/// energy, reported in that order.
pub fn check_feasible(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Timeline, Violation> {
    check_with(sol, net, model, flags, true)
}

/// [`check_feasible`] without the requirement that every customer is served.
pub fn check_partial(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
) -> Result<Timeline, Violation> {
    check_with(sol, net, model, flags, false)
}

fn check_with(
    sol: &Solution,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    require_cover: bool,
) -> Result<Timeline, Violation> {
    let layout = validate_layout(sol, net, require_cover)?;
    for s in &sol.sorties {
        if !net.is_sortie(s.launch, s.customer, s.retrieve) {
            return Err(Violation::DroneRange(*s));
        }
    }
    if let Some(limit) = flags.max_leg {
        for s in &sol.sorties {
            let customers = customers_between(sol, net, &layout, s);
            if customers > limit {
                return Err(Violation::MaxLeg { sortie: *s, customers, limit });
            }
        }
    }
    simulate_layout(sol, net, model, flags, ChargePlan::Minimal, layout)
}

/// Completion time, or `None` when infeasible.
pub fn cost(sol: &Solution, net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Option<f64> {
    check_feasible(sol, net, model, flags).ok().map(|t| t.completion)
}

/// Completion time of a possibly partial solution, or `None` when infeasible.
pub fn partial_cost(sol: &Solution, net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Option<f64> {
    check_partial(sol, net, model, flags).ok().map(|t| t.completion)
}

impl Solution {
    /// EV-only solution visiting `interior` between the depots.
    pub fn ev_only(net: &AugmentedNetwork, interior: &[NodeId]) -> Self {
        let mut ev_route = Vec::with_capacity(interior.len() + 2);
        ev_route.push(net.depot_start());
        ev_route.extend_from_slice(interior);
        ev_route.push(net.depot_end());
        Solution { ev_route, sorties: Vec::new(), charges: BTreeMap::new() }
    }

    /// Customers on the EV route, in route order.
    pub fn route_customers(&self, net: &AugmentedNetwork) -> Vec<NodeId> {
        self.ev_route.iter().copied().filter(|&v| net.is_customer(v)).collect()
    }

    pub fn drone_customers(&self) -> Vec<NodeId> {
        self.sorties.iter().map(|s| s.customer).collect()
    }

    /// Copies the charge amounts of a timeline into `charges`.
    pub fn with_charges(mut self, timeline: &Timeline, net: &AugmentedNetwork) -> Self {
        self.charges = timeline.charges(net);
        self
    }

    /// Sorts sorties by launch position.
    pub fn sort_sorties(&mut self) {
        let mut pos = std::collections::HashMap::new();
        for (p, &v) in self.ev_route.iter().enumerate() {
            pos.insert(v, p);
        }
        self.sorties
            .sort_by_key(|s| (pos.get(&s.launch).copied().unwrap_or(usize::MAX), s.customer));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Relabels station copies so that, per station, visits in route order use
/// copies 0, 1, ... Returns `None` if some station is visited more than
/// `m` times.
pub fn canonicalize_copies(sol: &Solution, net: &AugmentedNetwork) -> Option<Solution> {
    let mut next_copy = vec![0usize; net.n_stations()];
    let mut map: Vec<Option<NodeId>> = vec![None; net.n_nodes()];
    let mut ev_route = Vec::with_capacity(sol.ev_route.len());
    for &v in &sol.ev_route {
        match net.parent_station(v) {
            Some(st) => {
                let copy = next_copy[st];
                if copy >= net.copies() {
                    return None;
                }
                next_copy[st] += 1;
                let fresh = net.station_copy(st, copy);
                map[v].get_or_insert(fresh);
                ev_route.push(fresh);
            }
            None => ev_route.push(v),
        }
    }
    let remap = |v: NodeId| map.get(v).copied().flatten().unwrap_or(v);
    Some(Solution {
        ev_route,
        sorties: sol
            .sorties
            .iter()
            .map(|s| Sortie::new(remap(s.launch), s.customer, remap(s.retrieve)))
            .collect(),
        charges: sol.charges.iter().map(|(&k, &v)| (remap(k), v)).collect(),
    })
}

/// Inserts a visit to `station` before route position `pos`, using a free
/// copy. `None` if all copies are already on the route.
pub fn insert_station(sol: &Solution, net: &AugmentedNetwork, pos: usize, station: usize) -> Option<Solution> {
    let used = sol
        .ev_route
        .iter()
        .filter(|&&v| net.parent_station(v) == Some(station))
        .count();
    if used >= net.copies() || pos == 0 || pos >= sol.ev_route.len() {
        return None;
    }
    let free = (0..net.copies())
        .map(|c| net.station_copy(station, c))
        .find(|v| !sol.ev_route.contains(v))?;
    let mut out = sol.clone();
    out.ev_route.insert(pos, free);
    out.charges.clear();
    canonicalize_copies(&out, net)
}

/// Station nearest (by EV travel time) to `node`, skipping `exclude`; ties
/// go to the lowest station index. Only stations with a free copy count.
fn nearest_station(sol: &Solution, net: &AugmentedNetwork, node: NodeId, exclude: &[usize]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for st in 0..net.n_stations() {
        if exclude.contains(&st) {
            continue;
        }
        let used = sol
            .ev_route
            .iter()
            .filter(|&&v| net.parent_station(v) == Some(st))
            .count();
        if used >= net.copies() {
            continue;
        }
        let d = net.ev_time(node, net.station_copy(st, 0));
        if best.is_none_or(|(bd, _)| d < bd - EPS) {
            best = Some((d, st));
        }
    }
    best.map(|(_, st)| st)
}

/// g(s): inserts stations around the first energy-violating arc. Tries the
/// station nearest the arc's tail on that arc, then steps back up to
/// [`BACKTRACK_LIMIT`] arcs trying the station nearest each earlier node or
/// the first choice. An insertion counts as progress when the first violation
/// moves past the inserted station; the procedure then repeats on the next
/// violation. Returns `None` when no insertion makes progress.
pub fn restore_feasibility_g(sol: &Solution, net: &AugmentedNetwork) -> Option<Solution> {
    let mut current = sol.clone();
    loop {
        let layout = validate_layout(&current, net, false).ok()?;
        let Some(arc) = first_energy_violation(&current, net, &layout) else {
            current.charges.clear();
            return Some(current);
        };
        current = g_step(&current, net, arc)?;
    }
}

fn g_step(sol: &Solution, net: &AugmentedNetwork, arc: usize) -> Option<Solution> {
    let route = &sol.ev_route;
    let exclude_for = |p: usize| -> Vec<usize> {
        [route.get(p), route.get(p + 1)]
            .into_iter()
            .flatten()
            .filter_map(|&v| net.parent_station(v))
            .collect()
    };
    let first = nearest_station(sol, net, route[arc], &exclude_for(arc))?;
    for back in 0..=BACKTRACK_LIMIT {
        if back > arc {
            break;
        }
        let a = arc - back;
        let mut options = Vec::new();
        if back == 0 {
            options.push(first);
        } else {
            let excl = exclude_for(a);
            if let Some(st) = nearest_station(sol, net, route[a], &excl) {
                options.push(st);
            }
            if !options.contains(&first) && !excl.contains(&first) {
                options.push(first);
            }
        }
        for st in options {
            let Some(cand) = insert_station(sol, net, a + 1, st) else {
                continue;
            };
            let Ok(layout) = validate_layout(&cand, net, false) else {
                continue;
            };
            match first_energy_violation(&cand, net, &layout) {
                None => return Some(cand),
                Some(next) if next > a + 1 => return Some(cand),
                Some(_) => {}
            }
        }
    }
    None
}

/// Removes station visits one at a time while the solution stays feasible
/// and does not get slower.
pub fn prune_stations(sol: &Solution, net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Solution {
    let Some(mut best_cost) = partial_cost(sol, net, model, flags) else {
        return sol.clone();
    };
    let mut current = sol.clone();
    let mut p = 1;
    while p + 1 < current.ev_route.len() {
        let v = current.ev_route[p];
        let used_by_drone = current.sorties.iter().any(|s| s.launch == v || s.retrieve == v);
        if net.is_station(v) && !used_by_drone {
            let mut cand = current.clone();
            cand.ev_route.remove(p);
            cand.charges.clear();
            if let Some(cand) = canonicalize_copies(&cand, net) {
                if let Some(c) = partial_cost(&cand, net, model, flags) {
                    if c <= best_cost + EPS {
                        best_cost = c;
                        current = cand;
                        continue;
                    }
                }
            }
        }
        p += 1;
    }
    current
}
