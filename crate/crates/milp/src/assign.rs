//! Variable assignments: encoding a solution, decoding an assignment and
//! measuring constraint residuals.

use std::collections::BTreeMap;

use evtspd_core::charging::ChargingModel;
use evtspd_core::model::{AugmentedNetwork, NodeId, Sortie};
use evtspd_core::solution::{check_feasible, Solution};
use serde::Serialize;

use crate::model::{ModelSpec, Sense, Variant};
use crate::MilpError;

/// Variable name to value. Missing variables read as zero.
pub type Assignment = BTreeMap<String, f64>;

fn val(a: &Assignment, name: &str) -> f64 {
    a.get(name).copied().unwrap_or(0.0)
}

/// Writes a feasible solution as values for every model variable. Nodes off
/// the route get zero battery and time values, except drone customers whose
/// drone clock holds the departure from the customer.
pub fn encode_solution(
    spec: &ModelSpec,
    net: &AugmentedNetwork,
    model: &ChargingModel,
    sol: &Solution,
) -> Result<Assignment, MilpError> {
    let timeline = check_feasible(sol, net, model, spec.flags).map_err(|v| MilpError::Infeasible(v.to_string()))?;
    let n = net.n_nodes();
    let start = net.depot_start();
    let mut a: Assignment = spec.variables.iter().map(|v| (v.name.clone(), 0.0)).collect();
    let set = |a: &mut Assignment, name: String, v: f64| {
        if let Some(slot) = a.get_mut(&name) {
            *slot = v;
        }
    };

    for w in sol.ev_route.windows(2) {
        set(&mut a, format!("x_{}_{}", w[0], w[1]), 1.0);
    }
    for s in &sol.sorties {
        set(&mut a, format!("y_{}_{}_{}", s.launch, s.customer, s.retrieve), 1.0);
    }

    // Positions: route order first, then everything else by id.
    let mut u = vec![0usize; n];
    let mut next = 1;
    for &v in &sol.ev_route {
        u[v] = next;
        next += 1;
    }
    for (v, slot) in u.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = next;
            next += 1;
        }
        set(&mut a, format!("u_{v}"), *slot as f64);
    }
    for i in 1..net.depot_end() {
        for j in 1..net.depot_end() {
            if i != j && u[i] < u[j] {
                set(&mut a, format!("p_{i}_{j}"), 1.0);
            }
        }
    }
    for j in net.retrieve_nodes() {
        set(&mut a, format!("p_{start}_{j}"), 1.0);
    }

    let mut customers_seen = 0usize;
    for stop in &timeline.stops {
        let v = stop.node;
        if net.is_customer(v) {
            customers_seen += 1;
        }
        set(&mut a, format!("ba_{v}"), stop.soc_arrive);
        set(&mut a, format!("bd1_{v}"), stop.soc_depart_pre);
        set(&mut a, format!("bd2_{v}"), stop.soc_depart_post);
        set(&mut a, format!("ta_{v}"), stop.t_arrive);
        set(&mut a, format!("td_{v}"), stop.t_depart);
        set(&mut a, format!("q_{v}"), customers_seen as f64);
        if spec.variant == Variant::Pp && net.is_station(v) {
            let seg = model.segment_for_soc(stop.soc_arrive) + 1;
            set(&mut a, format!("alpha_{seg}_{v}"), 1.0);
            set(&mut a, format!("tba_{v}"), model.soc_to_time(stop.soc_arrive));
        }
    }
    for v in net.customer_nodes() {
        if !sol.ev_route.contains(&v) {
            set(&mut a, format!("td_{v}"), net.service(v));
        }
    }
    if spec.variant == Variant::Pp {
        for v in net.station_nodes() {
            if !sol.ev_route.contains(&v) {
                set(&mut a, format!("alpha_1_{v}"), 1.0);
            }
        }
    }
    for leg in &timeline.drone {
        let s = leg.sortie;
        set(&mut a, format!("tp_{}", s.launch), leg.t_launch);
        set(&mut a, format!("tp_{}", s.customer), leg.t_customer);
        set(&mut a, format!("tp_{}", s.retrieve), leg.t_retrieve);
        let (ql, qr) = (val(&a, &format!("q_{}", s.launch)), val(&a, &format!("q_{}", s.retrieve)));
        set(&mut a, format!("l_{}", s.launch), ql);
        set(&mut a, format!("r_{}", s.retrieve), qr);
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub violation: f64,
}

/// Violation of every constraint, variable bound and integrality
/// requirement; entries with zero violation are omitted. Largest first.
pub fn residuals(spec: &ModelSpec, a: &Assignment) -> Vec<Residual> {
    let mut out = Vec::new();
    for c in &spec.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, coef)| coef * val(a, &spec.variables[v].name)).sum();
        let violation = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        if violation > 0.0 {
            out.push(Residual { name: c.name.clone(), violation });
        }
    }
    for v in &spec.variables {
        let x = val(a, &v.name);
        let bound = (v.lower - x).max(x - v.upper);
        if bound > 0.0 {
            out.push(Residual { name: format!("bound_{}", v.name), violation: bound });
        }
        if v.binary {
            let frac = (x - x.round()).abs();
            if frac > 0.0 {
                out.push(Residual { name: format!("binary_{}", v.name), violation: frac });
            }
        }
    }
    out.sort_by(|p, q| q.violation.total_cmp(&p.violation).then_with(|| p.name.cmp(&q.name)));
    out
}

pub fn max_residual(spec: &ModelSpec, a: &Assignment) -> f64 {
    residuals(spec, a).first().map_or(0.0, |r| r.violation)
}

fn on(a: &Assignment, name: &str) -> bool {
    val(a, name) > 0.5
}

fn decode_error(constraint: impl Into<String>, message: impl Into<String>) -> MilpError {
    MilpError::Decode { constraint: constraint.into(), message: message.into() }
}

/// Rebuilds the route from the `x` arcs, the sorties from `y` and the
/// station charges from the battery variables.
pub fn solution_from_assignment(
    spec: &ModelSpec,
    net: &AugmentedNetwork,
    a: &Assignment,
) -> Result<Solution, MilpError> {
    let n = net.n_nodes();
    let start = net.depot_start();
    let end = net.depot_end();
    let succ = |i: NodeId| -> Vec<NodeId> { (1..n).filter(|&j| j != i && on(a, &format!("x_{i}_{j}"))).collect() };

    let mut route = vec![start];
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut cur = start;
    while cur != end {
        let next = succ(cur);
        let name = if cur == start { "leave_depot".to_string() } else { format!("flow_{cur}") };
        let &[j] = next.as_slice() else {
            return Err(decode_error(name, format!("node {cur} has {} outgoing arcs", next.len())));
        };
        if seen[j] {
            return Err(decode_error(format!("subtour_{cur}_{j}"), format!("node {j} is revisited")));
        }
        seen[j] = true;
        route.push(j);
        cur = j;
    }
    for i in (0..end).filter(|&i| !seen[i]) {
        if let Some(j) = succ(i).first() {
            return Err(decode_error(format!("subtour_{i}_{j}"), format!("arc {i}->{j} is off the route")));
        }
    }

    let mut sorties = Vec::new();
    for s in &spec.sorties {
        if on(a, &format!("y_{}_{}_{}", s.launch, s.customer, s.retrieve)) {
            if !seen[s.launch] || !seen[s.retrieve] {
                let name = if s.launch == start {
                    format!("depot_launch_{}_{}", s.customer, s.retrieve)
                } else {
                    format!("sortie_on_route_{}_{}_{}", s.launch, s.customer, s.retrieve)
                };
                return Err(decode_error(name, format!("sortie {s} has an endpoint off the route")));
            }
            sorties.push(Sortie::new(s.launch, s.customer, s.retrieve));
        }
    }
    for j in net.customer_nodes() {
        let served = usize::from(seen[j]) + sorties.iter().filter(|s| s.customer == j).count();
        if served != 1 {
            return Err(decode_error(format!("cover_{j}"), format!("customer {j} served {served} times")));
        }
    }
    let pos = |v: NodeId| route.iter().position(|&x| x == v).unwrap();
    sorties.sort_by_key(|s| pos(s.launch));
    for w in sorties.windows(2) {
        if pos(w[1].launch) < pos(w[0].retrieve) {
            return Err(decode_error(
                format!("sortie_sequence_{}_{}_{}", w[0].launch, w[1].launch, w[0].retrieve),
                format!("sorties {} and {} overlap", w[0], w[1]),
            ));
        }
    }
    let charges = route
        .iter()
        .filter(|&&v| net.is_station(v))
        .filter_map(|&v| {
            let amount = val(a, &format!("bd1_{v}")) - val(a, &format!("ba_{v}"));
            (amount > 1e-12).then_some((v, amount))
        })
        .collect();
    Ok(Solution { ev_route: route, sorties, charges })
}
