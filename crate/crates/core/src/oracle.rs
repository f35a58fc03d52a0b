//! Exact solver for small instances.
//!
//! Depth-first enumeration of EV routes node by node. At every route node
//! the search branches on retrieving an airborne drone there and on
//! launching it to any unserved customer, then on the next node: an
//! unserved customer, the next free copy of a station (at most
//! `max_station_visits` stations in a row) or, once every customer is
//! served, the depot end. Complete structures are evaluated exactly with
//! [`check_feasible`]. Partial structures are pruned with admissible bounds:
//! the battery can never go below zero, and the completion time is bounded
//! below by the time already elapsed plus a shortest-path estimate of what
//! remains, and by the EV's busy time plus the charging the consumed energy
//! forces at the fastest charging rate.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::charging::ChargingModel;
use crate::heuristics::{greedy_phase2, mcws_initial, nearby_phase2};
use crate::model::{AugmentedNetwork, NodeId, Sortie};
use crate::solution::{check_feasible, Solution, VariantFlags, EPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    pub max_customers: usize,
    pub max_station_visits: usize,
    pub time_budget: Option<Duration>,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_customers: 7, max_station_visits: 2, time_budget: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub solution: Solution,
    pub cost: f64,
    pub nodes: u64,
    pub leaves: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{customers} customers exceed the oracle limit of {limit}")]
    TooLarge { customers: usize, limit: usize },
    #[error("time budget exhausted")]
    Timeout { best: Option<(Solution, f64)> },
    #[error("no feasible solution exists within the search limits")]
    Infeasible,
}

#[derive(Debug, Clone, Copy)]
struct Flight {
    launch: NodeId,
    customer: NodeId,
    /// Earliest departure from the customer.
    ready: f64,
    between: usize,
}

#[derive(Debug, Clone, Copy)]
struct State {
    node: NodeId,
    /// Lower bound on the EV's departure time from `node`.
    t: f64,
    /// Driving, service and handling time so far.
    busy: f64,
    /// Battery fractions consumed so far, and since the last charge point.
    energy_total: f64,
    leg_used: f64,
    launch_here: bool,
    drone: Option<Flight>,
    consecutive_stations: usize,
}

struct Dfs<'a> {
    net: &'a AugmentedNetwork,
    flags: VariantFlags,
    model: &'a ChargingModel,
    limits: OracleLimits,
    n: usize,
    /// Shortest paths over min(EV time, drone time) arcs.
    lb_dist: Vec<f64>,
    /// Cheapest second flight leg per (launch, customer), if any.
    min_leg2: Vec<Option<f64>>,
    min_to_recharge: Vec<f64>,
    seconds_per_soc: f64,
    s_l: f64,
    s_r: f64,
    route: Vec<NodeId>,
    sorties: Vec<Sortie>,
    served: Vec<bool>,
    n_served: usize,
    station_used: Vec<usize>,
    best_cost: f64,
    best: Option<Solution>,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
    leaves: u64,
}

impl<'a> Dfs<'a> {
    fn new(net: &'a AugmentedNetwork, model: &'a ChargingModel, flags: VariantFlags, limits: OracleLimits) -> Self {
        let n = net.n_nodes();
        let mut lb_dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                lb_dist[i * n + j] = net.ev_time(i, j).min(net.drone_time(i, j));
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = lb_dist[i * n + k] + lb_dist[k * n + j];
                    if via < lb_dist[i * n + j] {
                        lb_dist[i * n + j] = via;
                    }
                }
            }
        }
        let mut min_leg2 = vec![None; n * n];
        for w in net.launch_nodes() {
            for j in net.customer_nodes() {
                let best = net
                    .retrieve_nodes()
                    .filter(|&k| net.is_sortie(w, j, k))
                    .map(|k| net.drone_energy(j, k))
                    .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
                min_leg2[w * n + j] = best;
            }
        }
        let min_to_recharge = (0..n)
            .map(|v| {
                net.station_nodes()
                    .chain(std::iter::once(net.depot_end()))
                    .filter(|&s| s != v)
                    .map(|s| net.ev_energy(v, s) / net.qt_s)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let (s_l, s_r) = if flags.lrt { (net.launch_s, net.retrieve_s) } else { (0.0, 0.0) };
        Dfs {
            net,
            flags,
            model,
            limits,
            n,
            lb_dist,
            min_leg2,
            min_to_recharge,
            seconds_per_soc: 1.0 / model.max_rate(),
            s_l,
            s_r,
            route: Vec::new(),
            sorties: Vec::new(),
            served: vec![false; n],
            n_served: 0,
            station_used: vec![0; net.n_stations()],
            best_cost: f64::INFINITY,
            best: None,
            deadline: limits.time_budget.map(|d| Instant::now() + d),
            timed_out: false,
            nodes: 0,
            leaves: 0,
        }
    }

    fn lb(&self, i: NodeId, j: NodeId) -> f64 {
        self.lb_dist[i * self.n + j]
    }

    fn bound(&self, st: &State) -> f64 {
        let net = self.net;
        let end = net.depot_end();
        let w = st.node;
        let mut lb = st.t + net.ev_time(w, end);
        for u in net.customer_nodes() {
            if !self.served[u] {
                lb = lb.max(st.t + self.lb(w, u) + net.service(u) + self.lb(u, end));
            }
        }
        if let Some(f) = st.drone {
            lb = lb.max(f.ready + self.lb(f.customer, end) + self.s_r);
        }
        let final_energy = st.energy_total + net.ev_energy(w, end) / net.qt_s;
        let charge = (final_energy - 1.0).max(0.0) * self.seconds_per_soc;
        lb.max(st.busy + net.ev_time(w, end) + charge)
    }

    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) {
            if let Some(d) = self.deadline {
                if Instant::now() > d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        let sol = Solution { ev_route: self.route.clone(), sorties: self.sorties.clone(), charges: Default::default() };
        if let Ok(t) = check_feasible(&sol, self.net, self.model, self.flags) {
            if t.completion < self.best_cost - EPS {
                self.best_cost = t.completion;
                self.best = Some(sol.with_charges(&t, self.net));
            }
        }
    }

    /// EV moves from `prev.node` to `w`.
    fn arrive(&mut self, prev: &State, w: NodeId) {
        if self.out_of_time() {
            return;
        }
        let net = self.net;
        let handling = if prev.launch_here { self.s_l } else { 0.0 };
        let travel = net.ev_time(prev.node, w) + handling;
        let arc = net.ev_energy(prev.node, w) / net.qt_s;
        let leg_used = prev.leg_used + arc;
        if leg_used > 1.0 + EPS {
            return;
        }
        let is_station = net.is_station(w);
        let is_customer = net.is_customer(w);
        if is_customer && leg_used + self.min_to_recharge[w] > 1.0 + EPS {
            return;
        }
        let mut st = State {
            node: w,
            t: prev.t + travel,
            busy: prev.busy + travel,
            energy_total: prev.energy_total + arc,
            leg_used: if is_station { 0.0 } else { leg_used },
            launch_here: false,
            drone: prev.drone,
            consecutive_stations: if is_station { prev.consecutive_stations + 1 } else { 0 },
        };
        if let Some(station) = net.parent_station(w) {
            self.station_used[station] += 1;
        }
        if is_customer {
            self.served[w] = true;
            self.n_served += 1;
        }
        self.route.push(w);

        match prev.drone {
            None => self.after_arrival(st, false),
            Some(f) => {
                if net.is_sortie(f.launch, f.customer, w) {
                    let ev_at = st.t + self.s_r;
                    let drone_at = f.ready + net.drone_time(f.customer, w) + self.s_r;
                    let mut r = st;
                    r.t = ev_at.max(drone_at);
                    r.busy += self.s_r;
                    r.drone = None;
                    self.sorties.push(Sortie::new(f.launch, f.customer, w));
                    self.after_arrival(r, true);
                    self.sorties.pop();
                }
                if w != net.depot_end() {
                    let between = f.between + usize::from(is_customer);
                    if self.flags.max_leg.is_none_or(|limit| between <= limit) {
                        st.drone = Some(Flight { between, ..f });
                        self.after_arrival(st, false);
                    }
                }
            }
        }

        self.route.pop();
        if is_customer {
            self.served[w] = false;
            self.n_served -= 1;
        }
        if let Some(station) = net.parent_station(w) {
            self.station_used[station] -= 1;
        }
    }

    fn after_arrival(&mut self, mut st: State, retrieved: bool) {
        let net = self.net;
        let w = st.node;
        if w == net.depot_end() {
            if st.t < self.best_cost - EPS {
                self.leaf();
            }
            return;
        }
        let dwell = if net.is_customer(w) { net.service(w) } else { 0.0 };
        st.t += dwell;
        st.busy += dwell;
        if self.bound(&st) >= self.best_cost - EPS {
            return;
        }
        self.extend(&st);
        let can_launch = st.drone.is_none() && (!retrieved || (net.is_customer(w) && net.service(w) <= 0.0));
        if !can_launch {
            return;
        }
        for j in net.customer_nodes() {
            if self.served[j] || !net.drone_eligible(j) {
                continue;
            }
            let Some(leg2) = self.min_leg2[w * self.n + j] else {
                continue;
            };
            let drain = net.gamma * (net.drone_energy(w, j) + leg2) / net.qt_s;
            if st.leg_used + drain > 1.0 + EPS {
                continue;
            }
            let mut launched = st;
            launched.launch_here = true;
            launched.leg_used += drain;
            launched.energy_total += drain;
            launched.drone = Some(Flight {
                launch: w,
                customer: j,
                ready: st.t + self.s_l + net.drone_time(w, j) + net.service(j),
                between: 0,
            });
            self.served[j] = true;
            self.n_served += 1;
            if self.bound(&launched) < self.best_cost - EPS {
                self.extend(&launched);
            }
            self.served[j] = false;
            self.n_served -= 1;
        }
    }

    fn extend(&mut self, st: &State) {
        let net = self.net;
        let w = st.node;
        let mut next: Vec<NodeId> = Vec::new();
        if self.n_served == net.n_customers() {
            next.push(net.depot_end());
        }
        next.extend(net.customer_nodes().filter(|&u| !self.served[u]));
        if st.consecutive_stations < self.limits.max_station_visits {
            for station in 0..net.n_stations() {
                if self.station_used[station] < net.copies() {
                    next.push(net.station_copy(station, self.station_used[station]));
                }
            }
        }
        next.sort_by(|&a, &b| net.ev_time(w, a).total_cmp(&net.ev_time(w, b)).then(a.cmp(&b)));
        for v in next {
            self.arrive(st, v);
            if self.timed_out {
                return;
            }
        }
    }
}

/// Best of the construction heuristic and its sortie-conversion passes.
fn heuristic_incumbent(net: &AugmentedNetwork, model: &ChargingModel, flags: VariantFlags) -> Option<(Solution, f64)> {
    let base = mcws_initial(net, model).ok()?;
    [base.clone(), greedy_phase2(&base, net, model, flags), nearby_phase2(&base, net, model, flags)]
        .into_iter()
        .filter_map(|s| check_feasible(&s, net, model, flags).ok().map(|t| (s.with_charges(&t, net), t.completion)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Exact minimum completion time over all structures within the limits.
pub fn solve_exact(
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    limits: OracleLimits,
) -> Result<OracleResult, OracleError> {
    if net.n_customers() > limits.max_customers {
        return Err(OracleError::TooLarge { customers: net.n_customers(), limit: limits.max_customers });
    }
    let mut dfs = Dfs::new(net, model, flags, limits);
    if let Some((sol, c)) = heuristic_incumbent(net, model, flags) {
        dfs.best_cost = c + 1e-6;
        dfs.best = Some(sol);
    }
    let start = State {
        node: net.depot_start(),
        t: 0.0,
        busy: 0.0,
        energy_total: 0.0,
        leg_used: 0.0,
        launch_here: false,
        drone: None,
        consecutive_stations: 0,
    };
    dfs.route.push(net.depot_start());
    dfs.after_arrival(start, false);
    if dfs.timed_out {
        let best = dfs.best.map(|s| {
            let c = check_feasible(&s, net, model, flags).map(|t| t.completion).unwrap_or(f64::INFINITY);
            (s, c)
        });
        return Err(OracleError::Timeout { best });
    }
    match dfs.best {
        Some(sol) => {
            let cost = check_feasible(&sol, net, model, flags).expect("oracle optimum is feasible").completion;
            Ok(OracleResult { solution: sol, cost, nodes: dfs.nodes, leaves: dfs.leaves })
        }
        None => Err(OracleError::Infeasible),
    }
}
