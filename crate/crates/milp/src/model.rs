//! Three-index MILP over the augmented network.
//!
//! Energies are battery fractions, times are seconds. Node sets follow the
//! augmented network: `N_d` is every node but the depot end, `N_a` every
//! node but the depot start, `N'` the customers and station copies.

use std::collections::HashMap;

use evtspd_core::charging::{ChargingModel, ModelKind};
use evtspd_core::heuristics::mcws_initial;
use evtspd_core::model::{AugmentedNetwork, NodeId, Sortie};
use evtspd_core::solution::VariantFlags;
use serde::Serialize;

use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Linear time-SoC function.
    Pl,
    /// Piecewise-linear time-SoC function.
    Pp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub family: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub family: &'static str,
    /// `(variable index, coefficient)`, one entry per variable.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Big-M values, one per constraint group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigM {
    /// Time-linking constraints.
    pub time: f64,
    /// Energy constraints, in battery fractions.
    pub energy: f64,
    /// Position labels (`c + ms + 2`).
    pub order: f64,
    /// Secant selection in the piecewise variant.
    pub secant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub flags: VariantFlags,
    /// Weight-dependent drone budgets were applied when building D.
    pub range: bool,
    pub segments: usize,
    pub big_m: BigM,
    pub n_nodes: usize,
    pub depot_end: NodeId,
    pub sorties: Vec<Sortie>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Index of the objective variable (EV arrival at the depot end).
    pub objective: usize,
    index: HashMap<String, usize>,
}

impl ModelSpec {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }
}

struct Builder {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, name: String, family: &'static str, lower: f64, upper: f64, binary: bool) {
        self.index.insert(name.clone(), self.variables.len());
        self.variables.push(Variable { name, family, lower, upper, binary });
    }

    fn v(&self, name: &str) -> usize {
        self.index[name]
    }

    fn add(&mut self, name: String, family: &'static str, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (var, coef) in terms {
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some(entry) => entry.1 += coef,
                None => merged.push((var, coef)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.constraints.push(Constraint { name, family, terms: merged, sense, rhs });
    }
}

fn x(i: NodeId, j: NodeId) -> String {
    format!("x_{i}_{j}")
}

fn y(s: &Sortie) -> String {
    format!("y_{}_{}_{}", s.launch, s.customer, s.retrieve)
}

fn node_var(prefix: &str, i: NodeId) -> String {
    format!("{prefix}_{i}")
}

/// Time horizon: driving and service time of the construction tour plus a
/// full charge at every station copy.
fn time_horizon(net: &AugmentedNetwork, model: &ChargingModel) -> f64 {
    let full_charge = model.soc_to_time(1.0);
    let charging = (net.n_stations() * net.copies()) as f64 * full_charge;
    let tour = match mcws_initial(net, model) {
        Ok(sol) => sol
            .ev_route
            .windows(2)
            .map(|w| net.ev_time(w[0], w[1]) + net.service(w[1]))
            .sum::<f64>(),
        Err(_) => {
            let n = net.n_nodes();
            let longest = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| net.ev_time(i, j))
                .fold(0.0, f64::max);
            (n as f64) * longest + net.customer_nodes().map(|c| net.service(c)).sum::<f64>()
        }
    };
    tour + charging
}

/// Builds the complete model. `range` only records whether D was built from
/// weight-dependent budgets.
pub fn build_model(
    net: &AugmentedNetwork,
    model: &ChargingModel,
    variant: Variant,
    flags: VariantFlags,
    range: bool,
) -> Result<ModelSpec, MilpError> {
    match (variant, model.kind()) {
        (Variant::Pl, ModelKind::Linear) | (Variant::Pp, ModelKind::Piecewise) => {}
        _ => return Err(MilpError::VariantMismatch { variant, kind: model.kind() }),
    }
    let n = net.n_nodes();
    let start = net.depot_start();
    let end = net.depot_end();
    let n_d: Vec<NodeId> = net.launch_nodes().collect();
    let n_a: Vec<NodeId> = net.retrieve_nodes().collect();
    let n_prime: Vec<NodeId> = (1..end).collect();
    let customers: Vec<NodeId> = net.customer_nodes().collect();
    let c_zero: Vec<NodeId> = std::iter::once(start).chain(customers.iter().copied()).collect();
    let stations: Vec<NodeId> = net.station_nodes().collect();
    let eligible: Vec<NodeId> = customers.iter().copied().filter(|&j| net.drone_eligible(j)).collect();
    let d: Vec<Sortie> = net.sorties().to_vec();
    let segs = model.segments().to_vec();
    let bps = model.breakpoints().to_vec();
    let (s_l, s_r) = if flags.lrt { (net.launch_s, net.retrieve_s) } else { (0.0, 0.0) };

    let max_ct = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| net.ev_time(i, j)).fold(0.0, f64::max);
    let max_cd = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| net.drone_time(i, j))
        .fold(0.0, f64::max);
    let max_s = customers.iter().map(|&c| net.service(c)).fold(0.0, f64::max);
    let big_m = BigM {
        time: time_horizon(net, model) + max_ct + max_cd + net.launch_s + net.retrieve_s + max_s + 1.0,
        energy: 1.0,
        order: n as f64,
        secant: model.max_line_value().max(1.0),
    };
    let mt = big_m.time;
    let mo = big_m.order;

    let mut b = Builder { variables: Vec::new(), index: HashMap::new(), constraints: Vec::new() };

    // Variables, family by family in index order.
    for &i in &n_d {
        for &j in &n_a {
            if i != j {
                b.var(x(i, j), "x", 0.0, 1.0, true);
            }
        }
    }
    for s in &d {
        b.var(y(s), "y", 0.0, 1.0, true);
    }
    for &j in &n_a {
        b.var(format!("p_{start}_{j}"), "p", 0.0, 1.0, true);
    }
    for &i in &n_prime {
        for &j in &n_prime {
            if i != j {
                b.var(format!("p_{i}_{j}"), "p", 0.0, 1.0, true);
            }
        }
    }
    for i in 0..n {
        b.var(node_var("u", i), "u", 1.0, mo, false);
    }
    for i in 0..n {
        b.var(node_var("ba", i), "ba", 0.0, 1.0, false);
    }
    for &i in &n_d {
        b.var(node_var("bd1", i), "bd1", 0.0, 1.0, false);
    }
    for &i in &n_d {
        b.var(node_var("bd2", i), "bd2", 0.0, 1.0, false);
    }
    for i in 0..n {
        b.var(node_var("ta", i), "ta", 0.0, f64::INFINITY, false);
    }
    for &i in &n_d {
        b.var(node_var("td", i), "td", 0.0, f64::INFINITY, false);
    }
    for i in 0..n {
        b.var(node_var("tp", i), "tp", 0.0, f64::INFINITY, false);
    }
    if variant == Variant::Pp {
        for r in 1..=segs.len() {
            for &i in &stations {
                b.var(format!("alpha_{r}_{i}"), "alpha", 0.0, 1.0, true);
            }
        }
        for &i in &stations {
            b.var(node_var("tba", i), "tba", 0.0, model.full_time(), false);
        }
    }
    if flags.max_leg.is_some() {
        for i in 0..n {
            b.var(node_var("q", i), "q", 0.0, customers.len() as f64, false);
        }
        for &i in &n_d {
            b.var(node_var("l", i), "l", 0.0, f64::INFINITY, false);
        }
        for &k in &n_a {
            b.var(node_var("r", k), "r", 0.0, f64::INFINITY, false);
        }
    }

    // Sortie lookups.
    let by_launch = |i: NodeId| d.iter().filter(move |s| s.launch == i);
    let by_retrieve = |k: NodeId| d.iter().filter(move |s| s.retrieve == k);
    let by_pair = |i: NodeId, k: NodeId| d.iter().filter(move |s| s.launch == i && s.retrieve == k);
    let ys = |b: &Builder, it: &mut dyn Iterator<Item = &Sortie>, coef: f64| -> Vec<(usize, f64)> {
        it.map(|s| (b.v(&y(s)), coef)).collect()
    };

    // Every customer is served once.
    for &j in &customers {
        let mut t: Vec<(usize, f64)> = n_d.iter().filter(|&&i| i != j).map(|&i| (b.v(&x(i, j)), 1.0)).collect();
        t.extend(ys(&b, &mut d.iter().filter(|s| s.customer == j), 1.0));
        b.add(format!("cover_{j}"), "cover", t, Sense::Eq, 1.0);
    }
    // Leave and return to the depot.
    let t = n_a.iter().map(|&j| (b.v(&x(start, j)), 1.0)).collect();
    b.add("leave_depot".into(), "leave_depot", t, Sense::Eq, 1.0);
    let t = n_d.iter().map(|&i| (b.v(&x(i, end)), 1.0)).collect();
    b.add("return_depot".into(), "return_depot", t, Sense::Eq, 1.0);
    // Position labels along arcs.
    for &i in &n_prime {
        for &j in &n_a {
            if i != j {
                let t = vec![(b.v(&node_var("u", i)), 1.0), (b.v(&node_var("u", j)), -1.0), (b.v(&x(i, j)), mo)];
                b.add(format!("subtour_{i}_{j}"), "subtour", t, Sense::Le, mo - 1.0);
            }
        }
    }
    // Flow conservation.
    for &j in &n_prime {
        let mut t: Vec<(usize, f64)> = n_d.iter().filter(|&&i| i != j).map(|&i| (b.v(&x(i, j)), 1.0)).collect();
        t.extend(n_a.iter().filter(|&&k| k != j).map(|&k| (b.v(&x(j, k)), -1.0)));
        b.add(format!("flow_{j}"), "flow", t, Sense::Eq, 0.0);
    }
    // One launch and one retrieve per node.
    for &i in &n_d {
        let t = ys(&b, &mut by_launch(i), 1.0);
        if !t.is_empty() {
            b.add(format!("one_launch_{i}"), "one_launch", t, Sense::Le, 1.0);
        }
    }
    for &k in &n_a {
        let t = ys(&b, &mut by_retrieve(k), 1.0);
        if !t.is_empty() {
            b.add(format!("one_retrieve_{k}"), "one_retrieve", t, Sense::Le, 1.0);
        }
    }
    // Both sortie ends are on the route; depot launches.
    for s in &d {
        let (i, k) = (s.launch, s.retrieve);
        if i == start {
            let mut t = vec![(b.v(&y(s)), 1.0)];
            t.extend(n_d.iter().filter(|&&h| h != k).map(|&h| (b.v(&x(h, k)), -1.0)));
            b.add(format!("depot_launch_{}_{k}", s.customer), "depot_launch", t, Sense::Le, 0.0);
        } else {
            let mut t = vec![(b.v(&y(s)), 2.0)];
            t.extend(n_d.iter().filter(|&&h| h != i).map(|&h| (b.v(&x(h, i)), -1.0)));
            t.extend(n_d.iter().filter(|&&l| l != k).map(|&l| (b.v(&x(l, k)), -1.0)));
            b.add(format!("sortie_on_route_{i}_{}_{k}", s.customer), "sortie_on_route", t, Sense::Le, 0.0);
        }
    }
    // A sortie retrieves after it launches.
    for &i in &n_d {
        for &k in &n_a {
            if i != k {
                let mut t = vec![(b.v(&node_var("u", k)), 1.0), (b.v(&node_var("u", i)), -1.0)];
                t.extend(ys(&b, &mut by_pair(i, k), -mo));
                b.add(format!("retrieve_after_launch_{i}_{k}"), "retrieve_after_launch", t, Sense::Ge, 1.0 - mo);
            }
        }
    }
    // Battery.
    for &i in &n_d {
        for &j in &n_a {
            if i != j {
                let e = net.ev_energy(i, j) / net.qt_s;
                let t = vec![
                    (b.v(&node_var("ba", j)), 1.0),
                    (b.v(&node_var("bd2", i)), -1.0),
                    (b.v(&x(i, j)), e + big_m.energy),
                ];
                b.add(format!("ev_energy_{i}_{j}"), "ev_energy", t, Sense::Le, big_m.energy);
            }
        }
    }
    b.add("full_start".into(), "full_start", vec![(b.v(&node_var("ba", start)), 1.0)], Sense::Eq, 1.0);
    for &i in &c_zero {
        let t = vec![(b.v(&node_var("ba", i)), 1.0), (b.v(&node_var("bd1", i)), -1.0)];
        b.add(format!("customer_soc_{i}"), "customer_soc", t, Sense::Eq, 0.0);
    }
    for &i in &stations {
        let t = vec![(b.v(&node_var("ba", i)), 1.0), (b.v(&node_var("bd1", i)), -1.0)];
        b.add(format!("station_soc_{i}"), "station_soc", t, Sense::Le, 0.0);
    }
    for &i in &n_d {
        let mut t = vec![(b.v(&node_var("bd2", i)), 1.0), (b.v(&node_var("bd1", i)), -1.0)];
        t.extend(by_launch(i).map(|s| (b.v(&y(s)), net.launch_drain(s))));
        b.add(format!("launch_drain_{i}"), "launch_drain", t, Sense::Eq, 0.0);
    }
    // Drone clock equals the EV clock at launch and retrieve.
    for &i in &n_d {
        let launches: Vec<(usize, f64)> = ys(&b, &mut by_launch(i), mt);
        let mut t = vec![(b.v(&node_var("tp", i)), 1.0), (b.v(&node_var("td", i)), -1.0)];
        t.extend(launches.iter().map(|&(v, c)| (v, -c)));
        b.add(format!("launch_sync_lower_{i}"), "launch_sync_lower", t, Sense::Ge, -mt);
        let mut t = vec![(b.v(&node_var("tp", i)), 1.0), (b.v(&node_var("td", i)), -1.0)];
        t.extend(launches.iter().copied());
        b.add(format!("launch_sync_upper_{i}"), "launch_sync_upper", t, Sense::Le, mt);
    }
    for &k in &n_a {
        let retrieves: Vec<(usize, f64)> = ys(&b, &mut by_retrieve(k), mt);
        let mut t = vec![(b.v(&node_var("tp", k)), 1.0), (b.v(&node_var("ta", k)), -1.0)];
        t.extend(retrieves.iter().map(|&(v, c)| (v, -c)));
        b.add(format!("retrieve_sync_lower_{k}"), "retrieve_sync_lower", t, Sense::Ge, -mt);
        let mut t = vec![(b.v(&node_var("tp", k)), 1.0), (b.v(&node_var("ta", k)), -1.0)];
        t.extend(retrieves.iter().copied());
        b.add(format!("retrieve_sync_upper_{k}"), "retrieve_sync_upper", t, Sense::Le, mt);
    }
    // EV travel, with or without handling times.
    for &h in &n_d {
        for &k in &n_a {
            if h == k {
                continue;
            }
            let mut t = vec![(b.v(&node_var("ta", k)), 1.0), (b.v(&node_var("td", h)), -1.0), (b.v(&x(h, k)), -mt)];
            let rhs = net.ev_time(h, k) - mt;
            if flags.lrt {
                t.extend(ys(&b, &mut by_launch(h), -s_l));
                t.extend(ys(&b, &mut by_retrieve(k), -s_r));
                b.add(format!("ev_travel_handling_{h}_{k}"), "ev_travel_handling", t, Sense::Ge, rhs);
            } else {
                b.add(format!("ev_travel_{h}_{k}"), "ev_travel", t, Sense::Ge, rhs);
            }
        }
    }
    // Dwell at customers and the depot start.
    for &j in &c_zero {
        let t = vec![(b.v(&node_var("td", j)), 1.0), (b.v(&node_var("ta", j)), -1.0)];
        b.add(format!("service_dwell_{j}"), "service_dwell", t, Sense::Ge, net.service(j));
    }
    // Charging time at stations.
    match variant {
        Variant::Pl => {
            let h = model.slope_h();
            for &j in &stations {
                let t = vec![
                    (b.v(&node_var("td", j)), 1.0),
                    (b.v(&node_var("ta", j)), -1.0),
                    (b.v(&node_var("bd1", j)), -h),
                    (b.v(&node_var("ba", j)), h),
                ];
                b.add(format!("linear_charge_{j}"), "linear_charge", t, Sense::Ge, 0.0);
            }
        }
        Variant::Pp => {
            let ma = big_m.secant;
            for (r0, seg) in segs.iter().enumerate() {
                let r = r0 + 1;
                for &i in &stations {
                    let t = vec![
                        (b.v(&node_var("tba", i)), seg.slope),
                        (b.v(&node_var("td", i)), seg.slope),
                        (b.v(&node_var("ta", i)), -seg.slope),
                        (b.v(&node_var("bd1", i)), -1.0),
                    ];
                    b.add(format!("secant_charge_{r}_{i}"), "secant_charge", t, Sense::Ge, -seg.intercept);
                }
            }
            for (r0, w) in bps.windows(2).enumerate() {
                let r = r0 + 1;
                for &i in &stations {
                    let alpha = b.v(&format!("alpha_{r}_{i}"));
                    let t = vec![(b.v(&node_var("ba", i)), 1.0), (alpha, -1.0)];
                    b.add(format!("secant_lower_{r}_{i}"), "secant_lower", t, Sense::Ge, w[0].1 - 1.0);
                }
            }
            for (r0, w) in bps.windows(2).enumerate() {
                let r = r0 + 1;
                for &i in &stations {
                    let alpha = b.v(&format!("alpha_{r}_{i}"));
                    let t = vec![(b.v(&node_var("ba", i)), 1.0), (alpha, 1.0)];
                    b.add(format!("secant_upper_{r}_{i}"), "secant_upper", t, Sense::Le, w[1].1 + 1.0);
                }
            }
            for &i in &stations {
                let t = (1..=segs.len()).map(|r| (b.v(&format!("alpha_{r}_{i}")), 1.0)).collect();
                b.add(format!("one_secant_{i}"), "one_secant", t, Sense::Eq, 1.0);
            }
            for (r0, seg) in segs.iter().enumerate() {
                let r = r0 + 1;
                for &i in &stations {
                    let alpha = b.v(&format!("alpha_{r}_{i}"));
                    let t = vec![(b.v(&node_var("ba", i)), 1.0), (b.v(&node_var("tba", i)), -seg.slope), (alpha, -ma)];
                    b.add(format!("secant_soc_lower_{r}_{i}"), "secant_soc_lower", t, Sense::Ge, seg.intercept - ma);
                }
            }
            for (r0, seg) in segs.iter().enumerate() {
                let r = r0 + 1;
                for &i in &stations {
                    let alpha = b.v(&format!("alpha_{r}_{i}"));
                    let t = vec![(b.v(&node_var("ba", i)), 1.0), (b.v(&node_var("tba", i)), -seg.slope), (alpha, ma)];
                    b.add(format!("secant_soc_upper_{r}_{i}"), "secant_soc_upper", t, Sense::Le, seg.intercept + ma);
                }
            }
            for &j in &stations {
                let t = vec![(b.v(&node_var("td", j)), 1.0), (b.v(&node_var("ta", j)), -1.0)];
                b.add(format!("station_dwell_{j}"), "station_dwell", t, Sense::Ge, 0.0);
            }
        }
    }
    // Drone reaches and serves its customer.
    for &j in &eligible {
        for &i in &n_d {
            if i == j {
                continue;
            }
            let mut t = vec![(b.v(&node_var("tp", j)), 1.0), (b.v(&node_var("tp", i)), -1.0)];
            t.extend(ys(&b, &mut d.iter().filter(|s| s.launch == i && s.customer == j), -mt));
            let rhs = net.drone_time(i, j) + net.service(j) + s_l - mt;
            b.add(format!("drone_out_{i}_{j}"), "drone_out", t, Sense::Ge, rhs);
        }
    }
    // Drone flies back, with or without the retrieve time.
    for &j in &eligible {
        for &k in &n_a {
            if k == j {
                continue;
            }
            let mut t = vec![(b.v(&node_var("tp", k)), 1.0), (b.v(&node_var("tp", j)), -1.0)];
            t.extend(ys(&b, &mut d.iter().filter(|s| s.customer == j && s.retrieve == k), -mt));
            let rhs = net.drone_time(j, k) + s_r - mt;
            if flags.lrt {
                b.add(format!("drone_in_handling_{j}_{k}"), "drone_in_handling", t, Sense::Ge, rhs);
            } else {
                b.add(format!("drone_in_{j}_{k}"), "drone_in", t, Sense::Ge, rhs);
            }
        }
    }
    // Flight range.
    for s in &d {
        let (i, j, k) = (s.launch, s.customer, s.retrieve);
        let t = vec![(b.v(&node_var("tp", k)), 1.0), (b.v(&node_var("tp", j)), -1.0), (b.v(&y(s)), mt)];
        let rhs = net.budget(j) - net.drone_time(i, j) + s_r + mt;
        b.add(format!("flight_range_{i}_{j}_{k}"), "flight_range", t, Sense::Le, rhs);
    }
    // Precedence between route nodes.
    for &i in &n_prime {
        for &j in &n_prime {
            if i != j {
                let t = vec![
                    (b.v(&node_var("u", i)), 1.0),
                    (b.v(&node_var("u", j)), -1.0),
                    (b.v(&format!("p_{i}_{j}")), mo),
                ];
                b.add(format!("precedence_{i}_{j}"), "precedence", t, Sense::Le, mo - 1.0);
            }
        }
    }
    for (a, &i) in n_prime.iter().enumerate() {
        for &j in &n_prime[a + 1..] {
            let t = vec![(b.v(&format!("p_{i}_{j}")), 1.0), (b.v(&format!("p_{j}_{i}")), 1.0)];
            b.add(format!("precedence_pair_{i}_{j}"), "precedence_pair", t, Sense::Eq, 1.0);
        }
    }
    // A later sortie launches after the earlier one is retrieved.
    for &i in &n_d {
        for &l in &n_prime {
            if l == i {
                continue;
            }
            for &k in &n_a {
                if k == i || k == l {
                    continue;
                }
                let mut t = vec![(b.v(&node_var("tp", l)), 1.0), (b.v(&node_var("tp", k)), -1.0)];
                t.extend(ys(&b, &mut by_pair(i, k).filter(|s| s.customer != l), -mt));
                t.extend(ys(
                    &b,
                    &mut by_launch(l).filter(|s| ![i, k, l].contains(&s.customer) && ![i, k].contains(&s.retrieve)),
                    -mt,
                ));
                t.push((b.v(&format!("p_{i}_{l}")), -mt));
                b.add(format!("sortie_sequence_{i}_{l}_{k}"), "sortie_sequence", t, Sense::Ge, -3.0 * mt);
            }
        }
    }
    // Depot start.
    b.add("start_time".into(), "start_time", vec![(b.v(&node_var("ta", start)), 1.0)], Sense::Eq, 0.0);
    for &j in &n_a {
        let t = vec![(b.v(&format!("p_{start}_{j}")), 1.0)];
        b.add(format!("start_first_{j}"), "start_first", t, Sense::Eq, 1.0);
    }
    // Leg-length limit: customer-count labels q, linearised products l and r.
    if let Some(limit) = flags.max_leg {
        let mq = customers.len() as f64 + 1.0;
        for &i in &n_d {
            for &j in &n_a {
                if i != j {
                    let t = vec![(b.v(&node_var("q", j)), 1.0), (b.v(&node_var("q", i)), -1.0), (b.v(&x(i, j)), -mq)];
                    let gain = if net.is_customer(j) { 1.0 } else { 0.0 };
                    b.add(format!("leg_label_{i}_{j}"), "leg_label", t, Sense::Ge, gain - mq);
                }
            }
        }
        for s in &d {
            let (i, j, k) = (s.launch, s.customer, s.retrieve);
            let t = vec![(b.v(&node_var("r", k)), 1.0), (b.v(&node_var("l", i)), -1.0), (b.v(&y(s)), mo)];
            let own = if net.is_customer(k) { 1.0 } else { 0.0 };
            b.add(format!("leg_limit_{i}_{j}_{k}"), "leg_limit", t, Sense::Le, limit as f64 + own + mo);
        }
        for &i in &n_d {
            let mut t = vec![(b.v(&node_var("l", i)), 1.0)];
            t.extend(ys(&b, &mut by_launch(i), -mo));
            b.add(format!("launch_label_gate_{i}"), "launch_label_gate", t, Sense::Le, 0.0);
        }
        for &i in &n_d {
            let t = vec![(b.v(&node_var("l", i)), 1.0), (b.v(&node_var("q", i)), -1.0)];
            b.add(format!("launch_label_upper_{i}"), "launch_label_upper", t, Sense::Le, 0.0);
        }
        for &i in &n_d {
            let mut t = vec![(b.v(&node_var("l", i)), 1.0), (b.v(&node_var("q", i)), -1.0)];
            t.extend(ys(&b, &mut by_launch(i), -mo));
            b.add(format!("launch_label_lower_{i}"), "launch_label_lower", t, Sense::Ge, -mo);
        }
        for &k in &n_a {
            let mut t = vec![(b.v(&node_var("r", k)), 1.0)];
            t.extend(ys(&b, &mut by_retrieve(k), -mo));
            b.add(format!("retrieve_label_gate_{k}"), "retrieve_label_gate", t, Sense::Le, 0.0);
        }
        for &k in &n_a {
            let t = vec![(b.v(&node_var("r", k)), 1.0), (b.v(&node_var("q", k)), -1.0)];
            b.add(format!("retrieve_label_upper_{k}"), "retrieve_label_upper", t, Sense::Le, 0.0);
        }
        for &k in &n_a {
            let mut t = vec![(b.v(&node_var("r", k)), 1.0), (b.v(&node_var("q", k)), -1.0)];
            t.extend(ys(&b, &mut by_retrieve(k), -mo));
            b.add(format!("retrieve_label_lower_{k}"), "retrieve_label_lower", t, Sense::Ge, -mo);
        }
    }

    let objective = b.v(&node_var("ta", end));
    Ok(ModelSpec {
        variant,
        flags,
        range,
        segments: segs.len(),
        big_m,
        n_nodes: n,
        depot_end: end,
        sorties: d,
        variables: b.variables,
        constraints: b.constraints,
        objective,
        index: b.index,
    })
}
