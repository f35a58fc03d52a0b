#![allow(dead_code)]

use evtspd_core::model::{Customer, Point, Station};
use evtspd_core::*;

pub fn customer(id: u32, x: f64, y: f64) -> Customer {
    Customer { id, x, y, service_time_s: 0.0, weight_kg: 1.0, drone_eligible: true }
}

pub fn station(id: u32, x: f64, y: f64) -> Station {
    Station { id, x, y }
}

/// Instance with the depot at the origin, customers and stations at the
/// given km coordinates.
pub fn instance(customers: &[(f64, f64)], stations: &[(f64, f64)], params: Params) -> Instance {
    Instance {
        depot: Point::new(0.0, 0.0),
        customers: customers.iter().enumerate().map(|(i, &(x, y))| customer(i as u32 + 1, x, y)).collect(),
        stations: stations.iter().enumerate().map(|(i, &(x, y))| station(i as u32 + 1, x, y)).collect(),
        params,
    }
}

pub fn linear() -> ChargingModel {
    ChargingModel::linear(5400.0)
}

pub fn piecewise(r: usize) -> ChargingModel {
    build_approximation(&ChargeCurve::builtin(), r).unwrap()
}

pub fn random_net(seed: u64, customers: usize, stations: usize) -> AugmentedNetwork {
    let inst = generate_instance(seed, customers, stations, &Params::default()).unwrap();
    build_augmented_network(&inst, 2)
}

pub fn route(net: &AugmentedNetwork, interior: &[usize]) -> Solution {
    Solution::ev_only(net, interior)
}

/// ALNS with an iteration budget, so runs are reproducible.
pub fn alns(net: &AugmentedNetwork, model: &ChargingModel, iters: u64, seed: u64, flags: VariantFlags) -> heuristics::SearchOutcome {
    let config = heuristics::SearchConfig { budget: heuristics::Budget::Iterations(iters), seed, ..Default::default() };
    heuristics::alns_search(net, model, &config, flags).unwrap()
}

pub fn station_visits(sol: &Solution, net: &AugmentedNetwork) -> usize {
    sol.ev_route.iter().filter(|&&v| net.is_station(v)).count()
}
