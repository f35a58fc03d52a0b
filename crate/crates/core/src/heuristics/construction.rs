//! Modified Clarke-Wright savings construction of a drone-free EV tour.

use crate::charging::ChargingModel;
use crate::model::{AugmentedNetwork, NodeId};
use crate::solution::{canonicalize_copies, partial_cost, prune_stations, restore_feasibility_g, Solution, VariantFlags};

use super::HeuristicError;

/// Interior node list (no depots) with its completion time.
#[derive(Debug, Clone)]
struct Tour {
    nodes: Vec<NodeId>,
    cost: f64,
}

fn customers_of(net: &AugmentedNetwork, nodes: &[NodeId]) -> Vec<NodeId> {
    nodes.iter().copied().filter(|&v| net.is_customer(v)).collect()
}

/// Turns an interior sequence into a feasible tour: as given, else with
/// stations from g(s). Redundant stations are then dropped.
fn make_feasible(net: &AugmentedNetwork, model: &ChargingModel, interior: &[NodeId]) -> Option<Tour> {
    let flags = VariantFlags::default();
    let sol = canonicalize_copies(&Solution::ev_only(net, interior), net)?;
    let sol = if partial_cost(&sol, net, model, flags).is_some() {
        sol
    } else {
        let fixed = restore_feasibility_g(&sol, net)?;
        partial_cost(&fixed, net, model, flags)?;
        fixed
    };
    let sol = prune_stations(&sol, net, model, flags);
    let c = partial_cost(&sol, net, model, flags)?;
    let last = sol.ev_route.len() - 1;
    Some(Tour { nodes: sol.ev_route[1..last].to_vec(), cost: c })
}

/// Steps 1-3: a back-and-forth tour per customer; tours that run out of
/// energy get the cheapest single station visit that fixes them.
fn single_tour(net: &AugmentedNetwork, model: &ChargingModel, c: NodeId) -> Result<Tour, HeuristicError> {
    let flags = VariantFlags::default();
    let direct = Solution::ev_only(net, &[c]);
    if let Some(t) = partial_cost(&direct, net, model, flags) {
        return Ok(Tour { nodes: vec![c], cost: t });
    }
    let mut best: Option<Tour> = None;
    for st in 0..net.n_stations() {
        let s = net.station_copy(st, 0);
        for interior in [[s, c], [c, s]] {
            let sol = Solution::ev_only(net, &interior);
            if let Some(t) = partial_cost(&sol, net, model, flags) {
                if best.as_ref().is_none_or(|b| t < b.cost) {
                    best = Some(Tour { nodes: interior.to_vec(), cost: t });
                }
            }
        }
    }
    if let Some(tour) = best {
        return Ok(tour);
    }
    make_feasible(net, model, &[c])
        .ok_or_else(|| HeuristicError::ConstructionFailure(format!("customer {c} is unreachable")))
}

/// Joins `a` and `b` so that customer `i` of `a` meets customer `j` of `b`,
/// reversing either tour when needed. `None` if `i`/`j` are not tour ends.
fn oriented_join(net: &AugmentedNetwork, a: &[NodeId], i: NodeId, b: &[NodeId], j: NodeId) -> Option<Vec<NodeId>> {
    let ca = customers_of(net, a);
    let cb = customers_of(net, b);
    let mut left = a.to_vec();
    if ca.last() != Some(&i) {
        if ca.first() == Some(&i) {
            left.reverse();
        } else {
            return None;
        }
    }
    let mut right = b.to_vec();
    if cb.first() != Some(&j) {
        if cb.last() == Some(&j) {
            right.reverse();
        } else {
            return None;
        }
    }
    left.extend(right);
    Some(left)
}

/// MCWS: builds one EV tour serving every customer, with station visits
/// where the battery requires them and no drone sorties.
pub fn mcws_initial(net: &AugmentedNetwork, model: &ChargingModel) -> Result<Solution, HeuristicError> {
    let customers: Vec<NodeId> = net.customer_nodes().collect();
    if customers.is_empty() {
        return Ok(Solution::ev_only(net, &[]));
    }
    let mut tours: Vec<Option<Tour>> = Vec::with_capacity(customers.len());
    let mut tour_of = vec![usize::MAX; net.n_nodes()];
    for &c in &customers {
        tour_of[c] = tours.len();
        tours.push(Some(single_tour(net, model, c)?));
    }

    let depot = net.depot_start();
    let mut savings = Vec::new();
    for (a, &i) in customers.iter().enumerate() {
        for &j in &customers[a + 1..] {
            let s = net.ev_time(depot, i) + net.ev_time(j, depot) - net.ev_time(i, j);
            savings.push((s, i, j));
        }
    }
    savings.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    for &(_, i, j) in &savings {
        let (ti, tj) = (tour_of[i], tour_of[j]);
        if ti == tj {
            continue;
        }
        let (a, b) = (tours[ti].as_ref().unwrap(), tours[tj].as_ref().unwrap());
        let Some(joined) = oriented_join(net, &a.nodes, i, &b.nodes, j) else {
            continue;
        };
        if let Some(merged) = make_feasible(net, model, &joined) {
            for &v in customers_of(net, &merged.nodes).iter() {
                tour_of[v] = ti;
            }
            tours[ti] = Some(merged);
            tours[tj] = None;
        }
    }

    // Remaining tours could not be merged through their savings pair; join
    // them in the cheapest feasible way until one tour is left.
    loop {
        let live: Vec<usize> = (0..tours.len()).filter(|&t| tours[t].is_some()).collect();
        if live.len() == 1 {
            break;
        }
        let mut best: Option<(f64, usize, usize, Tour)> = None;
        for &ta in &live {
            for &tb in &live {
                if ta == tb {
                    continue;
                }
                let (a, b) = (tours[ta].as_ref().unwrap(), tours[tb].as_ref().unwrap());
                let (ca, cb) = (customers_of(net, &a.nodes), customers_of(net, &b.nodes));
                for &i in [ca[0], ca[ca.len() - 1]].iter() {
                    for &j in [cb[0], cb[cb.len() - 1]].iter() {
                        let Some(joined) = oriented_join(net, &a.nodes, i, &b.nodes, j) else {
                            continue;
                        };
                        if let Some(m) = make_feasible(net, model, &joined) {
                            let delta = m.cost - a.cost - b.cost;
                            if best.as_ref().is_none_or(|bst| delta < bst.0) {
                                best = Some((delta, ta, tb, m));
                            }
                        }
                    }
                }
            }
        }
        let Some((_, ta, tb, merged)) = best else {
            return Err(HeuristicError::ConstructionFailure(
                "tours cannot be merged into a single energy-feasible tour".into(),
            ));
        };
        for &v in customers_of(net, &merged.nodes).iter() {
            tour_of[v] = ta;
        }
        tours[ta] = Some(merged);
        tours[tb] = None;
    }
    let tour = tours.into_iter().flatten().next().unwrap();
    let sol = canonicalize_copies(&Solution::ev_only(net, &tour.nodes), net)
        .ok_or_else(|| HeuristicError::ConstructionFailure("too many station visits".into()))?;
    Ok(sol)
}
