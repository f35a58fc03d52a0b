//! Destroy operators.

use std::collections::HashSet;

use rand::Rng;

use crate::model::{AugmentedNetwork, NodeId};
use crate::solution::{canonicalize_copies, Solution};

use super::HeuristicError;

/// Customers in the solution: route customers in route order, then drone
/// customers in sortie order.
pub fn removable_customers(sol: &Solution, net: &AugmentedNetwork) -> Vec<NodeId> {
    let mut out = sol.route_customers(net);
    out.extend(sol.drone_customers());
    out
}

/// Largest destroy size: `floor((n - 1 - d) / 2)` for `n` route nodes and
/// `d` sorties, at least 1 while any customer is present.
pub fn max_removal(sol: &Solution, net: &AugmentedNetwork) -> usize {
    let removable = removable_customers(sol, net).len();
    if removable == 0 {
        return 0;
    }
    let n = sol.ev_route.len();
    let x = n.saturating_sub(1 + sol.sorties.len()) / 2;
    x.max(1).min(removable)
}

/// Removes `picks` and dissolves every sortie touching them. Drone customers
/// of sorties that lose their launch or retrieve node are removed as well.
/// Returns the partial solution and the removed customers.
pub fn remove_customers(sol: &Solution, net: &AugmentedNetwork, picks: &[NodeId]) -> (Solution, Vec<NodeId>) {
    let mut removed: Vec<NodeId> = picks.to_vec();
    let mut gone: HashSet<NodeId> = picks.iter().copied().collect();
    for s in &sol.sorties {
        if (gone.contains(&s.launch) || gone.contains(&s.retrieve)) && gone.insert(s.customer) {
            removed.push(s.customer);
        }
    }
    let partial = Solution {
        ev_route: sol.ev_route.iter().copied().filter(|v| !gone.contains(v)).collect(),
        sorties: sol
            .sorties
            .iter()
            .copied()
            .filter(|s| !gone.contains(&s.launch) && !gone.contains(&s.customer) && !gone.contains(&s.retrieve))
            .collect(),
        charges: Default::default(),
    };
    let partial = canonicalize_copies(&partial, net).expect("removing nodes keeps copy counts");
    (partial, removed)
}

fn check_beta(sol: &Solution, net: &AugmentedNetwork, beta: usize) -> Result<(), HeuristicError> {
    let limit = max_removal(sol, net);
    if beta == 0 || beta > limit {
        return Err(HeuristicError::InvalidArgument(format!("beta {beta} outside [1, {limit}]")));
    }
    Ok(())
}

/// Removes `beta` customers chosen uniformly at random.
pub fn destroy_random<R: Rng>(
    sol: &Solution,
    net: &AugmentedNetwork,
    beta: usize,
    rng: &mut R,
) -> Result<(Solution, Vec<NodeId>), HeuristicError> {
    check_beta(sol, net, beta)?;
    let mut pool = removable_customers(sol, net);
    let mut picks = Vec::with_capacity(beta);
    for _ in 0..beta {
        let idx = rng.gen_range(0..pool.len());
        picks.push(pool.swap_remove(idx));
    }
    Ok(remove_customers(sol, net, &picks))
}

/// Picks `seed` then repeatedly the remaining customer nearest (Euclidean)
/// to the previous pick, ties to the lowest node id.
pub fn cluster_picks(sol: &Solution, net: &AugmentedNetwork, beta: usize, seed: NodeId) -> Vec<NodeId> {
    let mut pool = removable_customers(sol, net);
    pool.retain(|&v| v != seed);
    let mut picks = vec![seed];
    let mut prev = seed;
    while picks.len() < beta && !pool.is_empty() {
        let here = net.node(prev).pos;
        let (idx, _) = pool
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                here.euclidean(&net.node(a).pos)
                    .total_cmp(&here.euclidean(&net.node(b).pos))
                    .then(a.cmp(&b))
            })
            .unwrap();
        prev = pool.swap_remove(idx);
        picks.push(prev);
    }
    picks
}

/// Removes a random customer and its `beta - 1` successive nearest
/// neighbours.
pub fn destroy_cluster<R: Rng>(
    sol: &Solution,
    net: &AugmentedNetwork,
    beta: usize,
    rng: &mut R,
) -> Result<(Solution, Vec<NodeId>), HeuristicError> {
    check_beta(sol, net, beta)?;
    let pool = removable_customers(sol, net);
    let seed = pool[rng.gen_range(0..pool.len())];
    let picks = cluster_picks(sol, net, beta, seed);
    Ok(remove_customers(sol, net, &picks))
}
