mod common;

use common::*;
use evtspd_core::heuristics::{mcws_initial, remove_customers, repair_greedy};
use evtspd_core::insertion::*;
use evtspd_core::solution::{cost, evaluate_partial};
use evtspd_core::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least total waiting over every candidate subset that covers each drone
/// customer once with pairwise disjoint `[l, r]` intervals.
fn power_set_optimum(p: &InsertionProblem) -> Option<f64> {
    let n = p.candidates.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let picked: Vec<&Candidate> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &p.candidates[i]).collect();
        if picked.len() != p.drone_customers.len() {
            continue;
        }
        let covers = p.drone_customers.iter().all(|&j| picked.iter().filter(|c| c.customer == j).count() == 1);
        let disjoint = picked.iter().enumerate().all(|(a, x)| {
            picked[a + 1..].iter().all(|y| x.retrieve_pos < y.launch_pos || y.retrieve_pos < x.launch_pos)
        });
        if covers && disjoint {
            let w: f64 = picked.iter().map(|c| c.waiting_s).sum();
            best = Some(best.map_or(w, |b| b.min(w)));
        }
    }
    best
}

/// Subproblems from random tours in a 16 km box with a few customers pulled
/// off the route.
fn random_problems(count: usize, max_candidates: usize) -> Vec<(AugmentedNetwork, Solution, InsertionProblem, VariantFlags)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0u64.. {
        let mut pick = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..7).map(|_| (pick.gen_range(-8.0..8.0), pick.gen_range(-8.0..8.0))).collect();
        let net = build_augmented_network(&instance(&pts, &[], Params::default()), 1);
        let Ok(tour) = mcws_initial(&net, &linear()) else { continue };
        let mut customers = tour.route_customers(&net);
        customers.shuffle(&mut rng);
        let k = rng.gen_range(1..=3);
        let (base, pool) = remove_customers(&tour, &net, &customers[..k]);
        let flags = VariantFlags { lrt: rng.gen_bool(0.5), max_leg: rng.gen_bool(0.3).then_some(2) };
        let Ok(p) = build_insertion_problem(&base, &pool, &net, &linear(), flags) else { continue };
        if p.candidates.len() <= max_candidates {
            out.push((net, base, p, flags));
            if out.len() == count {
                return out;
            }
        }
    }
    unreachable!()
}

#[test]
fn exact_search_matches_power_set() {
    let mut solved = 0;
    for (_, _, p, _) in random_problems(80, 15) {
        let got = solve_insertion(&p);
        match power_set_optimum(&p) {
            Some(w) => {
                let sel = got.unwrap();
                assert!((sel.total_waiting - w).abs() < 1e-6);
                let sum: f64 = sel.chosen.iter().map(|&i| p.candidates[i].waiting_s).sum();
                assert!((sum - sel.total_waiting).abs() < 1e-9);
                solved += 1;
            }
            None => assert_eq!(got, Err(InsertionError::InfeasibleSubproblem)),
        }
    }
    assert!(solved > 40, "{solved}");
}

#[test]
fn objective_ignores_candidate_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (_, _, p, _) in random_problems(30, 40) {
        let Ok(base) = solve_insertion(&p) else { continue };
        let mut q = p.clone();
        for _ in 0..3 {
            q.candidates.shuffle(&mut rng);
            assert!((solve_insertion(&q).unwrap().total_waiting - base.total_waiting).abs() < 1e-9);
        }
    }
}

#[test]
fn grafted_waiting_adds_to_the_route_time() {
    let mut checked = 0;
    for (net, base, p, flags) in random_problems(60, 60) {
        let Ok(sel) = solve_insertion(&p) else { continue };
        let Some(with_drone) = cost(&graft(&p, &sel), &net, &linear(), flags) else { continue };
        let alone = evaluate_partial(&base, &net, &linear(), flags).unwrap().completion;
        assert!((with_drone - (alone + sel.total_waiting)).abs() < 1e-6, "{with_drone} vs {alone} + {}", sel.total_waiting);
        checked += 1;
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn candidate_set_matches_hand_enumeration() {
    let pts = [(3.0, 0.0), (6.0, 0.0), (9.0, 0.0), (4.0, 3.0), (15.0, 9.0)];
    let net = build_augmented_network(&instance(&pts, &[], Params::default()), 1);
    let base = route(&net, &[1, 2, 3]);
    let p = build_insertion_problem(&base, &[4, 5], &net, &linear(), VariantFlags::default()).unwrap();
    let mut want = Vec::new();
    for l in 0..5 {
        for r in l + 1..5 {
            for j in [4, 5] {
                let flight = net.drone_time(base.ev_route[l], j) + net.drone_time(j, base.ev_route[r]);
                if flight <= 1200.0 + 1e-9 {
                    want.push((l, r, j));
                }
            }
        }
    }
    let mut got: Vec<_> = p.candidates.iter().map(|c| (c.launch_pos, c.retrieve_pos, c.customer)).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
    assert!(want.len() < 2 * 10);
}

#[test]
fn empty_pool_is_trivially_optimal() {
    let net = random_net(0, 4, 1);
    let tour = mcws_initial(&net, &linear()).unwrap();
    let p = build_insertion_problem(&tour, &[], &net, &linear(), VariantFlags::default()).unwrap();
    assert!(p.candidates.is_empty());
    let sel = solve_insertion(&p).unwrap();
    assert!(sel.chosen.is_empty() && sel.total_waiting == 0.0);
}

#[test]
fn two_customers_on_a_one_stop_route_cannot_both_fly() {
    let net = build_augmented_network(&instance(&[(5.0, 0.0), (4.0, 1.0), (5.0, 1.0)], &[], Params::default()), 1);
    let p = build_insertion_problem(&route(&net, &[1]), &[2, 3], &net, &linear(), VariantFlags::default()).unwrap();
    assert!(!p.candidates.is_empty());
    assert_eq!(solve_insertion(&p), Err(InsertionError::InfeasibleSubproblem));
}

#[test]
fn bad_inputs_are_rejected() {
    let net = build_augmented_network(&instance(&[(5.0, 0.0), (60.0, 0.0)], &[], Params::default()), 1);
    assert_eq!(
        build_insertion_problem(&route(&net, &[1]), &[1], &net, &linear(), VariantFlags::default()),
        Err(InsertionError::CustomerOnRoute(1))
    );
    assert!(matches!(
        build_insertion_problem(&route(&net, &[2]), &[1], &net, &linear(), VariantFlags::default()),
        Err(InsertionError::InfeasibleRoute(_))
    ));
}

#[test]
fn candidate_table_csv() {
    let (_, _, p, _) = random_problems(1, 40).remove(0);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "customer,l,r,duration_s,waiting_s");
    assert_eq!(text.lines().count(), p.candidates.len() + 1);
}

#[test]
fn cp_repair_finds_the_wide_sortie_greedy_misses() {
    // The drone customer sits by the depot; the only other customer is far
    // out, so a sortie between route neighbours is out of range but one
    // spanning the whole tour is not.
    let net = build_augmented_network(&instance(&[(1.0, 1.0), (25.0, 0.0)], &[], Params::default()), 1);
    let (partial, removed) = remove_customers(&route(&net, &[1, 2]), &net, &[1]);
    let greedy = cost(&repair_greedy(&partial, &removed, &net, &linear(), VariantFlags::default()).unwrap(), &net, &linear(), VariantFlags::default()).unwrap();
    let mut better = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = repair_cp(&partial, &removed, &net, &linear(), VariantFlags::default(), &mut rng).unwrap();
        let c = cost(&out, &net, &linear(), VariantFlags::default()).unwrap();
        assert!(c <= greedy + 1e-9);
        if c < greedy - 1.0 {
            better += 1;
            assert_eq!(out.sorties, vec![Sortie::new(0, 1, net.depot_end())]);
        }
    }
    assert!(better > 0);
}

#[test]
fn cp_repair_is_seeded() {
    let net = random_net(5, 8, 2);
    let tour = mcws_initial(&net, &linear()).unwrap();
    let (partial, removed) = remove_customers(&tour, &net, &tour.route_customers(&net)[..3]);
    let run = |seed| repair_cp(&partial, &removed, &net, &linear(), VariantFlags::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    for seed in 0..5 {
        assert_eq!(run(seed), run(seed));
    }
}
