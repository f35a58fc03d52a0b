mod common;

use common::*;
use evtspd_core::heuristics::*;
use evtspd_core::solution::{cost, partial_cost, ViolationKind};
use evtspd_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn flat() -> VariantFlags {
    VariantFlags::default()
}

fn line_net(n: usize) -> AugmentedNetwork {
    let pts: Vec<(f64, f64)> = (1..=n).map(|i| (i as f64, 0.0)).collect();
    build_augmented_network(&instance(&pts, &[], Params::default()), 1)
}

#[test]
fn max_removal_examples() {
    let net = line_net(5);
    assert_eq!(max_removal(&route(&net, &[1, 2, 3, 4, 5]), &net), 3);

    let net = line_net(2);
    let mut sol = route(&net, &[1]);
    sol.sorties.push(Sortie::new(0, 2, 1));
    assert_eq!(max_removal(&sol, &net), 1);

    let net = build_augmented_network(&instance(&[], &[], Params::default()), 1);
    assert_eq!(max_removal(&route(&net, &[]), &net), 0);
}

#[test]
fn destroying_every_customer_leaves_the_bare_tour() {
    let net = line_net(1);
    let (partial, removed) = destroy_random(&route(&net, &[1]), &net, 1, &mut rng(0)).unwrap();
    assert_eq!(partial, route(&net, &[]));
    assert_eq!(removed, vec![1]);
}

#[test]
fn removing_a_launch_customer_removes_its_drone_customer() {
    let net = build_augmented_network(&instance(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (1.5, 1.0)], &[], Params::default()), 1);
    let mut sol = route(&net, &[1, 2, 3]);
    sol.sorties.push(Sortie::new(1, 4, 2));
    for pick in [1, 2] {
        let (partial, mut removed) = remove_customers(&sol, &net, &[pick]);
        removed.sort();
        assert_eq!(removed, vec![pick, 4]);
        assert!(partial.sorties.is_empty());
    }
    let (partial, removed) = remove_customers(&sol, &net, &[3]);
    assert_eq!(removed, vec![3]);
    assert_eq!(partial.sorties, sol.sorties);
}

#[test]
fn destroy_is_seeded() {
    let net = random_net(4, 8, 2);
    let sol = mcws_initial(&net, &linear()).unwrap();
    for beta in 1..=max_removal(&sol, &net) {
        assert_eq!(destroy_random(&sol, &net, beta, &mut rng(9)), destroy_random(&sol, &net, beta, &mut rng(9)));
        assert_eq!(destroy_cluster(&sol, &net, beta, &mut rng(9)), destroy_cluster(&sol, &net, beta, &mut rng(9)));
    }
}

#[test]
fn destroy_rejects_beta_outside_range() {
    let net = line_net(5);
    let sol = route(&net, &[1, 2, 3, 4, 5]);
    for beta in [0, 4] {
        assert!(matches!(destroy_random(&sol, &net, beta, &mut rng(0)), Err(HeuristicError::InvalidArgument(_))));
        assert!(matches!(destroy_cluster(&sol, &net, beta, &mut rng(0)), Err(HeuristicError::InvalidArgument(_))));
    }
}

#[test]
fn cluster_of_one_is_a_random_pick() {
    let net = random_net(2, 8, 2);
    let sol = mcws_initial(&net, &linear()).unwrap();
    for seed in 0..20 {
        assert_eq!(destroy_cluster(&sol, &net, 1, &mut rng(seed)), destroy_random(&sol, &net, 1, &mut rng(seed)));
    }
}

#[test]
fn cluster_follows_nearest_neighbours() {
    let net = build_augmented_network(&instance(&[(0.0, 1.0), (5.0, 1.0), (1.0, 1.0), (9.0, 1.0)], &[], Params::default()), 1);
    let sol = route(&net, &[1, 2, 3, 4]);
    assert_eq!(cluster_picks(&sol, &net, 2, 1), vec![1, 3]);
    assert_eq!(cluster_picks(&sol, &net, 4, 1), vec![1, 3, 2, 4]);
}

#[test]
fn operator_selection_frequencies() {
    let mut r = rng(1);
    let n = 10_000;
    let ones = (0..n).filter(|_| select_operator(&[1.0, 1.0], &mut r) == 0).count() as f64;
    let chi2 = 2.0 * (ones - n as f64 / 2.0).powi(2) / (n as f64 / 2.0);
    assert!(chi2 < 6.635, "chi2 {chi2}");
    let threes = (0..n).filter(|_| select_operator(&[3.0, 1.0], &mut r) == 0).count() as f64 / n as f64;
    assert!((threes - 0.75).abs() <= 0.02, "{threes}");
    assert!((0..100).all(|_| select_operator(&[4.2], &mut r) == 0));
}

#[test]
fn score_update_examples() {
    let mut w = 7.0;
    update_score(&mut w, 1.0, 30.0, 1.0);
    assert_eq!(w, 7.0);
    let mut w = 10.0;
    update_score(&mut w, 0.9, 20.0, 1.0);
    assert!((w - 11.0).abs() < 1e-12);
    let mut w = 10.0;
    for k in 1..=5 {
        update_score(&mut w, 0.8, 0.0, 2.0);
        assert!((w - 10.0 * 0.8f64.powi(k)).abs() < 1e-12);
    }
}

#[test]
fn acceptance_follows_the_metropolis_rule() {
    let mut r = rng(2);
    assert!((0..1000).all(|_| accept(100.0, 90.0, 1e-9, &mut r)));
    let n = 100_000;
    let hits = (0..n).filter(|_| accept(100.0, 110.0, 1000.0, &mut r)).count() as f64 / n as f64;
    assert!((hits - (-0.01f64).exp()).abs() <= 0.01, "{hits}");
    assert!((0..1000).all(|_| !accept(100.0, 110.0, 1e-6, &mut r)));
}

#[test]
fn temperature_schedule() {
    assert_eq!(temperature(1000.0, 0.0, 10.0), 1000.0);
    assert_eq!(temperature(1000.0, 5.0, 10.0), 500.0);
    let late = temperature(1000.0, 9.99, 10.0);
    assert!((late - 1.0).abs() < 1e-9 && late < SearchConfig::default().t_min);
}

#[test]
fn mcws_serves_a_reachable_customer_directly() {
    let net = build_augmented_network(&instance(&[(5.0, 5.0)], &[(1.0, 1.0)], Params::default()), 1);
    assert_eq!(mcws_initial(&net, &linear()).unwrap(), route(&net, &[1]));
}

#[test]
fn mcws_uses_the_halfway_station_for_a_far_customer() {
    let net = build_augmented_network(&instance(&[(60.0, 0.0)], &[(30.0, 0.0)], Params::default()), 2);
    assert!(cost(&route(&net, &[1]), &net, &linear(), flat()).is_none());
    let sol = mcws_initial(&net, &linear()).unwrap();
    assert!(sol.ev_route.iter().any(|&v| net.is_station(v)));
    check_feasible(&sol, &net, &linear(), flat()).unwrap();
}

#[test]
fn mcws_merges_co_located_customers() {
    let net = build_augmented_network(&instance(&[(10.0, 10.0), (10.0, 10.0)], &[], Params::default()), 1);
    let sol = mcws_initial(&net, &linear()).unwrap();
    let merged = cost(&route(&net, &[1, 2]), &net, &linear(), flat()).unwrap();
    let separate = 2.0 * partial_cost(&route(&net, &[1]), &net, &linear(), flat()).unwrap();
    assert!(merged < separate);
    assert_eq!(sol.route_customers(&net).len(), 2);
    assert!((cost(&sol, &net, &linear(), flat()).unwrap() - merged).abs() < 1e-9);
}

#[test]
fn mcws_fails_on_unreachable_customers() {
    let net = build_augmented_network(&instance(&[(90.0, 0.0)], &[], Params::default()), 1);
    assert!(matches!(mcws_initial(&net, &linear()), Err(HeuristicError::ConstructionFailure(_))));
}

#[test]
fn empty_removal_set_never_worsens() {
    for seed in 0..10 {
        let net = random_net(seed, 7, 2);
        let sol = mcws_initial(&net, &linear()).unwrap();
        let before = cost(&sol, &net, &linear(), flat()).unwrap();
        for out in [repair_greedy(&sol, &[], &net, &linear(), flat()), repair_nearby(&sol, &[], &net, &linear(), flat())] {
            assert!(cost(&out.unwrap(), &net, &linear(), flat()).unwrap() <= before + 1e-9);
        }
    }
}

#[test]
fn best_insertion_takes_the_cheapest_position() {
    let net = build_augmented_network(&instance(&[(10.0, 0.0), (10.0, 10.0), (10.0, 5.0)], &[], Params::default()), 1);
    let sol = route(&net, &[1, 2]);
    let got = best_insertion(&sol, 3, &net, &linear(), flat()).unwrap();
    assert_eq!(got, route(&net, &[1, 3, 2]));
    let brute = (1..sol.ev_route.len())
        .map(|p| {
            let mut s = sol.clone();
            s.ev_route.insert(p, 3);
            cost(&s, &net, &linear(), flat()).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!((cost(&got, &net, &linear(), flat()).unwrap() - brute).abs() < 1e-9);
}

#[test]
fn greedy_scan_alternates_sorties() {
    let net = build_augmented_network(&instance(&[(5.0, 0.0), (5.0, 0.5), (5.0, 1.0)], &[], Params::default()), 1);
    let out = greedy_phase2(&route(&net, &[1, 2, 3]), &net, &linear(), flat());
    assert_eq!(out.ev_route, route(&net, &[2]).ev_route);
    assert_eq!(out.sorties, vec![Sortie::new(0, 1, 2), Sortie::new(2, 3, net.depot_end())]);
    check_feasible(&out, &net, &linear(), flat()).unwrap();
}

#[test]
fn nearby_scan_without_eligible_customers_changes_nothing() {
    let mut inst = instance(&[(5.0, 0.0), (5.0, 3.0), (2.0, 4.0)], &[], Params::default());
    for c in &mut inst.customers {
        c.drone_eligible = false;
    }
    let net = build_augmented_network(&inst, 1);
    let sol = route(&net, &[1, 2, 3]);
    assert_eq!(nearby_phase2(&sol, &net, &linear(), flat()), sol);
}

/// Single-sortie moves inside drone-free segments with their savings, by
/// enumerating every launch, customer and retrieve position.
fn enumerate_moves(sol: &Solution, net: &AugmentedNetwork) -> Vec<(f64, (usize, usize, usize), Solution)> {
    let base = cost(sol, net, &linear(), flat()).unwrap();
    let route = &sol.ev_route;
    let mut out = Vec::new();
    for l in 0..route.len() {
        for r in l + 2..route.len() {
            for m in l + 1..r {
                let j = route[m];
                if !net.is_customer(j) || sol.sorties.iter().any(|s| s.launch == j || s.retrieve == j) {
                    continue;
                }
                let mut cand = sol.clone();
                cand.ev_route.remove(m);
                cand.sorties.push(Sortie::new(route[l], j, route[r]));
                cand.sort_sorties();
                if let Some(c) = cost(&cand, net, &linear(), flat()) {
                    if base - c > 1e-9 {
                        out.push((base - c, (l, r, m), cand));
                    }
                }
            }
        }
    }
    out
}

#[test]
fn nearby_scan_takes_the_largest_saving_first() {
    for seed in 0..25 {
        let net = random_net(seed, 4, 0);
        let sol = route(&net, &[1, 2, 3, 4]);
        if cost(&sol, &net, &linear(), flat()).is_none() {
            continue;
        }
        let moves = enumerate_moves(&sol, &net);
        let out = nearby_phase2(&sol, &net, &linear(), flat());
        let Some(best) = moves.iter().map(|m| m.0).reduce(f64::max) else {
            assert_eq!(out, sol);
            continue;
        };
        let (_, (l, r, m), _) = moves.iter().find(|mv| mv.0 >= best - 1e-9).unwrap();
        let first = Sortie::new(sol.ev_route[*l], sol.ev_route[*m], sol.ev_route[*r]);
        assert!(out.sorties.contains(&first), "seed {seed}");
        assert!(enumerate_moves(&out, &net).is_empty(), "seed {seed}");
    }
}

#[test]
fn nearby_scan_breaks_ties_by_launch_position() {
    // Two detours of equal length; both can be flown from several places.
    let pts = [(2.0, 0.0), (3.0, 1.0), (4.0, 0.0), (6.0, 0.0), (7.0, 1.0), (8.0, 0.0)];
    let net = build_augmented_network(&instance(&pts, &[], Params::default()), 1);
    let sol = route(&net, &[1, 2, 3, 4, 5, 6]);
    let moves = enumerate_moves(&sol, &net);
    let best = moves.iter().map(|m| m.0).fold(f64::MIN, f64::max);
    let tied: Vec<_> = moves.iter().filter(|m| m.0 >= best - 1e-9).map(|m| m.1).collect();
    assert!(tied.len() > 1);
    let (l, r, m) = *tied.iter().min().unwrap();
    let out = nearby_phase2(&sol, &net, &linear(), flat());
    assert!(out.sorties.contains(&Sortie::new(sol.ev_route[l], sol.ev_route[m], sol.ev_route[r])));
}

#[test]
fn repairs_restore_every_removed_customer() {
    for seed in 0..15 {
        let net = random_net(seed, 8, 2);
        let sol = alns(&net, &linear(), 30, seed, flat()).best;
        let mut r = rng(seed);
        let beta = max_removal(&sol, &net);
        let (partial, removed) = destroy_random(&sol, &net, beta, &mut r).unwrap();
        for out in [
            repair_greedy(&partial, &removed, &net, &linear(), flat()),
            repair_nearby(&partial, &removed, &net, &linear(), flat()),
            insertion::repair_cp(&partial, &removed, &net, &linear(), flat(), &mut r),
        ] {
            let out = out.unwrap();
            check_feasible(&out, &net, &linear(), flat()).unwrap();
        }
    }
}

#[test]
fn single_customer_search_keeps_the_construction() {
    let net = build_augmented_network(&instance(&[(15.0, 15.0)], &[], Params::default()), 1);
    let out = alns(&net, &linear(), 200, 0, flat());
    assert_eq!(out.best_cost, out.initial_cost);
    assert_eq!(out.best, mcws_initial(&net, &linear()).unwrap());
}

#[test]
fn iteration_budget_is_reproducible() {
    let net = random_net(11, 8, 2);
    let a = alns(&net, &piecewise(4), 400, 3, flat());
    let b = alns(&net, &piecewise(4), 400, 3, flat());
    assert_eq!(a.best_cost.to_bits(), b.best_cost.to_bits());
    assert_eq!(a.best, b.best);
    assert_eq!(a.bank, b.bank);
}

#[test]
fn search_invariants_hold() {
    for seed in 0..8 {
        let net = random_net(seed, 8, 2);
        let flags = VariantFlags { lrt: seed % 2 == 0, max_leg: (seed % 3 == 0).then_some(2) };
        let model = piecewise(2);
        let config = SearchConfig { budget: Budget::Iterations(300), seed, ..Default::default() };
        let mut seen = 0;
        let out = alns_search_observed(&net, &model, &config, flags, |ev| {
            let (SearchEvent::Accepted { solution, cost } | SearchEvent::NewBest { solution, cost }) = ev;
            let t = check_feasible(solution, &net, &model, flags).unwrap();
            assert!((t.completion - cost).abs() < 1e-9);
            seen += 1;
        })
        .unwrap();
        assert!(seen > 0);
        let trace = out.best_trace();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.best_cost <= out.initial_cost + 1e-9);
        assert!((check_feasible(&out.best, &net, &model, flags).unwrap().completion - out.best_cost).abs() < 1e-9);
        assert!(out.bank.destroy.iter().chain(&out.bank.repair).all(|&w| w > 0.0));
        assert_eq!(out.bank.destroy_uses.iter().sum::<u64>(), out.iterations);
        if let Some(limit) = flags.max_leg {
            let v = check_feasible(&out.best, &net, &model, VariantFlags { max_leg: Some(limit), ..flags });
            assert!(v.map_err(|e| e.kind()) != Err(ViolationKind::MaxLeg));
        }
    }
}

#[test]
fn run_report_has_the_documented_columns() {
    let net = random_net(1, 5, 1);
    let out = alns(&net, &linear(), 20, 0, flat());
    let mut buf = Vec::new();
    out.write_report_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "iteration,elapsed_s,T,operator_d,operator_r,candidate_cost,accepted,best_cost"
    );
    assert_eq!(text.lines().count() as u64, out.iterations + 1);
}
