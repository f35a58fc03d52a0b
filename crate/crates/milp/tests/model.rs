mod common;

use std::collections::BTreeMap;

use common::{expected_counts, variant_for};

use evtspd_core::heuristics::{alns_search, Budget, SearchConfig};
use evtspd_core::oracle::{solve_exact, OracleLimits};
use evtspd_core::model::{Customer, Point, Station};
use evtspd_core::*;
use evtspd_milp::*;
use proptest::prelude::*;

fn network(seed: u64, customers: usize, stations: usize, copies: usize) -> AugmentedNetwork {
    let inst = generate_instance(seed, customers, stations, &Params::default()).unwrap();
    build_augmented_network(&inst, copies)
}

fn charging(r: usize) -> ChargingModel {
    build_approximation(&ChargeCurve::builtin(), r).unwrap()
}

fn check_counts(net: &AugmentedNetwork, r: usize, flags: VariantFlags) {
    let variant = variant_for(r);
    let spec = build_model(net, &charging(r), variant, flags, false).unwrap();
    let audit = audit(&spec);
    let (vars, cons) = expected_counts(net, variant, r, flags);
    let got_vars: BTreeMap<&str, usize> = audit.variables.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let got_cons: BTreeMap<&str, usize> = audit.constraints.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(got_vars, vars);
    assert_eq!(got_cons, cons);
    assert_eq!(audit.n_variables, vars.values().sum::<usize>());
    assert_eq!(audit.n_constraints, cons.values().sum::<usize>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn family_sizes_match_index_set_formulas(
        seed in 0u64..1000,
        customers in 1usize..=5,
        stations in 0usize..=3,
        copies in 1usize..=2,
        r in prop::sample::select(vec![1usize, 2, 4, 6]),
        lrt: bool,
        max_leg in prop::option::of(1usize..=3),
    ) {
        let inst = generate_instance(seed, customers, stations, &Params::default());
        prop_assume!(inst.is_ok());
        let net = build_augmented_network(&inst.unwrap(), copies);
        check_counts(&net, r, VariantFlags { lrt, max_leg });
    }
}

#[test]
fn pp_adds_segment_selectors_and_entry_time_per_station() {
    let net = network(3, 3, 2, 2);
    let stations = net.station_nodes().count();
    let pl = audit(&build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap());
    let pp = audit(&build_model(&net, &charging(2), Variant::Pp, VariantFlags::default(), false).unwrap());
    assert_eq!(pp.variables["alpha"], 2 * stations);
    assert_eq!(pp.variables["tba"], stations);
    assert_eq!(pp.n_variables, pl.n_variables + 3 * stations);
    assert!(!pl.variables.contains_key("alpha"));
}

#[test]
fn max_leg_off_emits_no_leg_labels() {
    let net = network(4, 3, 1, 2);
    let a = audit(&build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap());
    for f in ["q", "l", "r"] {
        assert!(!a.variables.contains_key(f), "{f}");
    }
    assert!(!a.constraints.keys().any(|k| k.starts_with("c37") || k.starts_with("c38")));
}

#[test]
fn variant_must_match_charging_model() {
    let net = network(1, 2, 1, 1);
    let err = build_model(&net, &charging(4), Variant::Pl, VariantFlags::default(), false).unwrap_err();
    assert!(matches!(err, MilpError::VariantMismatch { variant: Variant::Pl, .. }));
    let err = build_model(&net, &charging(1), Variant::Pp, VariantFlags::default(), false).unwrap_err();
    assert!(matches!(err, MilpError::VariantMismatch { variant: Variant::Pp, .. }));
}

#[test]
fn lp_text_round_trips_through_the_reader() {
    for (r, flags) in [
        (1, VariantFlags::default()),
        (4, VariantFlags { lrt: true, max_leg: Some(1) }),
    ] {
        let net = network(11, 3, 2, 2);
        let spec = build_model(&net, &charging(r), variant_for(r), flags, false).unwrap();
        let parsed = parse_lp(&lp_string(&spec)).unwrap();
        assert!(parsed.minimize);
        assert_eq!(parsed.objective, BTreeMap::from([(spec.variables[spec.objective].name.clone(), 1.0)]));
        assert_eq!(parsed.constraints.len(), spec.constraints.len());
        for (p, c) in parsed.constraints.iter().zip(&spec.constraints) {
            assert_eq!(p.name, c.name);
            assert_eq!(p.sense, c.sense);
            assert_eq!(p.rhs, c.rhs, "{}", c.name);
            let terms: BTreeMap<String, f64> =
                c.terms.iter().map(|&(v, coef)| (spec.variables[v].name.clone(), coef)).collect();
            let parsed_terms: BTreeMap<String, f64> =
                p.terms.iter().filter(|(_, &v)| v != 0.0).map(|(k, v)| (k.clone(), *v)).collect();
            assert_eq!(parsed_terms, terms, "{}", c.name);
        }
        let binaries: Vec<String> = spec.variables.iter().filter(|v| v.binary).map(|v| v.name.clone()).collect();
        assert_eq!(parsed.binaries, binaries);
        for v in spec.variables.iter().filter(|v| !v.binary) {
            let bounds = parsed.bounds.get(&v.name).copied().unwrap_or((0.0, f64::INFINITY));
            assert_eq!(bounds, (v.lower, v.upper), "{}", v.name);
        }
    }
}

#[test]
fn repeated_writes_are_byte_identical() {
    let dir = std::env::temp_dir().join(format!("evtspd-milp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let net = network(5, 4, 2, 2);
    let model = charging(2);
    let flags = VariantFlags { lrt: true, max_leg: None };
    let a = dir.join("a.lp");
    let b = dir.join("b.lp");
    write_lp(&build_model(&net, &model, Variant::Pp, flags, false).unwrap(), &a).unwrap();
    write_lp(&build_model(&net, &model, Variant::Pp, flags, false).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn no_customer_instance_is_parseable() {
    let inst = Instance {
        depot: Point::new(0.0, 0.0),
        customers: vec![],
        stations: vec![Station { id: 1, x: 3.0, y: 4.0 }],
        params: Params::default(),
    };
    let net = build_augmented_network(&inst, 1);
    let spec = build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap();
    let parsed = parse_lp(&lp_string(&spec)).unwrap();
    assert_eq!(parsed.objective.len(), 1);
    assert!(parsed.constraints.iter().any(|c| c.name == "leave_depot"));
    assert!(parsed.constraints.iter().any(|c| c.name == "return_depot"));
    check_counts(&net, 1, VariantFlags::default());
}

fn assert_substitutes_cleanly(net: &AugmentedNetwork, r: usize, flags: VariantFlags, sol: &Solution, cost: f64) {
    let model = charging(r);
    let spec = build_model(net, &model, variant_for(r), flags, false).unwrap();
    let a = encode_solution(&spec, net, &model, sol).unwrap();
    let worst = residuals(&spec, &a);
    assert!(max_residual(&spec, &a) <= 1e-6, "r={r} {flags:?} {sol:?}: {:?}", &worst[..worst.len().min(5)]);
    let objective = a[&spec.variables[spec.objective].name];
    assert!((objective - cost).abs() <= 1e-6, "objective {objective} vs {cost}");

    let decoded = solution_from_assignment(&spec, net, &a).unwrap();
    assert_eq!(decoded.ev_route, sol.ev_route);
    let mut want = sol.sorties.clone();
    want.sort();
    let mut got = decoded.sorties.clone();
    got.sort();
    assert_eq!(got, want);
    let t = check_feasible(&decoded, net, &model, flags).unwrap();
    assert!((t.completion - objective).abs() <= 1e-6);
}

const VARIANTS: [(usize, VariantFlags); 5] = [
    (1, VariantFlags { lrt: false, max_leg: None }),
    (2, VariantFlags { lrt: false, max_leg: None }),
    (4, VariantFlags { lrt: true, max_leg: None }),
    (6, VariantFlags { lrt: false, max_leg: Some(1) }),
    (1, VariantFlags { lrt: true, max_leg: Some(2) }),
];

#[test]
fn oracle_optima_satisfy_every_constraint() {
    for seed in 0..6 {
        let customers = 2 + (seed as usize % 3);
        let net = network(seed, customers, 2, 2);
        for (r, flags) in VARIANTS {
            let model = charging(r);
            let best = solve_exact(&net, &model, flags, OracleLimits::default()).unwrap();
            assert_substitutes_cleanly(&net, r, flags, &best.solution, best.cost);
        }
    }
}

#[test]
fn heuristic_solutions_satisfy_every_constraint() {
    for seed in 20..24 {
        let net = network(seed, 5, 2, 2);
        for (r, flags) in VARIANTS {
            let model = charging(r);
            let cfg = SearchConfig { budget: Budget::Iterations(300), seed, ..Default::default() };
            let out = alns_search(&net, &model, &cfg, flags).unwrap();
            assert_substitutes_cleanly(&net, r, flags, &out.best, out.best_cost);
        }
    }
}

#[test]
fn encode_rejects_infeasible_solutions() {
    let net = network(2, 3, 1, 1);
    let spec = build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap();
    let sol = Solution { ev_route: vec![0, 1, net.depot_end()], sorties: vec![], charges: Default::default() };
    assert!(matches!(encode_solution(&spec, &net, &charging(1), &sol), Err(MilpError::Infeasible(_))));
}

fn two_customer_net() -> AugmentedNetwork {
    let customer = |id: u32, x: f64, y: f64| Customer {
        id,
        x,
        y,
        service_time_s: 0.0,
        weight_kg: 1.0,
        drone_eligible: true,
    };
    let inst = Instance {
        depot: Point::new(0.0, 0.0),
        customers: vec![customer(1, 2.0, 0.0), customer(2, 2.0, 2.0)],
        stations: vec![Station { id: 1, x: 5.0, y: 5.0 }],
        params: Params::default(),
    };
    build_augmented_network(&inst, 1)
}

#[test]
fn hand_built_ev_tour_decodes() {
    let net = two_customer_net();
    let spec = build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap();
    let end = net.depot_end();
    let a: Assignment = ["x_0_1".to_string(), "x_1_2".to_string(), format!("x_2_{end}")]
        .into_iter()
        .map(|k| (k, 1.0))
        .collect();
    let sol = solution_from_assignment(&spec, &net, &a).unwrap();
    assert_eq!(sol.ev_route, vec![0, 1, 2, end]);
    assert!(sol.sorties.is_empty());
}

#[test]
fn hand_built_sortie_decodes() {
    let net = two_customer_net();
    let spec = build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap();
    let end = net.depot_end();
    let mut a: Assignment = ["x_0_1".to_string(), format!("x_1_{end}"), format!("y_1_2_{end}")]
        .into_iter()
        .map(|k| (k, 1.0))
        .collect();
    let sol = solution_from_assignment(&spec, &net, &a).unwrap();
    assert_eq!(sol.sorties, vec![Sortie::new(1, 2, end)]);

    a.insert(format!("x_1_{end}"), 0.0);
    a.insert("x_1_2".to_string(), 1.0);
    a.insert(format!("x_2_{end}"), 1.0);
    let err = solution_from_assignment(&spec, &net, &a).unwrap_err();
    assert!(matches!(err, MilpError::Decode { ref constraint, .. } if constraint == "cover_2"), "{err}");
}

#[test]
fn broken_assignments_name_the_violated_constraint() {
    let net = two_customer_net();
    let spec = build_model(&net, &charging(1), Variant::Pl, VariantFlags::default(), false).unwrap();
    let end = net.depot_end();
    let decode = |arcs: &[String]| -> String {
        let a: Assignment = arcs.iter().map(|k| (k.clone(), 1.0)).collect();
        match solution_from_assignment(&spec, &net, &a).unwrap_err() {
            MilpError::Decode { constraint, .. } => constraint,
            e => panic!("{e}"),
        }
    };
    assert_eq!(decode(&[]), "leave_depot");
    assert_eq!(decode(&["x_0_1".into(), "x_0_2".into()]), "leave_depot");
    assert_eq!(decode(&["x_0_1".into()]), "flow_1");
    assert_eq!(decode(&["x_0_1".into(), format!("x_1_{end}"), "x_2_3".into(), "x_3_2".into()]), "subtour_2_3");
    assert_eq!(decode(&["x_0_1".into(), format!("x_1_{end}"), "y_0_2_3".into()]), "depot_launch_2_3");
}
