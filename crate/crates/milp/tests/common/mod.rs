#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use evtspd_core::{AugmentedNetwork, VariantFlags};
use evtspd_milp::Variant;

pub fn variant_for(r: usize) -> Variant {
    if r == 1 {
        Variant::Pl
    } else {
        Variant::Pp
    }
}

/// Family sizes derived from the index sets alone.
pub fn expected_counts(
    net: &AugmentedNetwork,
    variant: Variant,
    segments: usize,
    flags: VariantFlags,
) -> (BTreeMap<&'static str, usize>, BTreeMap<&'static str, usize>) {
    let n = net.n_nodes();
    let c = net.n_customers();
    let nd = n - 1;
    let na = n - 1;
    let np = n - 2;
    let sa = net.station_nodes().count();
    let eligible = net.customer_nodes().filter(|&j| net.drone_eligible(j)).count();
    let d = net.sorties();
    let start = net.depot_start();
    let launches: BTreeSet<_> = d.iter().map(|s| s.launch).collect();
    let retrieves: BTreeSet<_> = d.iter().map(|s| s.retrieve).collect();
    let arcs = nd * na - np;

    let mut vars = BTreeMap::new();
    vars.insert("x", arcs);
    vars.insert("y", d.len());
    vars.insert("p", np * np.saturating_sub(1) + na);
    for f in ["u", "ba", "ta", "tp"] {
        vars.insert(f, n);
    }
    for f in ["bd1", "bd2", "td"] {
        vars.insert(f, nd);
    }
    if variant == Variant::Pp {
        vars.insert("alpha", segments * sa);
        vars.insert("tba", sa);
    }
    if flags.max_leg.is_some() {
        vars.insert("q", n);
        vars.insert("l", nd);
        vars.insert("r", na);
    }

    let mut cons = BTreeMap::new();
    cons.insert("cover", c);
    cons.insert("leave_depot", 1);
    cons.insert("return_depot", 1);
    cons.insert("subtour", np * (na - 1));
    cons.insert("flow", np);
    cons.insert("one_launch", launches.len());
    cons.insert("one_retrieve", retrieves.len());
    cons.insert("sortie_on_route", d.iter().filter(|s| s.launch != start).count());
    cons.insert("depot_launch", d.iter().filter(|s| s.launch == start).count());
    cons.insert("retrieve_after_launch", arcs);
    cons.insert("ev_energy", arcs);
    cons.insert("full_start", 1);
    cons.insert("customer_soc", c + 1);
    cons.insert("station_soc", sa);
    cons.insert("launch_drain", nd);
    cons.insert("launch_sync_lower", nd);
    cons.insert("launch_sync_upper", nd);
    cons.insert("retrieve_sync_lower", na);
    cons.insert("retrieve_sync_upper", na);
    cons.insert(if flags.lrt { "ev_travel_handling" } else { "ev_travel" }, arcs);
    cons.insert("service_dwell", c + 1);
    match variant {
        Variant::Pl => {
            cons.insert("linear_charge", sa);
        }
        Variant::Pp => {
            for f in ["secant_charge", "secant_lower", "secant_upper", "secant_soc_lower", "secant_soc_upper"] {
                cons.insert(f, segments * sa);
            }
            cons.insert("one_secant", sa);
            cons.insert("station_dwell", sa);
        }
    }
    cons.insert("drone_out", eligible * (nd - 1));
    cons.insert(if flags.lrt { "drone_in_handling" } else { "drone_in" }, eligible * (na - 1));
    cons.insert("flight_range", d.len());
    cons.insert("precedence", np * np.saturating_sub(1));
    cons.insert("precedence_pair", np * np.saturating_sub(1) / 2);
    cons.insert("sortie_sequence", np * (na - 1) + np * np.saturating_sub(1) * (na - 2));
    cons.insert("start_time", 1);
    cons.insert("start_first", na);
    if flags.max_leg.is_some() {
        cons.insert("leg_label", arcs);
        cons.insert("leg_limit", d.len());
        for f in ["launch_label_gate", "launch_label_upper", "launch_label_lower"] {
            cons.insert(f, nd);
        }
        for f in ["retrieve_label_gate", "retrieve_label_upper", "retrieve_label_lower"] {
            cons.insert(f, na);
        }
    }
    vars.retain(|_, v| *v > 0);
    cons.retain(|_, v| *v > 0);
    (vars, cons)
}
