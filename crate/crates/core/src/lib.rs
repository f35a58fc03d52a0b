//! Electric-vehicle and drone delivery routing with partial recharging.
//!
//! An EV drives a route through customers and charging stations while
//! carrying one drone that can be launched from the route to serve a
//! customer and picked up again further along. The battery is shared: the
//! drone is charged from the EV at launch. [`solution::evaluate`] simulates a
//! candidate plan, [`heuristics::alns_search`] improves one and
//! [`oracle::solve_exact`] proves optimality on small instances.

pub mod charging;
pub mod heuristics;
pub mod insertion;
pub mod model;
pub mod oracle;
pub mod solution;

pub use charging::{build_approximation, ChargeCurve, ChargingError, ChargingModel, ModelKind};
pub use model::{build_augmented_network, generate_instance, AugmentedNetwork, Instance, NodeId, Params, Sortie};
pub use solution::{check_feasible, evaluate, Solution, Timeline, VariantFlags, Violation};
