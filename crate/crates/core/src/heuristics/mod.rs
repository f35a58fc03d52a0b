//! Construction, destroy and repair operators, and the ALNS driver.

mod alns;
mod construction;
mod destroy;
mod repair;

use thiserror::Error;

pub use alns::{
    accept, alns_search, alns_search_observed, select_operator, temperature, update_score, Budget,
    DestroyOp, IterationRecord, OperatorBank, Outcome, RepairOp, SearchConfig, SearchEvent, DESTROY_OPS, REPAIR_OPS,
    SearchOutcome,
};
pub use construction::mcws_initial;
pub use destroy::{cluster_picks, destroy_cluster, destroy_random, max_removal, remove_customers, removable_customers};
pub use repair::{
    best_insertion, greedy_phase1, greedy_phase2, nearby_phase1, nearby_phase2, repair_greedy, repair_nearby,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("construction failed: {0}")]
    ConstructionFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("repair failed: {0}")]
    RepairFailure(String),
}
