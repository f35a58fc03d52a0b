//! Three-index MILP for EV-and-drone routing with partial recharging,
//! written as CPLEX LP text for external solvers.
//!
//! [`build_model`] emits the model, [`lp_string`] renders it,
//! [`encode_solution`] and [`solution_from_assignment`] translate between
//! solutions and variable values, and [`residuals`] checks an assignment
//! against every constraint.

pub mod assign;
pub mod lp;
pub mod model;

use std::collections::BTreeMap;

use evtspd_core::charging::ModelKind;
use serde::Serialize;
use thiserror::Error;

pub use assign::{encode_solution, max_residual, residuals, solution_from_assignment, Assignment, Residual};
pub use lp::{lp_string, parse_lp, write_lp, ParsedConstraint, ParsedLp};
pub use model::{build_model, BigM, Constraint, ModelSpec, Sense, Variable, Variant};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("variant {variant:?} needs a different charging model than {kind:?}")]
    VariantMismatch { variant: Variant, kind: ModelKind },
    #[error("solution is infeasible: {0}")]
    Infeasible(String),
    #[error("assignment violates {constraint}: {message}")]
    Decode { constraint: String, message: String },
    #[error("LP parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Model dimensions by family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audit {
    pub variant: Variant,
    pub lrt: bool,
    pub max_leg: Option<usize>,
    pub range: bool,
    pub segments: usize,
    pub nodes: usize,
    pub sorties: usize,
    pub big_m: BigM,
    pub n_variables: usize,
    pub n_constraints: usize,
    pub variables: BTreeMap<String, usize>,
    pub constraints: BTreeMap<String, usize>,
}

pub fn audit(spec: &ModelSpec) -> Audit {
    let mut variables = BTreeMap::new();
    for v in &spec.variables {
        *variables.entry(v.family.to_string()).or_insert(0) += 1;
    }
    let mut constraints = BTreeMap::new();
    for c in &spec.constraints {
        *constraints.entry(c.family.to_string()).or_insert(0) += 1;
    }
    Audit {
        variant: spec.variant,
        lrt: spec.flags.lrt,
        max_leg: spec.flags.max_leg,
        range: spec.range,
        segments: spec.segments,
        nodes: spec.n_nodes,
        sorties: spec.sorties.len(),
        big_m: spec.big_m,
        n_variables: spec.variables.len(),
        n_constraints: spec.constraints.len(),
        variables,
        constraints,
    }
}

impl Audit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit serializes")
    }
}
