//! Adaptive large neighbourhood search with simulated-annealing acceptance.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charging::ChargingModel;
use crate::insertion::repair_cp;
use crate::model::{AugmentedNetwork, NodeId};
use crate::solution::{check_feasible, restore_feasibility_g, Solution, VariantFlags, ViolationKind, EPS};

use super::{destroy_cluster, destroy_random, max_removal, mcws_initial, repair_greedy, repair_nearby, HeuristicError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DestroyOp {
    Random,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RepairOp {
    Greedy,
    Nearby,
    Cp,
}

pub const DESTROY_OPS: [DestroyOp; 2] = [DestroyOp::Random, DestroyOp::Cluster];
pub const REPAIR_OPS: [RepairOp; 3] = [RepairOp::Greedy, RepairOp::Nearby, RepairOp::Cp];

impl DestroyOp {
    pub fn name(self) -> &'static str {
        match self {
            DestroyOp::Random => "random",
            DestroyOp::Cluster => "cluster",
        }
    }
}

impl RepairOp {
    pub fn name(self) -> &'static str {
        match self {
            RepairOp::Greedy => "greedy",
            RepairOp::Nearby => "nearby",
            RepairOp::Cp => "cp",
        }
    }
}

/// Outcome class of an iteration, used for score rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// The candidate is a new global best.
    NewBest,
    /// The candidate is feasible but not a new global best.
    Feasible,
    /// No feasible candidate was produced.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Seconds(f64),
    Iterations(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub budget: Budget,
    pub t0: f64,
    pub t_min: f64,
    pub no_improve_max: u64,
    pub seed: u64,
    pub rho: f64,
    /// Rewards for new best, feasible, failed.
    pub lambdas: [f64; 3],
    /// Divisors for slow and fast iterations.
    pub taus: [f64; 2],
    pub initial_score: f64,
    /// Iterations longer than this many seconds count as slow.
    pub slow_iteration_s: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: Budget::Seconds(5.0),
            t0: 1000.0,
            t_min: 5.0,
            no_improve_max: 50,
            seed: 0,
            rho: 0.8,
            lambdas: [30.0, 10.0, 0.0],
            taus: [2.0, 1.0],
            initial_score: 10.0,
            slow_iteration_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorBank {
    pub destroy: Vec<f64>,
    pub repair: Vec<f64>,
    pub destroy_uses: Vec<u64>,
    pub repair_uses: Vec<u64>,
}

impl OperatorBank {
    pub fn new(initial_score: f64) -> Self {
        OperatorBank {
            destroy: vec![initial_score; DESTROY_OPS.len()],
            repair: vec![initial_score; REPAIR_OPS.len()],
            destroy_uses: vec![0; DESTROY_OPS.len()],
            repair_uses: vec![0; REPAIR_OPS.len()],
        }
    }
}

/// Roulette-wheel draw: index `i` with probability `scores[i] / sum`.
pub fn select_operator<R: Rng>(scores: &[f64], rng: &mut R) -> usize {
    let total: f64 = scores.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, &w) in scores.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    scores.len() - 1
}

/// `w <- rho * w + (lambda / tau) * (1 - rho)`.
pub fn update_score(score: &mut f64, rho: f64, lambda: f64, tau: f64) {
    *score = rho * *score + (lambda / tau) * (1.0 - rho);
}

/// Metropolis acceptance; never-worse candidates are always accepted.
pub fn accept<R: Rng>(current: f64, candidate: f64, temperature: f64, rng: &mut R) -> bool {
    if candidate <= current {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < ((current - candidate) / temperature).exp()
}

/// `T0 * (1 - t / t_m)`.
pub fn temperature(t0: f64, elapsed: f64, limit: f64) -> f64 {
    t0 * (1.0 - elapsed / limit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub elapsed_s: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub operator_d: &'static str,
    pub operator_r: &'static str,
    pub candidate_cost: Option<f64>,
    pub accepted: bool,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: Solution,
    pub best_cost: f64,
    pub initial_cost: f64,
    pub iterations: u64,
    pub elapsed_s: f64,
    pub bank: OperatorBank,
    pub report: Vec<IterationRecord>,
}

impl SearchOutcome {
    /// Best cost after each iteration.
    pub fn best_trace(&self) -> Vec<f64> {
        self.report.iter().map(|r| r.best_cost).collect()
    }

    pub fn write_report_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,elapsed_s,T,operator_d,operator_r,candidate_cost,accepted,best_cost")?;
        for r in &self.report {
            let cand = r.candidate_cost.map(|c| format!("{c:.6}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.6},{:.6},{},{},{},{},{:.6}",
                r.iteration, r.elapsed_s, r.temperature, r.operator_d, r.operator_r, cand, r.accepted, r.best_cost
            )?;
        }
        Ok(())
    }
}

/// Notifications emitted by [`alns_search_observed`].
pub enum SearchEvent<'a> {
    /// A candidate replaced the current solution.
    Accepted { solution: &'a Solution, cost: f64 },
    /// A candidate became the new global best.
    NewBest { solution: &'a Solution, cost: f64 },
}

fn apply_destroy<R: Rng>(
    op: DestroyOp,
    sol: &Solution,
    net: &AugmentedNetwork,
    rng: &mut R,
) -> Result<(Solution, Vec<NodeId>), HeuristicError> {
    let limit = max_removal(sol, net);
    if limit == 0 {
        return Ok((sol.clone(), Vec::new()));
    }
    let beta = rng.gen_range(1..=limit);
    match op {
        DestroyOp::Random => destroy_random(sol, net, beta, rng),
        DestroyOp::Cluster => destroy_cluster(sol, net, beta, rng),
    }
}

fn apply_repair<R: Rng>(
    op: RepairOp,
    partial: &Solution,
    removed: &[NodeId],
    net: &AugmentedNetwork,
    model: &ChargingModel,
    flags: VariantFlags,
    rng: &mut R,
) -> Result<Solution, HeuristicError> {
    match op {
        RepairOp::Greedy => repair_greedy(partial, removed, net, model, flags),
        RepairOp::Nearby => repair_nearby(partial, removed, net, model, flags),
        RepairOp::Cp => repair_cp(partial, removed, net, model, flags, rng),
    }
}

pub fn alns_search(
    net: &AugmentedNetwork,
    model: &ChargingModel,
    config: &SearchConfig,
    flags: VariantFlags,
) -> Result<SearchOutcome, HeuristicError> {
    alns_search_observed(net, model, config, flags, |_| {})
}

/// ALNS main loop. Starts from the construction heuristic and runs until
/// the budget is spent or the temperature drops below `t_min`. In
/// iteration-budget mode every iteration counts as fast for score updates,
/// which keeps runs reproducible.
pub fn alns_search_observed<F: FnMut(SearchEvent<'_>)>(
    net: &AugmentedNetwork,
    model: &ChargingModel,
    config: &SearchConfig,
    flags: VariantFlags,
    mut observe: F,
) -> Result<SearchOutcome, HeuristicError> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = mcws_initial(net, model)?;
    let initial_cost = check_feasible(&initial, net, model, flags)
        .map_err(|v| HeuristicError::ConstructionFailure(v.to_string()))?
        .completion;

    let mut current = initial.clone();
    let mut current_cost = initial_cost;
    let mut best = initial;
    let mut best_cost = initial_cost;
    let mut bank = OperatorBank::new(config.initial_score);
    let mut report = Vec::new();
    let mut no_improve = 0u64;
    let mut iteration = 0u64;

    let progress = |iteration: u64, start: &Instant| -> f64 {
        match config.budget {
            Budget::Seconds(limit) => start.elapsed().as_secs_f64() / limit,
            Budget::Iterations(limit) => iteration as f64 / limit as f64,
        }
    };

    loop {
        let frac = progress(iteration, &start);
        if frac > 1.0 || config.t0 * (1.0 - frac) < config.t_min {
            break;
        }
        let iter_start = Instant::now();
        let d = select_operator(&bank.destroy, &mut rng);
        let r = select_operator(&bank.repair, &mut rng);
        bank.destroy_uses[d] += 1;
        bank.repair_uses[r] += 1;

        let candidate = apply_destroy(DESTROY_OPS[d], &current, net, &mut rng).and_then(|(partial, removed)| {
            apply_repair(REPAIR_OPS[r], &partial, &removed, net, model, flags, &mut rng)
        });
        let candidate = candidate.ok().and_then(|s| match check_feasible(&s, net, model, flags) {
            Ok(t) => Some((s, t.completion)),
            Err(v) if v.kind() == ViolationKind::Energy => {
                let fixed = restore_feasibility_g(&s, net)?;
                let t = check_feasible(&fixed, net, model, flags).ok()?;
                Some((fixed, t.completion))
            }
            Err(_) => None,
        });

        iteration += 1;
        let temp = temperature(config.t0, progress(iteration, &start), 1.0);
        let mut accepted = false;
        let candidate_cost = candidate.as_ref().map(|c| c.1);
        let outcome = match candidate {
            Some((sol, c)) => {
                if c < best_cost - EPS {
                    best = sol.clone();
                    best_cost = c;
                    current = sol;
                    current_cost = c;
                    accepted = true;
                    no_improve = 0;
                    observe(SearchEvent::NewBest { solution: &best, cost: best_cost });
                    observe(SearchEvent::Accepted { solution: &current, cost: current_cost });
                    Outcome::NewBest
                } else {
                    if accept(current_cost, c, temp, &mut rng) {
                        current = sol;
                        current_cost = c;
                        accepted = true;
                        observe(SearchEvent::Accepted { solution: &current, cost: current_cost });
                    }
                    no_improve += 1;
                    Outcome::Feasible
                }
            }
            None => {
                no_improve += 1;
                Outcome::Failed
            }
        };
        if no_improve > config.no_improve_max {
            current = best.clone();
            current_cost = best_cost;
            no_improve = 0;
        }

        let lambda = match outcome {
            Outcome::NewBest => config.lambdas[0],
            Outcome::Feasible => config.lambdas[1],
            Outcome::Failed => config.lambdas[2],
        };
        let slow = matches!(config.budget, Budget::Seconds(_))
            && iter_start.elapsed() > Duration::from_secs_f64(config.slow_iteration_s);
        let tau = if slow { config.taus[0] } else { config.taus[1] };
        update_score(&mut bank.destroy[d], config.rho, lambda, tau);
        update_score(&mut bank.repair[r], config.rho, lambda, tau);

        report.push(IterationRecord {
            iteration,
            elapsed_s: start.elapsed().as_secs_f64(),
            temperature: temp,
            operator_d: DESTROY_OPS[d].name(),
            operator_r: REPAIR_OPS[r].name(),
            candidate_cost,
            accepted,
            best_cost,
        });
    }

    let timeline = check_feasible(&best, net, model, flags).expect("best solution stays feasible");
    let best = best.with_charges(&timeline, net);
    Ok(SearchOutcome {
        best,
        best_cost,
        initial_cost,
        iterations: iteration,
        elapsed_s: start.elapsed().as_secs_f64(),
        bank,
        report,
    })
}
