use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use evtspd_core::heuristics::{alns_search, Budget, SearchConfig, SearchOutcome, DESTROY_OPS, REPAIR_OPS};
use evtspd_core::model::RangeTable;
use evtspd_core::oracle::{solve_exact, OracleLimits};
use evtspd_core::{
    build_approximation, build_augmented_network, generate_instance, AugmentedNetwork, ChargeCurve, ChargingModel,
    Instance, Params, VariantFlags,
};
use evtspd_milp::{audit, build_model, write_lp, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::{BudgetArgs, ExperimentArgs, ExportArgs, GenerateArgs, ModelArgs, SolveArgs, VariantArg};

/// What a command was asked to do, written next to its outputs.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    instances: Vec<String>,
    seeds: Vec<u64>,
    config: serde_json::Value,
    out: String,
}

fn write_manifest(out: &Path, manifest: &RunManifest<'_>) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(out.join("manifest.json"), text).context("writing manifest")
}

fn paths(list: &[PathBuf]) -> Vec<String> {
    list.iter().map(|p| p.display().to_string()).collect()
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

/// Thread pool sized by `EVTSPD_THREADS`, or rayon's default when unset.
fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("EVTSPD_THREADS") {
        let n: usize = v.parse().with_context(|| format!("EVTSPD_THREADS={v} is not a count"))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

pub fn generate(a: &GenerateArgs) -> Result<bool> {
    fs::create_dir_all(&a.out)?;
    let params = Params { m_copies: a.m_copies, ..Params::default() };
    let mut files = Vec::new();
    let mut seeds = Vec::new();
    for k in 0..a.count {
        let seed = a.seed + k as u64;
        let inst = generate_instance(seed, a.customers as usize, a.stations, &params)?;
        let path = a.out.join(format!("c{}_s{}_seed{seed}.json", a.customers, a.stations));
        inst.save(&path)?;
        files.push(path);
        seeds.push(seed);
    }
    write_manifest(
        &a.out,
        &RunManifest {
            command: "generate",
            instances: paths(&files),
            seeds,
            config: serde_json::json!({
                "customers": a.customers,
                "stations": a.stations,
                "count": a.count,
                "params": params,
            }),
            out: a.out.display().to_string(),
        },
    )?;
    println!("wrote {} instances to {}", files.len(), a.out.display());
    Ok(true)
}

/// An instance prepared for solving.
struct Prepared {
    name: String,
    net: AugmentedNetwork,
    model: ChargingModel,
    flags: VariantFlags,
}

fn curve(m: &ModelArgs) -> Result<ChargeCurve> {
    match &m.curve {
        Some(p) => Ok(ChargeCurve::from_csv_path(p).with_context(|| format!("loading {}", p.display()))?),
        None => Ok(ChargeCurve::builtin()),
    }
}

fn segments(m: &ModelArgs) -> Result<usize> {
    match m.variant {
        VariantArg::Pl => Ok(1),
        VariantArg::Pp if m.segments >= 2 => Ok(m.segments),
        VariantArg::Pp => bail!("--variant pp needs --segments of at least 2"),
    }
}

fn load(path: &Path, m: &ModelArgs) -> Result<(Instance, AugmentedNetwork)> {
    let mut inst = Instance::load(path).with_context(|| format!("loading {}", path.display()))?;
    if m.range && inst.params.weight_range.is_none() {
        inst.params.weight_range = Some(RangeTable::default_for(inst.params.qd_s));
    }
    let copies = m.m_copies.unwrap_or(inst.params.m_copies);
    let net = build_augmented_network(&inst, copies);
    Ok((inst, net))
}

fn flags(m: &ModelArgs) -> VariantFlags {
    VariantFlags { lrt: m.lrt, max_leg: m.max_leg }
}

fn prepare(path: &Path, m: &ModelArgs, r: usize, curve: &ChargeCurve) -> Result<Prepared> {
    let (_, net) = load(path, m)?;
    Ok(Prepared { name: stem(path), net, model: build_approximation(curve, r)?, flags: flags(m) })
}

fn search_config(b: &BudgetArgs) -> SearchConfig {
    let budget = match b.iters {
        Some(n) => Budget::Iterations(n),
        None => Budget::Seconds(b.time),
    };
    SearchConfig { budget, seed: b.seed, ..SearchConfig::default() }
}

fn run_alns(p: &Prepared, b: &BudgetArgs) -> Result<SearchOutcome> {
    alns_search(&p.net, &p.model, &search_config(b), p.flags).with_context(|| format!("ALNS on {}", p.name))
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Gap of a heuristic cost over the optimum, in percent.
pub fn gap_pct(heuristic: f64, optimal: f64) -> f64 {
    (heuristic - optimal) / optimal * 100.0
}

struct SolveRow {
    line: String,
    gap: Option<f64>,
}

fn solve_one(path: &Path, a: &SolveArgs, r: usize, curve: &ChargeCurve) -> Result<SolveRow> {
    let p = prepare(path, &a.model, r, curve)?;
    let out = run_alns(&p, &a.budget)?;
    fs::write(a.out.join(format!("{}.solution.json", p.name)), out.best.to_json())?;
    if a.report {
        let file = fs::File::create(a.out.join(format!("{}.report.csv", p.name)))?;
        out.write_report_csv(std::io::BufWriter::new(file))?;
    }
    let (oracle, oracle_s) = if a.oracle {
        let limits = OracleLimits { time_budget: a.oracle_time.map(Duration::from_secs_f64), ..OracleLimits::default() };
        let started = Instant::now();
        let res = solve_exact(&p.net, &p.model, p.flags, limits).with_context(|| format!("oracle on {}", p.name))?;
        (Some(res.cost), Some(started.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    let gap = oracle.map(|o| gap_pct(out.best_cost, o));
    let mut line = format!(
        "{},{},{},{},{:.6},{:.6},{:.6},{}",
        p.name,
        variant_name(a.model.variant),
        r,
        a.budget.seed,
        out.initial_cost,
        out.best_cost,
        out.elapsed_s,
        out.iterations
    );
    for uses in out.bank.destroy_uses.iter().chain(&out.bank.repair_uses) {
        let _ = write!(line, ",{uses}");
    }
    let _ = write!(line, ",{},{},{}", opt_num(oracle), opt_num(oracle_s), opt_num(gap));
    Ok(SolveRow { line, gap })
}

fn variant_name(v: VariantArg) -> &'static str {
    match v {
        VariantArg::Pl => "pl",
        VariantArg::Pp => "pp",
    }
}

pub fn solve_header() -> String {
    let mut h = "instance,variant,segments,seed,initial_cost_s,alns_cost_s,runtime_s,iterations".to_string();
    for d in DESTROY_OPS {
        let _ = write!(h, ",uses_{}", d.name());
    }
    for r in REPAIR_OPS {
        let _ = write!(h, ",uses_{}", r.name());
    }
    h.push_str(",oracle_cost_s,oracle_runtime_s,gap_pct");
    h
}

pub fn solve(a: &SolveArgs) -> Result<bool> {
    fs::create_dir_all(&a.out)?;
    let r = segments(&a.model)?;
    let curve = curve(&a.model)?;
    let rows: Vec<Result<SolveRow>> =
        pool()?.install(|| a.instances.par_iter().map(|p| solve_one(p, a, r, &curve)).collect());
    let mut csv = solve_header();
    csv.push('\n');
    let mut ok = true;
    let mut gaps = Vec::new();
    for row in rows {
        match row {
            Ok(row) => {
                csv.push_str(&row.line);
                csv.push('\n');
                gaps.extend(row.gap);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ok = false;
            }
        }
    }
    fs::write(a.out.join("solve.csv"), &csv)?;
    write_manifest(
        &a.out,
        &RunManifest {
            command: "solve",
            instances: paths(&a.instances),
            seeds: vec![a.budget.seed],
            config: serde_json::json!({
                "variant": variant_name(a.model.variant),
                "segments": r,
                "time_s": a.budget.time,
                "iterations": a.budget.iters,
                "oracle": a.oracle,
                "lrt": a.model.lrt,
                "max_leg": a.model.max_leg,
                "range": a.model.range,
                "m_copies": a.model.m_copies,
            }),
            out: a.out.display().to_string(),
        },
    )?;
    print!("{csv}");
    if !gaps.is_empty() {
        println!("mean gap {:.3}% over {} instances", gaps.iter().sum::<f64>() / gaps.len() as f64, gaps.len());
    }
    Ok(ok)
}

pub fn export(a: &ExportArgs) -> Result<bool> {
    fs::create_dir_all(&a.out)?;
    let r = segments(&a.model)?;
    let curve = curve(&a.model)?;
    let variant = match a.model.variant {
        VariantArg::Pl => Variant::Pl,
        VariantArg::Pp => Variant::Pp,
    };
    let tag = match variant {
        Variant::Pl => "pl".to_string(),
        Variant::Pp => format!("pp_r{r}"),
    };
    let mut ok = true;
    for path in &a.instances {
        let result = (|| -> Result<()> {
            let p = prepare(path, &a.model, r, &curve)?;
            let spec = build_model(&p.net, &p.model, variant, p.flags, a.model.range)?;
            let base = a.out.join(format!("{}.{tag}", p.name));
            write_lp(&spec, &base.with_extension(format!("{tag}.lp")))?;
            fs::write(base.with_extension(format!("{tag}.audit.json")), audit(&spec).to_json())?;
            println!(
                "{}: {} variables, {} constraints",
                p.name,
                spec.variables.len(),
                spec.constraints.len()
            );
            Ok(())
        })();
        if let Err(e) = result {
            eprintln!("error: {e:#}");
            ok = false;
        }
    }
    write_manifest(
        &a.out,
        &RunManifest {
            command: "export",
            instances: paths(&a.instances),
            seeds: vec![],
            config: serde_json::json!({
                "variant": variant_name(a.model.variant),
                "segments": r,
                "lrt": a.model.lrt,
                "max_leg": a.model.max_leg,
                "range": a.model.range,
                "m_copies": a.model.m_copies,
            }),
            out: a.out.display().to_string(),
        },
    )?;
    Ok(ok)
}

pub fn experiment_r(a: &ExperimentArgs) -> Result<bool> {
    fs::create_dir_all(&a.out)?;
    if a.rs.is_empty() || a.rs.contains(&0) {
        bail!("--rs needs positive segment counts");
    }
    let curve = curve(&a.model)?;
    let jobs: Vec<(usize, usize)> =
        (0..a.instances.len()).flat_map(|i| a.rs.iter().map(move |&r| (i, r))).collect();
    let results: Vec<Result<f64>> = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(i, r)| {
                let p = prepare(&a.instances[i], &a.model, r, &curve)?;
                Ok(run_alns(&p, &a.budget)?.best_cost)
            })
            .collect()
    });
    let mut costs = vec![vec![f64::NAN; a.rs.len()]; a.instances.len()];
    let mut ok = true;
    for (&(i, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(c) => costs[i][a.rs.iter().position(|&x| x == r).unwrap()] = c,
            Err(e) => {
                eprintln!("error: {e:#}");
                ok = false;
            }
        }
    }
    let mut detail = "instance".to_string();
    for r in &a.rs {
        let _ = write!(detail, ",cost_r{r}_s");
    }
    detail.push('\n');
    for (i, row) in costs.iter().enumerate() {
        detail.push_str(&stem(&a.instances[i]));
        for c in row {
            let _ = write!(detail, ",{c:.6}");
        }
        detail.push('\n');
    }
    fs::write(a.out.join("experiment_r.csv"), &detail)?;

    let means = sweep_means(&costs);
    let mut summary = "segments,mean_cost_s,gap_vs_first_pct\n".to_string();
    for (r, m) in a.rs.iter().zip(&means) {
        let _ = writeln!(summary, "{r},{m:.6},{:.6}", (means[0] - m) / means[0] * 100.0);
    }
    fs::write(a.out.join("experiment_r_summary.csv"), &summary)?;
    write_manifest(
        &a.out,
        &RunManifest {
            command: "experiment-r",
            instances: paths(&a.instances),
            seeds: vec![a.budget.seed],
            config: serde_json::json!({
                "segments": a.rs,
                "time_s": a.budget.time,
                "iterations": a.budget.iters,
                "lrt": a.model.lrt,
                "max_leg": a.model.max_leg,
                "range": a.model.range,
                "m_copies": a.model.m_copies,
            }),
            out: a.out.display().to_string(),
        },
    )?;
    print!("{detail}{summary}");
    Ok(ok)
}

/// Column means of a cost table.
pub fn sweep_means(costs: &[Vec<f64>]) -> Vec<f64> {
    let width = costs.first().map_or(0, Vec::len);
    (0..width).map(|j| costs.iter().map(|row| row[j]).sum::<f64>() / costs.len() as f64).collect()
}
