//! CPLEX LP text output and a small reader for the same dialect.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{ModelSpec, Sense};
use crate::MilpError;

const LINE_WIDTH: usize = 100;

/// Shortest round-trip decimal, without a sign on zero.
fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

fn push_wrapped(out: &mut String, line: &mut String, token: &str) {
    if line.len() + token.len() + 1 > LINE_WIDTH && !line.trim().is_empty() {
        out.push_str(line.trim_end());
        out.push('\n');
        line.clear();
        line.push_str("   ");
    }
    line.push(' ');
    line.push_str(token);
}

fn term_tokens(coef: f64, name: &str) -> String {
    let sign = if coef < 0.0 { "-" } else { "+" };
    let mag = coef.abs();
    if mag == 1.0 {
        format!("{sign} {name}")
    } else {
        format!("{sign} {} {name}", num(mag))
    }
}

/// Renders the model. Output depends only on the model, so equal models give
/// identical text.
pub fn lp_string(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ variant {:?}, lrt {}, max_leg {:?}, range {}, segments {}",
        spec.variant, spec.flags.lrt, spec.flags.max_leg, spec.range, spec.segments
    );
    out.push_str("Minimize\n");
    let _ = writeln!(out, " obj: {}", spec.variables[spec.objective].name);
    out.push_str("Subject To\n");
    for c in &spec.constraints {
        let mut line = format!(" {}:", c.name);
        if c.terms.is_empty() {
            push_wrapped(&mut out, &mut line, &format!("0 {}", spec.variables[spec.objective].name));
        }
        for &(v, coef) in &c.terms {
            push_wrapped(&mut out, &mut line, &term_tokens(coef, &spec.variables[v].name));
        }
        push_wrapped(&mut out, &mut line, &format!("{} {}", c.sense.symbol(), num(c.rhs)));
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for v in spec.variables.iter().filter(|v| !v.binary) {
        match (v.lower, v.upper) {
            (lo, hi) if lo == 0.0 && hi.is_infinite() => {}
            (lo, hi) if lo == hi => {
                let _ = writeln!(out, " {} = {}", v.name, num(lo));
            }
            (lo, hi) if hi.is_infinite() => {
                let _ = writeln!(out, " {} >= {}", v.name, num(lo));
            }
            (lo, hi) => {
                let _ = writeln!(out, " {} <= {} <= {}", num(lo), v.name, num(hi));
            }
        }
    }
    out.push_str("Binaries\n");
    let mut line = String::new();
    for v in spec.variables.iter().filter(|v| v.binary) {
        push_wrapped(&mut out, &mut line, &v.name);
    }
    if !line.trim().is_empty() {
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(spec: &ModelSpec, path: &Path) -> Result<(), MilpError> {
    std::fs::write(path, lp_string(spec))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConstraint {
    pub name: String,
    pub terms: BTreeMap<String, f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedLp {
    pub objective: BTreeMap<String, f64>,
    pub minimize: bool,
    pub constraints: Vec<ParsedConstraint>,
    /// Explicit bounds; variables not listed keep `[0, inf)`.
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub binaries: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn parse_num(tok: &str) -> Result<f64, MilpError> {
    match tok {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| MilpError::Parse(format!("bad number '{tok}'"))),
    }
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Linear expression tokens to `name -> coefficient`.
fn parse_expr(tokens: &[&str]) -> Result<BTreeMap<String, f64>, MilpError> {
    let mut terms = BTreeMap::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -sign,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(coef.unwrap_or(1.0) * v);
                } else {
                    *terms.entry(tok.to_string()).or_insert(0.0) += sign * coef.unwrap_or(1.0);
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    Ok(terms)
}

fn split_label(text: &str) -> (Option<String>, &str) {
    match text.find(':') {
        Some(p) => (Some(text[..p].trim().to_string()), &text[p + 1..]),
        None => (None, text),
    }
}

/// Reads LP text of the shape produced by [`lp_string`]: one named
/// constraint per statement, whitespace-separated tokens, statements
/// possibly continued on following lines.
pub fn parse_lp(text: &str) -> Result<ParsedLp, MilpError> {
    let mut lp = ParsedLp::default();
    let mut section = Section::None;
    let mut pending = String::new();
    let mut objective_text = String::new();

    let flush_constraint = |pending: &mut String, lp: &mut ParsedLp| -> Result<(), MilpError> {
        if pending.trim().is_empty() {
            return Ok(());
        }
        let (name, body) = split_label(pending);
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let pos = tokens
            .iter()
            .position(|t| parse_sense(t).is_some())
            .ok_or_else(|| MilpError::Parse(format!("no sense in '{pending}'")))?;
        let rhs_tokens = &tokens[pos + 1..];
        let rhs = match rhs_tokens {
            [v] => parse_num(v)?,
            ["-", v] => -parse_num(v)?,
            _ => return Err(MilpError::Parse(format!("bad right-hand side in '{pending}'"))),
        };
        lp.constraints.push(ParsedConstraint {
            name: name.unwrap_or_else(|| format!("r{}", lp.constraints.len() + 1)),
            terms: parse_expr(&tokens[..pos])?,
            sense: parse_sense(tokens[pos]).unwrap(),
            rhs,
        });
        pending.clear();
        Ok(())
    };

    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let header = trimmed.to_ascii_lowercase();
        let next = match header.as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "maximize" | "maximum" | "max" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(next) = next {
            if section == Section::Constraints {
                flush_constraint(&mut pending, &mut lp)?;
            }
            if next == Section::Objective {
                lp.minimize = header.starts_with("min");
            }
            section = next;
            continue;
        }
        match section {
            Section::Objective => {
                objective_text.push(' ');
                objective_text.push_str(trimmed);
            }
            Section::Constraints => {
                let starts_new = !raw.starts_with("   ") && trimmed.contains(':');
                if starts_new {
                    flush_constraint(&mut pending, &mut lp)?;
                }
                pending.push(' ');
                pending.push_str(trimmed);
            }
            Section::Bounds => {
                let tokens: Vec<&str> = trimmed.split_whitespace().collect();
                match tokens.as_slice() {
                    [lo, s1, name, s2, hi] if parse_sense(s1) == Some(Sense::Le) && parse_sense(s2) == Some(Sense::Le) => {
                        lp.bounds.insert(name.to_string(), (parse_num(lo)?, parse_num(hi)?));
                    }
                    [name, s, v] => {
                        let v = parse_num(v)?;
                        let entry = lp.bounds.entry(name.to_string()).or_insert((0.0, f64::INFINITY));
                        match parse_sense(s) {
                            Some(Sense::Eq) => *entry = (v, v),
                            Some(Sense::Ge) => entry.0 = v,
                            Some(Sense::Le) => entry.1 = v,
                            None => return Err(MilpError::Parse(format!("bad bound '{trimmed}'"))),
                        }
                    }
                    [name, "free"] => {
                        lp.bounds.insert(name.to_string(), (f64::NEG_INFINITY, f64::INFINITY));
                    }
                    _ => return Err(MilpError::Parse(format!("bad bound '{trimmed}'"))),
                }
            }
            Section::Binaries => lp.binaries.extend(trimmed.split_whitespace().map(String::from)),
            Section::None | Section::End => {
                return Err(MilpError::Parse(format!("text outside a section: '{trimmed}'")));
            }
        }
    }
    if section == Section::Constraints {
        flush_constraint(&mut pending, &mut lp)?;
    }
    let (_, body) = split_label(&objective_text);
    let tokens: Vec<&str> = body.split_whitespace().collect();
    lp.objective = parse_expr(&tokens)?;
    Ok(lp)
}
