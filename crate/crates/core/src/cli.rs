//! Command implementations behind the `tsflow` binary. Each command is a pure
//! function of its inputs and seed and returns its report as JSON.

use std::collections::BTreeMap;

use num::Zero;
use serde_json::{json, Value};

use crate::decompose5::{contract, cost, expected_cost_with, Sampler};
use crate::error::Error;
use crate::flowlp::{parse_demand, quality_ratio, random_demand, Demand};
use crate::graphcore::{format_graph, parse_graph, project_graph};
use crate::hard6::{self, CandidateSolution, HardInstance};
use crate::metric::parse_metric;
use crate::rational::{fmt_q, fmt_vec, parse_rational, q, to_f64, Q};
use crate::tightspan::{enumerate_complex, in_tight_span, project};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input files (exit 2).
    Input(String),
    /// A checked property failed (exit 1).
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Assertion(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Complex of a metric file.
pub fn cmd_tightspan(metric_text: &str) -> CliResult<Value> {
    let m = parse_metric(metric_text)?;
    let c = enumerate_complex(&m)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for cell in &c.cells {
        *counts.entry(cell.dimension.to_string()).or_insert(0) += 1;
    }
    let mut out = c.to_json();
    out["cell_counts"] = json!(counts);
    Ok(out)
}

/// Parses a comma- or space-separated rational vector.
pub fn parse_vector(text: &str) -> CliResult<Vec<Q>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_rational(s).ok_or_else(|| CliError::Input(format!("malformed rational `{s}` in vector"))))
        .collect()
}

/// Projection of one vector into the tight span.
pub fn cmd_project(metric_text: &str, vector: &str) -> CliResult<Value> {
    let m = parse_metric(metric_text)?;
    let x = parse_vector(vector)?;
    if x.len() != m.k() {
        return Err(CliError::Input(format!("vector has {} coordinates, metric has {} terminals", x.len(), m.k())));
    }
    let p = project(&m, &x)?;
    if !in_tight_span(&m, &p) {
        return Err(CliError::Assertion("projection left the tight span".into()));
    }
    Ok(json!({"terminals": m.names(), "input": fmt_vec(&x), "point": fmt_vec(&p)}))
}

/// Best of `samples` random decompositions, its contraction and the Monte
/// Carlo summary.
pub fn cmd_sparsify(graph_text: &str, seed: u64, samples: usize) -> CliResult<Value> {
    if samples < 2 {
        return Err(CliError::Input("--samples must be at least 2".into()));
    }
    let g = parse_graph(graph_text)?;
    let k = g.terminals.len();
    if k > 5 {
        return Err(CliError::Input(format!("sparsify supports at most 5 terminals, the graph has {k}")));
    }
    let e = project_graph(&g)?;
    let sampler = Sampler::new(&e)?;
    let mut best: Option<(Q, usize, crate::decompose5::Solution)> = None;
    for i in 0..samples {
        let s = sampler.sample(seed, i as u64);
        let r = cost(&e, &s)?;
        if best.as_ref().is_none_or(|(v, _, _)| r.vol < *v) {
            best = Some((r.vol, i, s));
        }
    }
    let (_, index, sol) = best.expect("at least one sample");
    let report = cost(&e, &sol)?;
    let h = contract(&g, &sol)?;
    let mc = expected_cost_with(&sampler, &e, samples, seed)?;
    let opt = to_f64(&mc.opt);
    let (mean_ratio, ratio_stderr) =
        if mc.opt.is_zero() { (1.0, 0.0) } else { (mc.vol.mean / opt, mc.vol.stderr / opt) };
    let mut mc_json = mc.to_json();
    mc_json["mean_ratio"] = json!(mean_ratio);
    mc_json["ratio_stderr"] = json!(ratio_stderr);
    Ok(json!({
        "seed": seed,
        "best_sample": index,
        "clusters": sol.cluster_count(),
        "solution": sol.to_json(&g),
        "cost": report.to_json(),
        "sparsifier": format_graph(&h),
        "monte_carlo": mc_json,
    }))
}

/// Where `cmd_quality` takes its demands from.
pub enum DemandSource<'a> {
    File(&'a str),
    Random { count: usize, seed: u64 },
}

/// Congestion ratios of `h` against `g` over a set of demands.
pub fn cmd_quality(g_text: &str, h_text: &str, source: DemandSource<'_>, epsilon: f64) -> CliResult<Value> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CliError::Input(format!("--epsilon must lie in (0, 1), got {epsilon}")));
    }
    let g = parse_graph(g_text)?;
    let h = parse_graph(h_text)?;
    let names = g.terminal_names();
    let demands: Vec<Demand> = match source {
        DemandSource::File(text) => vec![parse_demand(text)?],
        DemandSource::Random { count, seed } => {
            (0..count as u64).map(|i| random_demand(&names, seed.wrapping_add(i))).collect()
        }
    };
    if demands.is_empty() {
        return Err(CliError::Input("no demands to evaluate".into()));
    }
    let r = quality_ratio(&g, &h, &demands, epsilon)?;
    Ok(r.to_json())
}

/// Options of `cmd_hard6`.
#[derive(Clone, Debug)]
pub struct Hard6Options {
    pub l: i64,
    pub ave: bool,
    pub gamma: Q,
    pub snap_grid: Option<i64>,
}

/// Instance files and diagnostics of the six-terminal hard instance.
pub struct Hard6Output {
    pub report: Value,
    pub graph_text: String,
    pub sidecar: Value,
}

fn checks_json(inst: &HardInstance, sol: &CandidateSolution) -> CliResult<(Value, bool)> {
    let l = hard6::losses(inst, sol)?;
    let d = hard6::directional_losses(inst, sol)?;
    let p = hard6::planar_losses(inst, sol)?;
    let ok = d.cost_checks.iter().all(|c| c.holds())
        && d.claim_x_failures.is_empty()
        && p.cx_failures.is_empty()
        && p.transfer_failures.is_empty()
        && p.cost_check.holds();
    Ok((
        json!({
            "image_size": sol.image_size(),
            "losses": l.to_json(inst),
            "directional": d.to_json(),
            "planar": p.to_json(),
            "checks_hold": ok,
        }),
        ok,
    ))
}

pub fn cmd_hard6(o: &Hard6Options) -> CliResult<Hard6Output> {
    let inst = hard6::generate(o.l, o.ave, &o.gamma)?;
    if let Some(g) = o.snap_grid {
        if g < 1 {
            return Err(CliError::Input(format!("--snap-grid must be at least 1, got {g}")));
        }
    }
    let opt = inst.opt();
    let table_opt = inst.table_opt();
    let bound = q(90 * o.l * o.l);
    let id = CandidateSolution::identity(&inst);
    let id_loss = hard6::losses(&inst, &id)?;
    let mut report = json!({
        "L": o.l,
        "vertices": inst.graph.n(),
        "edges": inst.graph.edges.len(),
        "paths": inst.group_counts(),
        "opt": fmt_q(&opt),
        "opt_bound": fmt_q(&bound),
        "table_opt": fmt_q(&table_opt),
        "opt_within_bound": table_opt <= bound,
        "identity_loss": fmt_q(&id_loss.total),
    });
    let mut failures = Vec::new();
    if table_opt > bound {
        failures.push(format!("table opt {table_opt} exceeds 90·L² = {bound}"));
    }
    if let Some(g) = o.snap_grid {
        let sol = hard6::grid_snap(&inst, g)?;
        let (diag, ok) = checks_json(&inst, &sol)?;
        if !ok {
            failures.push(format!("loss inequalities fail for grid {g}"));
        }
        report["snap"] = json!({"grid": g, "diagnostics": diag});
        if o.ave {
            let deltas = hard6::terminal_deltas(&inst, &sol);
            let good = hard6::check_good(&inst, &deltas, &Q::zero());
            report["snap"]["good_violations"] = json!(good.describe());
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Assertion(failures.join("; ")));
    }
    Ok(Hard6Output { report, graph_text: format_graph(&inst.graph), sidecar: inst.to_json() })
}

/// Renders JSON as indented `key: value` lines.
pub fn render_text(v: &Value) -> String {
    fn walk(v: &Value, prefix: &str, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(x, &p, out);
                }
            }
            Value::String(s) if s.contains('\n') => {
                out.push_str(&format!("{prefix}:\n"));
                for line in s.lines() {
                    out.push_str(&format!("  {line}\n"));
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
            x => out.push_str(&format!("{prefix}: {x}\n")),
        }
    }
    let mut out = String::new();
    walk(v, "", &mut out);
    out
}
