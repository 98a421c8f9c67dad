//! Concurrent multicommodity flow: an approximate primal solver, an exact
//! single-commodity oracle, an exact dual checker, and sparsifier quality.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graphcore::{shortest_distances, TerminalGraph};
use crate::rational::{fmt_q, from_f64, parse_rational, q, to_f64, Q};

/// Symmetric nonnegative values on unordered pairs of terminal names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Demand {
    entries: BTreeMap<(String, String), Q>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Demand {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the value of `{a, b}`; zero removes the pair.
    pub fn set(&mut self, a: &str, b: &str, v: Q) -> Result<()> {
        if a == b {
            return Err(Error::Input(format!("demand on the diagonal pair ({a},{a})")));
        }
        if v.is_negative() {
            return Err(Error::Input(format!("negative demand on ({a},{b})")));
        }
        if v.is_zero() {
            self.entries.remove(&key(a, b));
        } else {
            self.entries.insert(key(a, b), v);
        }
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Q {
        self.entries.get(&key(a, b)).cloned().unwrap_or_else(Q::zero)
    }

    /// Positive entries in name order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, &Q)> {
        self.entries.iter().map(|((a, b), v)| (a.as_str(), b.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, s: &Q) -> Self {
        Self { entries: self.entries.iter().map(|(k, v)| (k.clone(), v * s)).collect() }
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self.pairs().map(|(a, b, v)| json!([a, b, fmt_q(v)])).collect();
        Value::Array(rows)
    }
}

/// Parses `demand <t1> <t2> <rational>` lines with `#` comments.
pub fn parse_demand(text: &str) -> Result<Demand> {
    let mut d = Demand::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parts: Vec<&str> = body.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line, msg };
        if parts.len() != 4 || parts[0] != "demand" {
            return Err(err(format!("expected `demand <t1> <t2> <value>`, got `{body}`")));
        }
        let v = parse_rational(parts[3]).ok_or_else(|| err(format!("bad rational `{}`", parts[3])))?;
        if d.entries.contains_key(&key(parts[1], parts[2])) {
            return Err(err(format!("repeated pair ({},{})", parts[1], parts[2])));
        }
        d.set(parts[1], parts[2], v).map_err(|e| err(e.to_string()))?;
    }
    Ok(d)
}

pub fn format_demand(d: &Demand) -> String {
    d.pairs().map(|(a, b, v)| format!("demand {a} {b} {}\n", fmt_q(v))).collect()
}

/// Random demand with integer entries in `0..=4` on every pair, at least one positive.
pub fn random_demand(names: &[String], seed: u64) -> Demand {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut d = Demand::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                d.set(&names[i], &names[j], q(rng.gen_range(0..=4))).expect("valid entry");
            }
        }
        if !d.is_empty() || names.len() < 2 {
            return d;
        }
    }
}

/// Outcome of the concurrent flow solver.
#[derive(Clone, Debug)]
pub struct FlowResult {
    /// Within `[(1 - epsilon) λ*, λ*]`.
    pub lambda: Q,
    pub congestion: Q,
    /// Per-edge load of a flow routing the demand itself, with congestion
    /// at most `1 / lambda`.
    pub loads: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    /// Best upper bound on λ* found by the solver.
    pub upper_bound: f64,
}

impl FlowResult {
    pub fn to_json(&self) -> Value {
        json!({
            "lambda": fmt_q(&self.lambda),
            "congestion": fmt_q(&self.congestion),
            "epsilon": self.epsilon,
            "iterations": self.iterations,
        })
    }
}

struct Commodity {
    s: usize,
    t: usize,
    d: f64,
}

fn commodities(g: &TerminalGraph, d: &Demand) -> Result<Vec<Commodity>> {
    let comp = g.components();
    d.pairs()
        .map(|(a, b, v)| {
            let find = |n: &str| g.terminal_vertex(n).ok_or_else(|| Error::Input(format!("unknown terminal {n}")));
            let (s, t) = (find(a)?, find(b)?);
            if comp[s] != comp[t] {
                return Err(Error::Infeasible(format!("terminals {a} and {b} are disconnected")));
            }
            Ok(Commodity { s, t, d: to_f64(v) })
        })
        .collect()
}

/// Shortest path from `s` to `t` as a list of edge ids.
fn shortest_path(adj: &[Vec<(usize, usize)>], len: &[f64], s: usize, t: usize) -> (f64, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((0f64.to_bits(), s)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let du = f64::from_bits(bits);
        if du > dist[u] {
            continue;
        }
        if u == t {
            break;
        }
        for &(w, e) in &adj[u] {
            let nd = du + len[e];
            if nd < dist[w] {
                dist[w] = nd;
                via[w] = e;
                heap.push(Reverse((nd.to_bits(), w)));
            }
        }
    }
    let mut path = Vec::new();
    let mut v = t;
    while v != s {
        let e = via[v];
        path.push(e);
        v = other(adj, v, e);
    }
    (dist[t], path)
}

fn other(adj: &[Vec<(usize, usize)>], v: usize, e: usize) -> usize {
    adj[v].iter().find(|x| x.1 == e).map(|x| x.0).expect("edge at vertex")
}

fn distances_from(adj: &[Vec<(usize, usize)>], len: &[f64], s: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((0f64.to_bits(), s)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let du = f64::from_bits(bits);
        if du > dist[u] {
            continue;
        }
        for &(w, e) in &adj[u] {
            let nd = du + len[e];
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((nd.to_bits(), w)));
            }
        }
    }
    dist
}

/// Floating-point max flow used to normalize demands before the main loop.
fn max_flow_f64(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut graph = vec![Vec::new(); n];
    let mut to = Vec::new();
    let mut cap = Vec::new();
    for &(u, v, c) in edges {
        graph[u].push(to.len());
        to.push(v);
        cap.push(c);
        graph[v].push(to.len());
        to.push(u);
        cap.push(c);
    }
    let mut total = 0.0;
    loop {
        let mut via = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &graph[u] {
                if cap[a] > 1e-12 && !seen[to[a]] {
                    seen[to[a]] = true;
                    via[to[a]] = a;
                    queue.push_back(to[a]);
                }
            }
        }
        if !seen[t] {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            push = push.min(cap[via[v]]);
            v = to[via[v] ^ 1];
        }
        let mut v = t;
        while v != s {
            cap[via[v]] -= push;
            cap[via[v] ^ 1] += push;
            v = to[via[v] ^ 1];
        }
        total += push;
    }
}

const MAX_PHASES: usize = 1_000_000;

/// Approximate maximum concurrent flow by multiplicative weights.
///
/// Each phase routes every commodity's full demand along shortest paths
/// under exponential edge lengths, splitting at the bottleneck capacity.
/// The averaged flow gives a feasible `λ_p`, and every length vector gives
/// the dual bound `Σ c ℓ / Σ d dist_ℓ ≥ λ*`. The solver stops as soon as
/// `λ_p` is within `1 - epsilon` of the best bound.
pub fn max_concurrent_flow(g: &TerminalGraph, d: &Demand, epsilon: f64) -> Result<FlowResult> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
    }
    g.validate()?;
    let com = commodities(g, d)?;
    if com.is_empty() {
        return Err(Error::Precondition("demand has no positive entry".into()));
    }
    let m = g.edges.len();
    let adj = g.adjacency();
    let caps: Vec<f64> = g.edges.iter().map(|e| to_f64(&e.capacity)).collect();
    let flat: Vec<(usize, usize, f64)> = g.edges.iter().zip(&caps).map(|(e, &c)| (e.u, e.v, c)).collect();
    // λ* lies in [u / r, u] for u the smallest single-commodity ratio
    let upper = com.iter().map(|c| max_flow_f64(g.n(), &flat, c.s, c.t) / c.d).fold(f64::INFINITY, f64::min);
    let scale = upper / com.len() as f64;
    let demand: Vec<f64> = com.iter().map(|c| c.d * scale).collect();

    let step = epsilon / 3.0;
    let mut len: Vec<f64> = caps.iter().map(|c| 1.0 / c).collect();
    let mut load = vec![0.0; m];
    let mut best_bound = upper;
    let mut phases = 0usize;
    let target = 1.0 - epsilon + 1e-6;
    let lambda_p = loop {
        for (i, c) in com.iter().enumerate() {
            let mut rest = demand[i];
            while rest > 0.0 {
                let (_, path) = shortest_path(&adj, &len, c.s, c.t);
                let bottleneck = path.iter().map(|&e| caps[e]).fold(f64::INFINITY, f64::min);
                let u = rest.min(bottleneck);
                for &e in &path {
                    load[e] += u;
                    len[e] *= 1.0 + step * u / caps[e];
                }
                rest -= u;
                if rest <= demand[i] * 1e-12 {
                    break;
                }
            }
        }
        phases += 1;
        let top = len.iter().cloned().fold(0.0, f64::max);
        if top > 1e100 {
            len.iter_mut().for_each(|l| *l /= top);
        }
        let cong = load.iter().zip(&caps).map(|(l, c)| l / c).fold(0.0, f64::max);
        let lambda_p = phases as f64 * scale / cong;
        let vol: f64 = len.iter().zip(&caps).map(|(l, c)| l * c).sum();
        let mut alpha = 0.0;
        let mut by_source: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for c in &com {
            let row = by_source.entry(c.s).or_insert_with(|| distances_from(&adj, &len, c.s));
            alpha += c.d * row[c.t];
        }
        best_bound = best_bound.min(vol / alpha);
        if lambda_p >= target * best_bound {
            break lambda_p;
        }
        if phases >= MAX_PHASES {
            return Err(Error::Unsupported("concurrent flow solver did not converge".into()));
        }
    };
    let lambda_f = lambda_p * (1.0 - 1e-9);
    let lambda = from_f64(lambda_f);
    let per_unit = phases as f64 * scale;
    Ok(FlowResult {
        congestion: q(1) / &lambda,
        lambda,
        loads: load.iter().map(|l| l / per_unit).collect(),
        epsilon,
        iterations: phases,
        upper_bound: best_bound,
    })
}

/// Exact maximum `s`-`t` flow by shortest augmenting paths over rationals.
pub fn exact_single_commodity(g: &TerminalGraph, s: &str, t: &str) -> Result<Q> {
    let find = |n: &str| g.id(n).ok_or_else(|| Error::Input(format!("unknown vertex {n}")));
    let (s, t) = (find(s)?, find(t)?);
    if s == t {
        return Err(Error::Precondition("source and sink coincide".into()));
    }
    if g.components()[s] != g.components()[t] {
        return Err(Error::Infeasible("source and sink are disconnected".into()));
    }
    let n = g.n();
    let mut graph = vec![Vec::new(); n];
    let mut to = Vec::new();
    let mut cap: Vec<Q> = Vec::new();
    for e in g.edges.iter().filter(|e| e.u != e.v) {
        graph[e.u].push(to.len());
        to.push(e.v);
        cap.push(e.capacity.clone());
        graph[e.v].push(to.len());
        to.push(e.u);
        cap.push(e.capacity.clone());
    }
    let mut total = Q::zero();
    loop {
        let mut via = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &graph[u] {
                if cap[a].is_positive() && !seen[to[a]] {
                    seen[to[a]] = true;
                    via[to[a]] = a;
                    queue.push_back(to[a]);
                }
            }
        }
        if !seen[t] {
            return Ok(total);
        }
        let mut push: Option<Q> = None;
        let mut v = t;
        while v != s {
            let c = &cap[via[v]];
            if push.as_ref().is_none_or(|p| c < p) {
                push = Some(c.clone());
            }
            v = to[via[v] ^ 1];
        }
        let push = push.expect("nonempty path");
        let mut v = t;
        while v != s {
            cap[via[v]] -= &push;
            cap[via[v] ^ 1] += &push;
            v = to[via[v] ^ 1];
        }
        total += push;
    }
}

/// Exact evaluation of a dual candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct DualReport {
    /// `Σ c(e) ℓ_e`.
    pub value: Q,
    /// Every pair's shortest path is at least its `δ`.
    pub feasible: bool,
    /// Pairs whose shortest path is shorter than `δ`.
    pub violations: Vec<(String, String)>,
    /// `Σ δ 𝒟 ≥ 1`, when a demand is supplied.
    pub normalized: Option<bool>,
}

impl DualReport {
    pub fn to_json(&self) -> Value {
        json!({
            "value": fmt_q(&self.value),
            "feasible": self.feasible,
            "violations": self.violations,
            "normalized": self.normalized,
        })
    }
}

pub fn dual_value(g: &TerminalGraph, lengths: &[Q], deltas: &Demand, demand: Option<&Demand>) -> Result<DualReport> {
    if lengths.len() != g.edges.len() {
        return Err(Error::Structural(format!("{} lengths for {} edges", lengths.len(), g.edges.len())));
    }
    if lengths.iter().any(|l| l.is_negative()) {
        return Err(Error::Input("negative dual length".into()));
    }
    let mut h = g.clone();
    for (e, l) in h.edges.iter_mut().zip(lengths) {
        e.length = l.clone();
    }
    let value = g.edges.iter().zip(lengths).fold(Q::zero(), |acc, (e, l)| acc + &e.capacity * l);
    let mut rows: BTreeMap<String, Vec<Option<Q>>> = BTreeMap::new();
    let mut violations = Vec::new();
    for (a, b, delta) in deltas.pairs() {
        let va = h.terminal_vertex(a).ok_or_else(|| Error::Structural(format!("unknown terminal {a}")))?;
        let vb = h.terminal_vertex(b).ok_or_else(|| Error::Structural(format!("unknown terminal {b}")))?;
        if !rows.contains_key(a) {
            rows.insert(a.to_string(), shortest_distances(&h, va)?);
        }
        let short = rows[a][vb].as_ref().is_some_and(|d| d < delta);
        if short {
            violations.push((a.to_string(), b.to_string()));
        }
    }
    let normalized = demand.map(|d| {
        let total = d.pairs().fold(Q::zero(), |acc, (a, b, v)| acc + v * deltas.get(a, b));
        total >= q(1)
    });
    Ok(DualReport { value, feasible: violations.is_empty(), violations, normalized })
}

/// Per-demand `cong_G / cong_H = λ_H / λ_G`.
#[derive(Clone, Debug)]
pub struct QualityReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub epsilon: f64,
}

impl QualityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "ratios": self.ratios,
            "max_ratio": self.max_ratio,
            "min_ratio": self.min_ratio,
            "epsilon": self.epsilon,
        })
    }
}

pub fn quality_ratio(g: &TerminalGraph, h: &TerminalGraph, demands: &[Demand], epsilon: f64) -> Result<QualityReport> {
    let (mut a, mut b) = (g.terminal_names(), h.terminal_names());
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::Input("graphs have different terminal sets".into()));
    }
    let ratios = demands
        .par_iter()
        .map(|d| {
            let lg = max_concurrent_flow(g, d, epsilon)?;
            let lh = max_concurrent_flow(h, d, epsilon)?;
            Ok(to_f64(&lh.lambda) / to_f64(&lg.lambda))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(QualityReport { ratios, max_ratio, min_ratio, epsilon })
}
