//! Randomized partitions of graphs with at most five terminals whose
//! expected cost does not exceed the optimum, and contraction into a
//! sparsifier.

mod sampler;
mod template;

pub use sampler::{Refinement, Rounder};
pub use template::{classify, isolation_index, metric_from_template, terminal_points, Param, TemplateKind, TsTemplate};

use std::collections::{BTreeMap, HashSet};

use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graphcore::{EmbeddedGraph, TerminalGraph};
use crate::metric::TerminalMetric;
use crate::rational::{fmt_q, fmt_vec, one, q, qr, to_f64, Q};
use crate::tightspan::{enumerate_complex, project, ts_distance, TsPoint};

/// A partition of the vertices with one tight-span point per cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Cluster of every vertex.
    pub assignment: Vec<usize>,
    pub representatives: Vec<TsPoint>,
}

impl Solution {
    /// Singleton partition represented by the embedding itself.
    pub fn singletons(e: &EmbeddedGraph) -> Self {
        Self { assignment: (0..e.embedding.len()).collect(), representatives: e.embedding.clone() }
    }

    pub fn cluster_count(&self) -> usize {
        self.representatives.len()
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// `δ(F, F')` between two clusters.
    pub fn delta(&self, a: usize, b: usize) -> Q {
        ts_distance(&self.representatives[a], &self.representatives[b])
    }

    pub fn to_json(&self, g: &TerminalGraph) -> Value {
        let clusters: Vec<Vec<&str>> = self.clusters().iter().map(|c| c.iter().map(|&v| g.name(v)).collect()).collect();
        json!({
            "clusters": clusters,
            "representatives": self.representatives.iter().map(|r| fmt_vec(r)).collect::<Vec<_>>(),
        })
    }
}

/// `vol` of a solution against the optimum `Σ c·dist(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub vol: Q,
    pub opt: Q,
    pub ratio: Q,
}

impl CostReport {
    pub fn to_json(&self) -> Value {
        json!({ "vol": fmt_q(&self.vol), "opt": fmt_q(&self.opt), "ratio": fmt_q(&self.ratio) })
    }
}

fn check_cover(e: &EmbeddedGraph, s: &Solution) -> Result<()> {
    if s.assignment.len() != e.base.n() || s.assignment.iter().any(|&c| c >= s.cluster_count()) {
        return Err(Error::Structural("partition does not cover every vertex".into()));
    }
    Ok(())
}

/// Exact cost of a solution; an empty edge set has ratio 1.
pub fn cost(e: &EmbeddedGraph, s: &Solution) -> Result<CostReport> {
    check_cover(e, s)?;
    let dist = e.edge_distances();
    let mut vol = Q::zero();
    let mut opt = Q::zero();
    for (edge, d) in e.base.edges.iter().zip(&dist) {
        vol += &edge.capacity * s.delta(s.assignment[edge.u], s.assignment[edge.v]);
        opt += &edge.capacity * d;
    }
    let ratio = if opt.is_zero() {
        if !vol.is_zero() {
            return Err(Error::Structural("positive volume against zero optimum".into()));
        }
        one()
    } else {
        &vol / &opt
    };
    Ok(CostReport { vol, opt, ratio })
}

/// Draws partitions of one embedded graph.
#[derive(Clone, Debug)]
pub struct Sampler {
    rounder: Rounder,
    /// ℓ∞ distances between refined vertices.
    dist: Vec<Vec<f64>>,
}

impl Sampler {
    pub fn new(e: &EmbeddedGraph) -> Result<Self> {
        if e.metric.k() > 5 {
            return Err(Error::Unsupported(format!("sampling supports at most 5 terminals, got {}", e.metric.k())));
        }
        if e.embedding.len() != e.base.n() {
            return Err(Error::Structural("embedding does not match the graph".into()));
        }
        let complex = enumerate_complex(&e.metric)?;
        let rounder = Rounder::new(&complex, &e.embedding)?;
        let pts = &rounder.refinement.points;
        let dist = pts.iter().map(|a| pts.iter().map(|b| to_f64(&ts_distance(a, b))).collect()).collect();
        Ok(Self { rounder, dist })
    }

    /// Number of refined vertices, an upper bound on every cluster count.
    pub fn refined_vertex_count(&self) -> usize {
        self.rounder.refinement.points.len()
    }

    /// Number of independent thresholds per draw.
    pub fn zone_count(&self) -> usize {
        self.rounder.refinement.zone_count()
    }

    /// Sample number `index` of the stream started by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Solution {
        let chosen = self.rounder.round(seed, index);
        let used: BTreeMap<usize, usize> = {
            let mut ids: Vec<usize> = chosen.clone();
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
        };
        let pts = &self.rounder.refinement.points;
        Solution {
            assignment: chosen.iter().map(|v| used[v]).collect(),
            representatives: used.keys().map(|&v| pts[v].clone()).collect(),
        }
    }

    /// Per-edge `δ(F(u), F(v))` of one draw, in floating point.
    fn edge_deltas(&self, e: &EmbeddedGraph, seed: u64, index: u64) -> Vec<f64> {
        let chosen = self.rounder.round(seed, index);
        e.base.edges.iter().map(|x| self.dist[chosen[x.u]][chosen[x.v]]).collect()
    }
}

/// One partition drawn with the given seed.
pub fn sample_decomposition(e: &EmbeddedGraph, seed: u64) -> Result<Solution> {
    Ok(Sampler::new(e)?.sample(seed, 0))
}

/// Monte Carlo mean and standard error of one quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_sums(n: usize, sum: f64, sumsq: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
        Self { mean, stderr: (var / nf).sqrt() }
    }
}

/// Aggregate and per-edge statistics of the sampled volume.
#[derive(Clone, Debug)]
pub struct ExpectedCost {
    pub samples: usize,
    pub vol: Estimate,
    pub opt: Q,
    /// Per edge: statistics of `δ(F(u), F(v))` and the bound `‖p^u - p^v‖∞`.
    pub edges: Vec<(Estimate, Q)>,
}

impl ExpectedCost {
    pub fn to_json(&self) -> Value {
        json!({
            "samples": self.samples,
            "mean_vol": self.vol.mean,
            "stderr": self.vol.stderr,
            "opt": fmt_q(&self.opt),
        })
    }
}

const CHUNK: usize = 256;

/// Statistics over `n_samples` draws; sample `i` uses stream `i` of
/// `master_seed`, so results do not depend on the thread count.
pub fn expected_cost(e: &EmbeddedGraph, n_samples: usize, master_seed: u64) -> Result<ExpectedCost> {
    if n_samples < 2 {
        return Err(Error::Precondition("expected_cost needs at least 2 samples".into()));
    }
    let sampler = Sampler::new(e)?;
    expected_cost_with(&sampler, e, n_samples, master_seed)
}

/// [`expected_cost`] reusing a prepared sampler.
pub fn expected_cost_with(
    sampler: &Sampler,
    e: &EmbeddedGraph,
    n_samples: usize,
    master_seed: u64,
) -> Result<ExpectedCost> {
    if n_samples < 2 {
        return Err(Error::Precondition("expected_cost needs at least 2 samples".into()));
    }
    let m = e.base.edges.len();
    let caps: Vec<f64> = e.base.edges.iter().map(|x| to_f64(&x.capacity)).collect();
    let chunks: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; m];
            let mut sumsq = vec![0.0; m];
            let (mut vs, mut vq) = (0.0, 0.0);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let d = sampler.edge_deltas(e, master_seed, i as u64);
                let mut vol = 0.0;
                for j in 0..m {
                    sum[j] += d[j];
                    sumsq[j] += d[j] * d[j];
                    vol += caps[j] * d[j];
                }
                vs += vol;
                vq += vol * vol;
            }
            (sum, sumsq, vs, vq)
        })
        .collect();
    let mut sum = vec![0.0; m];
    let mut sumsq = vec![0.0; m];
    let (mut vs, mut vq) = (0.0, 0.0);
    for (s, sq, a, b) in chunks {
        for j in 0..m {
            sum[j] += s[j];
            sumsq[j] += sq[j];
        }
        vs += a;
        vq += b;
    }
    let dist = e.edge_distances();
    let opt = e.base.edges.iter().zip(&dist).fold(Q::zero(), |acc, (x, d)| acc + &x.capacity * d);
    let edges = e
        .base
        .edges
        .iter()
        .enumerate()
        .map(|(j, x)| {
            (Estimate::from_sums(n_samples, sum[j], sumsq[j]), ts_distance(&e.embedding[x.u], &e.embedding[x.v]))
        })
        .collect();
    Ok(ExpectedCost { samples: n_samples, vol: Estimate::from_sums(n_samples, vs, vq), opt, edges })
}

/// Contracts every cluster to one vertex. Edges inside a cluster vanish,
/// the others keep their capacity and get length `δ` between their clusters.
/// A cluster holding a terminal is named after it; others are `F<i>`.
pub fn contract(g: &TerminalGraph, s: &Solution) -> Result<TerminalGraph> {
    if s.assignment.len() != g.n() || s.assignment.iter().any(|&c| c >= s.cluster_count()) {
        return Err(Error::Structural("partition does not cover every vertex".into()));
    }
    let mut names: Vec<Option<String>> = vec![None; s.cluster_count()];
    for (t, v) in &g.terminals {
        let c = s.assignment[*v];
        if names[c].is_some() {
            return Err(Error::Structural("two terminals share a cluster".into()));
        }
        names[c] = Some(t.clone());
    }
    let mut taken: HashSet<String> = names.iter().flatten().cloned().collect();
    let names: Vec<String> = names
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            n.unwrap_or_else(|| {
                let mut name = format!("F{i}");
                while taken.contains(&name) {
                    name.push('\'');
                }
                taken.insert(name.clone());
                name
            })
        })
        .collect();
    let mut h = TerminalGraph::new();
    for n in &names {
        h.vertex(n);
    }
    for (t, v) in &g.terminals {
        h.add_terminal(t, &names[s.assignment[*v]])?;
    }
    for x in &g.edges {
        let (a, b) = (s.assignment[x.u], s.assignment[x.v]);
        if a != b {
            h.add_edge(a, b, x.capacity.clone(), s.delta(a, b));
        }
    }
    Ok(h)
}

/// Random graph over a terminal metric: the terminals, `extra` vertices
/// placed at random tight-span points, direct terminal edges of length `D`,
/// and `edges` further edges whose lengths are ℓ∞ distances. Terminal
/// distances in the result equal `D`.
pub fn random_instance(m: &TerminalMetric, extra: usize, edges: usize, seed: u64) -> Result<TerminalGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = m.k();
    let diam = m.matrix().iter().flatten().max().cloned().unwrap_or_else(Q::zero);
    let mut pts: Vec<TsPoint> = (0..k).map(|t| m.row(t)).collect();
    for _ in 0..extra {
        let mut x: Vec<Q> = (0..k).map(|_| &diam * qr(rng.gen_range(0..=12), 12)).collect();
        for t in 0..k {
            for s in 0..k {
                let need = m.d(t, s) - &x[s];
                if t != s && need > x[t] {
                    x[t] = need;
                }
            }
            if x[t] < Q::zero() {
                x[t] = Q::zero();
            }
        }
        pts.push(project(m, &x)?);
    }
    let names: Vec<String> =
        (0..pts.len()).map(|i| if i < k { m.name(i).to_string() } else { format!("v{}", i - k) }).collect();
    let mut g = TerminalGraph::new();
    for (i, n) in names.iter().enumerate() {
        g.vertex(n);
        if i < k {
            g.add_terminal(n, n)?;
        }
    }
    let add = |g: &mut TerminalGraph, a: usize, b: usize, rng: &mut ChaCha8Rng| {
        g.add_edge(a, b, q(rng.gen_range(1..=4)), ts_distance(&pts[a], &pts[b]));
    };
    for a in 0..k {
        for b in a + 1..k {
            add(&mut g, a, b, &mut rng);
        }
    }
    for v in k..pts.len() {
        let t = rng.gen_range(0..k);
        add(&mut g, v, t, &mut rng);
    }
    if pts.len() > 1 {
        for _ in 0..edges {
            let a = rng.gen_range(0..pts.len());
            let mut b = rng.gen_range(0..pts.len() - 1);
            if b >= a {
                b += 1;
            }
            add(&mut g, a, b, &mut rng);
        }
    }
    Ok(g)
}
