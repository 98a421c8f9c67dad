//! Random instances shared by the integration tests.
#![allow(dead_code)]

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsflow::decompose5::{Param, TemplateKind, TsTemplate};
use tsflow::flowlp::Demand;
use tsflow::graphcore::TerminalGraph;
use tsflow::metric::TerminalMetric;
use tsflow::rational::{q, qr};
use tsflow::Q;

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rational(rng: &mut ChaCha8Rng, max_num: i64, den: i64) -> Q {
    qr(rng.gen_range(1..=max_num), den)
}

/// Shortest-path closure of random positive weights on `k` points.
pub fn random_metric(rng: &mut ChaCha8Rng, k: usize) -> TerminalMetric {
    let mut d = vec![vec![Q::zero(); k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let den = rng.gen_range(1..=6);
            let w = rational(rng, 40, den);
            d[i][j] = w.clone();
            d[j][i] = w;
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                let via = &d[i][m] + &d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    TerminalMetric::new(NAMES[..k].iter().map(|s| s.to_string()).collect(), d).unwrap()
}

/// Random nonnegative vector raised uniformly until it is valid.
pub fn random_valid_vector(rng: &mut ChaCha8Rng, m: &TerminalMetric) -> Vec<Q> {
    let k = m.k();
    let diam = m.matrix().iter().flatten().max().cloned().unwrap();
    let mut x: Vec<Q> = (0..k).map(|_| &diam * qr(rng.gen_range(0..=24), 16)).collect();
    let mut deficit = Q::zero();
    for i in 0..k {
        for j in 0..k {
            let gap = m.d(i, j) - &x[i] - &x[j];
            if gap > deficit {
                deficit = gap;
            }
        }
    }
    if deficit.is_positive() {
        let bump = deficit / q(2) + qr(rng.gen_range(0..3), 4);
        for c in x.iter_mut() {
            *c += &bump;
        }
    }
    x
}

/// Connected random graph: a random spanning tree plus extra edges.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize, terminals: usize) -> TerminalGraph {
    let mut g = TerminalGraph::new();
    let names: Vec<String> =
        (0..n).map(|i| if i < terminals { NAMES[i].to_string() } else { format!("v{i}") }).collect();
    for name in &names {
        g.vertex(name);
    }
    for i in 1..n {
        let j = rng.gen_range(0..i);
        g.add_edge(i, j, q(rng.gen_range(1..=5)), q(1));
    }
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            g.add_edge(a, b, q(rng.gen_range(1..=5)), q(1));
        }
    }
    for name in names.iter().take(terminals) {
        g.add_terminal(name, name).unwrap();
    }
    g
}

pub fn random_pair_demand(rng: &mut ChaCha8Rng, names: &[String]) -> Demand {
    let mut d = Demand::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if rng.gen_bool(0.7) {
                d.set(&names[i], &names[j], q(rng.gen_range(1..=4))).unwrap();
            }
        }
    }
    if d.is_empty() {
        d.set(&names[0], &names[1], q(1)).unwrap();
    }
    d
}

fn pendants(p: [Q; 5]) -> Vec<(Param, Q)> {
    p.into_iter().enumerate().map(|(i, w)| (Param::Pendant(i), w)).collect()
}

/// Five splits around a cycle with a shared centre vertex.
pub fn type1(p: [Q; 5], s: [Q; 5]) -> TsTemplate {
    let mut params = pendants(p);
    let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
    params.extend(pairs.iter().zip(s).map(|(&(a, b), w)| (Param::Pair(a, b), w)));
    TsTemplate::new(TemplateKind::Type1, &NAMES[..5], params)
}

/// Splits on the cycle `a-b-d-e-a` and a bipartite part with side `{b, e}`.
pub fn type2(p: [Q; 5], s: [Q; 4], beta: Q) -> TsTemplate {
    let mut params = pendants(p);
    let pairs = [(0, 1), (1, 3), (3, 4), (0, 4)];
    params.extend(pairs.iter().zip(s).map(|(&(a, b), w)| (Param::Pair(a, b), w)));
    params.push((Param::Bipartite(1, 4), beta));
    TsTemplate::new(TemplateKind::Type2, &NAMES[..5], params)
}

/// Splits on the path `e-a-c-b-d` and a bipartite part with side `{a, b}`.
pub fn type3(p: [Q; 5], s: [Q; 4], beta: Q) -> TsTemplate {
    let mut params = pendants(p);
    let pairs = [(0, 4), (0, 2), (1, 2), (1, 3)];
    params.extend(pairs.iter().zip(s).map(|(&(a, b), w)| (Param::Pair(a, b), w)));
    params.push((Param::Bipartite(0, 1), beta));
    TsTemplate::new(TemplateKind::Type3, &NAMES[..5], params)
}

/// Template of the given kind with random positive parameters.
pub fn random_template(rng: &mut ChaCha8Rng, kind: TemplateKind) -> TsTemplate {
    let mut r = || {
        let den = rng.gen_range(1..=4);
        rational(rng, 12, den)
    };
    let p: [Q; 5] = std::array::from_fn(|_| r());
    match kind {
        TemplateKind::Type1 => type1(p, std::array::from_fn(|_| r())),
        TemplateKind::Type2 => type2(p, std::array::from_fn(|_| r()), r()),
        TemplateKind::Type3 => type3(p, std::array::from_fn(|_| r()), r()),
        TemplateKind::Degenerate => unreachable!("no random degenerate templates"),
    }
}
