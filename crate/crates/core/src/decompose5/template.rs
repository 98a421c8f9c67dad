//! Classification of five-point tight spans and their parameters.
//!
//! A generic five-point metric is a nonnegative combination of split metrics,
//! optionally plus one multiple of a complete-bipartite `K_{2,3}` metric. The
//! split weights are isolation indices computed from the terminal vertices of
//! the complex, and the shape of the complex selects the type:
//!
//! * Type 1: five rectangles around one vertex, five two-element splits
//!   arranged in a cycle, no bipartite part.
//! * Type 2: a triangle, two rectangles and two pentagons; the four positive
//!   two-element splits form a 4-cycle.
//! * Type 3: two rectangles, two trapezoids and a pentagon; the four positive
//!   two-element splits form a path.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::metric::TerminalMetric;
use crate::rational::{q, Q};
use crate::tightspan::{CellComplex, TsPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateKind {
    Type1,
    Type2,
    Type3,
    Degenerate,
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemplateKind::Type1 => "Type1",
            TemplateKind::Type2 => "Type2",
            TemplateKind::Type3 => "Type3",
            TemplateKind::Degenerate => "Degenerate",
        };
        f.write_str(s)
    }
}

/// A named template parameter, with terminals given by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    /// Weight of the split isolating one terminal (its pendant length).
    Pendant(usize),
    /// Weight of the split `{a, b} | rest`.
    Pair(usize, usize),
    /// Weight of the bipartite part whose two-element side is `{a, b}`.
    Bipartite(usize, usize),
}

impl Param {
    pub fn name(&self, names: &[String]) -> String {
        let join = |ids: &[usize]| {
            let parts: Vec<&str> = ids.iter().map(|&i| names[i].as_str()).collect();
            if parts.iter().all(|p| p.chars().count() == 1) {
                parts.concat()
            } else {
                parts.join(",")
            }
        };
        match *self {
            Param::Pendant(a) => format!("l_{}", join(&[a])),
            Param::Pair(a, b) => format!("l_{}", join(&[a, b])),
            Param::Bipartite(a, b) => format!("k_{}", join(&[a, b])),
        }
    }
}

/// Parameters of a classified tight span.
#[derive(Clone, Debug)]
pub struct TsTemplate {
    pub kind: TemplateKind,
    pub terminals: Vec<String>,
    /// Sorted by parameter; zero-weight parameters are omitted.
    pub params: BTreeMap<Param, Q>,
    /// Raw complex, kept for degenerate spans.
    pub complex: Option<CellComplex>,
}

impl PartialEq for TsTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.terminals == other.terminals && self.params == other.params
    }
}

impl TsTemplate {
    /// Template with explicit parameters (used to derive test metrics).
    pub fn new(kind: TemplateKind, terminals: &[&str], params: Vec<(Param, Q)>) -> Self {
        Self {
            kind,
            terminals: terminals.iter().map(|s| s.to_string()).collect(),
            params: params.into_iter().filter(|(_, v)| !v.is_zero()).map(|(p, v)| (normalize(p), v)).collect(),
            complex: None,
        }
    }

    pub fn named_params(&self) -> Vec<(String, Q)> {
        self.params.iter().map(|(p, v)| (p.name(&self.terminals), v.clone())).collect()
    }
}

fn normalize(p: Param) -> Param {
    match p {
        Param::Pair(a, b) => Param::Pair(a.min(b), a.max(b)),
        Param::Bipartite(a, b) => Param::Bipartite(a.min(b), a.max(b)),
        p => p,
    }
}

/// Isolation index of the split `side | rest`.
pub fn isolation_index(m: &TerminalMetric, side: &[usize]) -> Q {
    let other: Vec<usize> = (0..m.k()).filter(|i| !side.contains(i)).collect();
    let mut best: Option<Q> = None;
    for &a in side {
        for &a2 in side {
            for &b in &other {
                for &b2 in &other {
                    let s1 = m.d(a, b) + m.d(a2, b2);
                    let s2 = m.d(a, b2) + m.d(a2, b);
                    let s3 = m.d(a, a2) + m.d(b, b2);
                    let v = s1.max(s2).max(s3) - m.d(a, a2) - m.d(b, b2);
                    if best.as_ref().is_none_or(|x| v < *x) {
                        best = Some(v);
                    }
                }
            }
        }
    }
    best.unwrap_or_else(Q::zero) / q(2)
}

/// Distance between terminals `i` and `j` implied by the parameters.
fn template_distance(params: &BTreeMap<Param, Q>, i: usize, j: usize) -> Q {
    if i == j {
        return Q::zero();
    }
    let mut d = Q::zero();
    for (p, w) in params {
        let add = match *p {
            Param::Pendant(a) => a == i || a == j,
            Param::Pair(a, b) => {
                let (si, sj) = (i == a || i == b, j == a || j == b);
                si != sj
            }
            Param::Bipartite(a, b) => {
                let (si, sj) = (i == a || i == b, j == a || j == b);
                d += if si == sj { w.clone() } else { w / q(2) };
                false
            }
        };
        if add {
            d += w;
        }
    }
    d
}

/// Terminal metric reconstructed from a template.
pub fn metric_from_template(t: &TsTemplate) -> Result<TerminalMetric> {
    if t.kind == TemplateKind::Degenerate {
        if let Some(c) = &t.complex {
            return Ok(c.metric.clone());
        }
    }
    let k = t.terminals.len();
    let dist = (0..k).map(|i| (0..k).map(|j| template_distance(&t.params, i, j)).collect()).collect();
    TerminalMetric::new(t.terminals.clone(), dist)
}

/// Split weights and the bipartite remainder of a five-point metric.
fn split_decomposition(m: &TerminalMetric) -> (BTreeMap<Param, Q>, Option<(Param, Q)>) {
    let k = m.k();
    let mut params = BTreeMap::new();
    for a in 0..k {
        let w = isolation_index(m, &[a]);
        if w.is_positive() {
            params.insert(Param::Pendant(a), w);
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            let w = isolation_index(m, &[a, b]);
            if w.is_positive() {
                params.insert(Param::Pair(a, b), w);
            }
        }
    }
    let mut residue = vec![vec![Q::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            residue[i][j] = m.d(i, j) - template_distance(&params, i, j);
        }
    }
    if residue.iter().flatten().all(|v| v.is_zero()) {
        return (params, None);
    }
    for a in 0..k {
        for b in a + 1..k {
            let beta = residue[a][b].clone();
            if !beta.is_positive() {
                continue;
            }
            let mut trial = BTreeMap::new();
            trial.insert(Param::Bipartite(a, b), beta.clone());
            let ok = (0..k).all(|i| (0..k).all(|j| residue[i][j] == template_distance(&trial, i, j)));
            if ok {
                return (params, Some((Param::Bipartite(a, b), beta)));
            }
        }
    }
    (params, Some((Param::Bipartite(usize::MAX, usize::MAX), Q::zero())))
}

/// Degree sequence test: the pair splits form one cycle through all of
/// `len` distinct terminals (`cycle`), or a simple path (`!cycle`).
fn pair_shape(pairs: &[(usize, usize)], cycle: bool) -> bool {
    let mut deg: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in pairs {
        *deg.entry(a).or_default() += 1;
        *deg.entry(b).or_default() += 1;
    }
    let n = deg.len();
    let connected = {
        let nodes: Vec<usize> = deg.keys().copied().collect();
        let mut seen = vec![nodes[0]];
        let mut changed = true;
        while changed {
            changed = false;
            for &(a, b) in pairs {
                let (ha, hb) = (seen.contains(&a), seen.contains(&b));
                if ha != hb {
                    seen.push(if ha { b } else { a });
                    changed = true;
                }
            }
        }
        seen.len() == n
    };
    if !connected {
        return false;
    }
    if cycle {
        n == pairs.len() && deg.values().all(|&d| d == 2)
    } else {
        n == pairs.len() + 1 && deg.values().all(|&d| d <= 2)
    }
}

/// Sorted vertex counts of the maximal 2-cells.
fn two_cell_sizes(c: &CellComplex) -> Vec<usize> {
    let mut s: Vec<usize> = c.cells.iter().filter(|x| x.dimension == 2).map(|x| x.vertex_ids.len()).collect();
    s.sort_unstable();
    s
}

/// Classifies a complex with at most five terminals.
pub fn classify(c: &CellComplex) -> Result<TsTemplate> {
    let m = &c.metric;
    let k = m.k();
    if k > 5 {
        return Err(Error::Unsupported(format!("classification supports at most 5 terminals, got {k}")));
    }
    let degenerate = || TsTemplate {
        kind: TemplateKind::Degenerate,
        terminals: m.names().to_vec(),
        params: BTreeMap::new(),
        complex: Some(c.clone()),
    };
    if k < 5 {
        return Ok(degenerate());
    }
    let (mut params, bip) = split_decomposition(m);
    let pendants = (0..k).filter(|&a| params.contains_key(&Param::Pendant(a))).count();
    let pairs: Vec<(usize, usize)> = params
        .keys()
        .filter_map(|p| match *p {
            Param::Pair(a, b) => Some((a, b)),
            _ => None,
        })
        .collect();
    let sizes = two_cell_sizes(c);
    let kind = match (&bip, sizes.as_slice()) {
        (None, [4, 4, 4, 4, 4])
            if pendants == 5 && pairs.len() == 5 && pair_shape(&pairs, true) && shares_vertex(c) =>
        {
            TemplateKind::Type1
        }
        (Some((Param::Bipartite(a, _), b)), [3, 4, 4, 5, 5])
            if *a != usize::MAX && b.is_positive() && pendants == 5 && pairs.len() == 4 && pair_shape(&pairs, true) =>
        {
            TemplateKind::Type2
        }
        (Some((Param::Bipartite(a, _), b)), [4, 4, 4, 4, 5])
            if *a != usize::MAX
                && b.is_positive()
                && pendants == 5
                && pairs.len() == 4
                && pair_shape(&pairs, false) =>
        {
            TemplateKind::Type3
        }
        _ => return Ok(degenerate()),
    };
    if let Some((p, w)) = bip {
        params.insert(p, w);
    }
    Ok(TsTemplate { kind, terminals: m.names().to_vec(), params, complex: None })
}

fn shares_vertex(c: &CellComplex) -> bool {
    let two: Vec<&Vec<usize>> = c.cells.iter().filter(|x| x.dimension == 2).map(|x| &x.vertex_ids).collect();
    two.first().is_some_and(|first| first.iter().any(|v| two.iter().all(|s| s.contains(v))))
}

/// Coordinates of terminal points in a template's metric (its rows).
pub fn terminal_points(t: &TsTemplate) -> Result<Vec<TsPoint>> {
    let m = metric_from_template(t)?;
    Ok((0..m.k()).map(|i| m.row(i)).collect())
}
