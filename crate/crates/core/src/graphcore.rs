//! Terminal multigraphs with capacities and lengths, exact shortest paths,
//! distance vectors, and projection of every vertex into the tight span.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use num::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{validate_metric, DistanceVector, TerminalMetric};
use crate::rational::{parse_rational, Q};
use crate::tightspan::{project, TsPoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub capacity: Q,
    pub length: Q,
}

/// Undirected multigraph with named vertices and a named terminal subset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TerminalGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pub edges: Vec<Edge>,
    /// `(terminal name, vertex id)` in declaration order.
    pub terminals: Vec<(String, usize)>,
}

impl TerminalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of the named vertex, creating it if needed.
    pub fn vertex(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize, capacity: Q, length: Q) {
        self.edges.push(Edge { u, v, capacity, length });
    }

    /// Adds an edge between named vertices, creating them if needed.
    pub fn add_named_edge(&mut self, u: &str, v: &str, capacity: Q, length: Q) {
        let (a, b) = (self.vertex(u), self.vertex(v));
        self.add_edge(a, b, capacity, length);
    }

    /// Declares vertex `vertex` (created if needed) as terminal `name`.
    pub fn add_terminal(&mut self, name: &str, vertex: &str) -> Result<()> {
        if self.terminals.iter().any(|(n, _)| n == name) {
            return Err(Error::Input(format!("duplicate terminal {name}")));
        }
        let v = self.vertex(vertex);
        if let Some((other, _)) = self.terminals.iter().find(|(_, w)| *w == v) {
            return Err(Error::Input(format!("terminals {other} and {name} share vertex {vertex}")));
        }
        self.terminals.push((name.to_string(), v));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn terminal_names(&self) -> Vec<String> {
        self.terminals.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn terminal_vertex(&self, name: &str) -> Option<usize> {
        self.terminals.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Index of `v` in the terminal list, if it is a terminal.
    pub fn terminal_index(&self, v: usize) -> Option<usize> {
        self.terminals.iter().position(|&(_, w)| w == v)
    }

    /// Adjacency lists of `(neighbour, edge id)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            if e.u != e.v {
                adj[e.v].push((e.u, i));
            }
        }
        adj
    }

    /// Checks capacities, lengths and terminal connectivity.
    pub fn validate(&self) -> Result<()> {
        for e in &self.edges {
            if !e.capacity.is_positive() {
                return Err(Error::Input(format!(
                    "edge ({},{}) has nonpositive capacity",
                    self.names[e.u], self.names[e.v]
                )));
            }
            if e.length.is_negative() {
                return Err(Error::Input(format!(
                    "edge ({},{}) has negative length",
                    self.names[e.u], self.names[e.v]
                )));
            }
        }
        if let Some((first, v0)) = self.terminals.first() {
            let comp = self.components();
            for (name, v) in &self.terminals[1..] {
                if comp[*v] != comp[*v0] {
                    return Err(Error::Input(format!("terminals {first} and {name} are disconnected")));
                }
            }
        }
        Ok(())
    }

    /// Connected-component label per vertex.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.n()];
        let mut next = 0;
        for s in 0..self.n() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &(w, _) in &adj[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Exact single-source shortest paths; `None` marks unreachable vertices.
pub fn shortest_distances(g: &TerminalGraph, source: usize) -> Result<Vec<Option<Q>>> {
    if g.edges.iter().any(|e| e.length.is_negative()) {
        return Err(Error::Input("negative edge length".into()));
    }
    Ok(dijkstra(g, &g.adjacency(), source))
}

fn dijkstra(g: &TerminalGraph, adj: &[Vec<(usize, usize)>], source: usize) -> Vec<Option<Q>> {
    let mut dist: Vec<Option<Q>> = vec![None; g.n()];
    let mut done = vec![false; g.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(Q::zero());
    heap.push(Reverse((Q::zero(), source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(w, e) in &adj[u] {
            let nd = &d + &g.edges[e].length;
            if dist[w].as_ref().is_none_or(|old| nd < *old) {
                dist[w] = Some(nd.clone());
                heap.push(Reverse((nd, w)));
            }
        }
    }
    dist
}

/// Pairwise terminal shortest-path distances.
pub fn terminal_metric(g: &TerminalGraph) -> Result<TerminalMetric> {
    let rows = terminal_rows(g)?;
    let names = g.terminal_names();
    let k = names.len();
    let mut dist = vec![vec![Q::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            let v = g.terminals[j].1;
            dist[i][j] = rows[i][v]
                .clone()
                .ok_or_else(|| Error::Input(format!("terminals {} and {} are disconnected", names[i], names[j])))?;
        }
    }
    let m = TerminalMetric::new(names, dist)?;
    if let Some(v) = validate_metric(&m).first() {
        return Err(Error::Input(format!("terminal distances are not a metric: {v}")));
    }
    Ok(m)
}

fn terminal_rows(g: &TerminalGraph) -> Result<Vec<Vec<Option<Q>>>> {
    if g.edges.iter().any(|e| e.length.is_negative()) {
        return Err(Error::Input("negative edge length".into()));
    }
    let adj = g.adjacency();
    Ok(g.terminals.par_iter().map(|&(_, s)| dijkstra(g, &adj, s)).collect())
}

/// `x^v = (dist(v, t))_t` for every vertex.
pub fn distance_vectors(g: &TerminalGraph) -> Result<Vec<DistanceVector>> {
    let rows = terminal_rows(g)?;
    (0..g.n())
        .map(|v| {
            rows.iter()
                .enumerate()
                .map(|(t, r)| {
                    r[v].clone().ok_or_else(|| {
                        Error::Input(format!("vertex {} cannot reach terminal {}", g.name(v), g.terminals[t].0))
                    })
                })
                .collect()
        })
        .collect()
}

/// A graph together with its terminal metric, raw distance vectors and
/// their projections into the tight span.
#[derive(Clone, Debug)]
pub struct EmbeddedGraph {
    pub base: TerminalGraph,
    pub metric: TerminalMetric,
    pub vectors: Vec<DistanceVector>,
    pub embedding: Vec<TsPoint>,
}

impl EmbeddedGraph {
    /// Shortest-path distance between the endpoints of every edge.
    pub fn edge_distances(&self) -> Vec<Q> {
        let adj = self.base.adjacency();
        let mut sources: Vec<usize> = self.base.edges.iter().map(|e| e.u).collect();
        sources.sort_unstable();
        sources.dedup();
        let rows: HashMap<usize, Vec<Option<Q>>> =
            sources.par_iter().map(|&s| (s, dijkstra(&self.base, &adj, s))).collect();
        self.base.edges.iter().map(|e| rows[&e.u][e.v].clone().expect("edge endpoints are connected")).collect()
    }
}

/// Projects every vertex's distance vector into TS(D).
pub fn project_graph(g: &TerminalGraph) -> Result<EmbeddedGraph> {
    g.validate()?;
    let metric = terminal_metric(g)?;
    let vectors = distance_vectors(g)?;
    let embedding = vectors.par_iter().map(|x| project(&metric, x)).collect::<Result<Vec<_>>>()?;
    Ok(EmbeddedGraph { base: g.clone(), metric, vectors, embedding })
}

/// Parses `edge <u> <v> <capacity> <length>` and `terminal <name> <vertex>`
/// lines with `#` comments.
pub fn parse_graph(text: &str) -> Result<TerminalGraph> {
    let mut g = TerminalGraph::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        let num =
            |s: &str| parse_rational(s).ok_or_else(|| Error::Parse { line, msg: format!("malformed rational `{s}`") });
        match tok.as_slice() {
            ["edge", u, v, c, l] => {
                let (c, l) = (num(c)?, num(l)?);
                if !c.is_positive() {
                    return Err(Error::Parse { line, msg: "capacity must be positive".into() });
                }
                if l.is_negative() {
                    return Err(Error::Parse { line, msg: "length must be nonnegative".into() });
                }
                g.add_named_edge(u, v, c, l);
            }
            ["terminal", name, v] => g.add_terminal(name, v).map_err(|e| Error::Parse { line, msg: e.to_string() })?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `edge u v cap len` or `terminal name vertex`, got `{body}`"),
                })
            }
        }
    }
    Ok(g)
}

/// Renders the graph in the text format read by [`parse_graph`].
pub fn format_graph(g: &TerminalGraph) -> String {
    let mut s = String::new();
    for (name, v) in &g.terminals {
        s.push_str(&format!("terminal {} {}\n", name, g.names[*v]));
    }
    for e in &g.edges {
        s.push_str(&format!("edge {} {} {} {}\n", g.names[e.u], g.names[e.v], e.capacity, e.length));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{linf, q};
    use crate::tightspan::ts_distance;

    pub(crate) fn star() -> TerminalGraph {
        let mut g = TerminalGraph::new();
        for (t, l) in [("a", 2), ("b", 5), ("c", 3)] {
            g.add_named_edge("o", t, q(1), q(l));
            g.add_terminal(t, t).unwrap();
        }
        g
    }

    #[test]
    fn path_and_parallel_distances() {
        let mut g = TerminalGraph::new();
        g.add_named_edge("a", "u", q(1), q(1));
        g.add_named_edge("u", "b", q(1), q(2));
        g.add_named_edge("a", "b", q(1), q(5));
        g.add_named_edge("a", "b", q(1), q(4));
        let d = shortest_distances(&g, 0).unwrap();
        assert_eq!(d[g.id("b").unwrap()], Some(q(3)));
        let mut h = TerminalGraph::new();
        h.add_named_edge("a", "b", q(1), q(5));
        h.add_named_edge("a", "b", q(1), q(2));
        assert_eq!(shortest_distances(&h, 0).unwrap()[1], Some(q(2)));
    }

    #[test]
    fn triangle_uses_short_side() {
        let mut g = TerminalGraph::new();
        g.add_named_edge("x", "y", q(1), q(1));
        g.add_named_edge("y", "z", q(1), q(1));
        g.add_named_edge("x", "z", q(1), q(3));
        assert_eq!(shortest_distances(&g, 0).unwrap()[2], Some(q(2)));
    }

    #[test]
    fn negative_length_rejected() {
        let mut g = TerminalGraph::new();
        g.add_named_edge("x", "y", q(1), q(-1));
        assert!(matches!(shortest_distances(&g, 0), Err(Error::Input(_))));
    }

    #[test]
    fn star_metric_and_center() {
        let g = star();
        let m = terminal_metric(&g).unwrap();
        assert_eq!(*m.by_name("a", "b"), q(7));
        assert_eq!(*m.by_name("a", "c"), q(5));
        assert_eq!(*m.by_name("b", "c"), q(8));
        let e = project_graph(&g).unwrap();
        let o = g.id("o").unwrap();
        assert_eq!(e.vectors[o], vec![q(2), q(5), q(3)]);
        assert_eq!(e.embedding[o], vec![q(2), q(5), q(3)]);
        for (t, v) in &g.terminals {
            let i = m.index(t).unwrap();
            assert_eq!(e.embedding[*v], m.row(i));
        }
    }

    #[test]
    fn subdivision_keeps_metric() {
        let g = star();
        let mut h = TerminalGraph::new();
        h.add_named_edge("o", "m", q(1), q(1));
        h.add_named_edge("m", "a", q(1), q(1));
        h.add_named_edge("o", "b", q(1), q(5));
        h.add_named_edge("o", "c", q(1), q(3));
        for t in ["a", "b", "c"] {
            h.add_terminal(t, t).unwrap();
        }
        assert_eq!(terminal_metric(&g).unwrap(), terminal_metric(&h).unwrap());
        let e = project_graph(&h).unwrap();
        let d = e.edge_distances();
        for (i, ed) in h.edges.iter().enumerate() {
            let p = ts_distance(&e.embedding[ed.u], &e.embedding[ed.v]);
            let x = linf(&e.vectors[ed.u], &e.vectors[ed.v]);
            assert!(p <= x && x <= d[i] && d[i] <= ed.length);
        }
    }

    #[test]
    fn disconnected_terminals_rejected() {
        let mut g = TerminalGraph::new();
        g.add_named_edge("a", "x", q(1), q(1));
        g.vertex("b");
        g.add_terminal("a", "a").unwrap();
        g.add_terminal("b", "b").unwrap();
        assert!(matches!(terminal_metric(&g), Err(Error::Input(_))));
        assert!(matches!(g.validate(), Err(Error::Input(_))));
    }

    #[test]
    fn text_round_trip() {
        let g = star();
        let h = parse_graph(&format_graph(&g)).unwrap();
        assert_eq!(terminal_metric(&g).unwrap(), terminal_metric(&h).unwrap());
        let e = parse_graph("edge a b 1 2\nedge a c one 2\n").unwrap_err();
        assert_eq!(e, Error::Parse { line: 2, msg: "malformed rational `one`".into() });
    }
}
