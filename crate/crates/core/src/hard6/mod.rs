//! The six-terminal hard instance: its metric, associated-vector coordinates,
//! the path-union graph at resolution `L`, and the loss diagnostics.
//!
//! Instance points are keyed by integers `(X, Y, Z)` standing for the
//! associated vector `(X/L, Y/L, Z/L)`.

mod ave;
mod diagnostics;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use num::{Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flowlp::Demand;
use crate::graphcore::TerminalGraph;
use crate::metric::{collinear_triples, is_valid_vector, TerminalMetric};
use crate::rational::{fmt_q, q, qr, Q};
use crate::tightspan::{in_tight_span, project, ts_distance, TsPoint};

pub use ave::{adjust_solution, check_good, terminal_deltas, Adjusted, GoodReport};
pub use diagnostics::{
    directional_losses, losses, planar_losses, Check, DirectionalLosses, LossReport, PlanarLosses, PlanarRow,
};

pub const TERMINALS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const D: usize = 3;
const E: usize = 4;
const F: usize = 5;

/// Integer key `(X, Y, Z)` of the point `(X/L, Y/L, Z/L)`.
pub type Key = [i64; 3];

/// The four step directions in key units.
pub const STEPS: [Key; 4] = [[0, 0, 1], [0, 2, -1], [1, 0, 0], [-1, 2, 0]];

pub fn add_key(a: Key, b: Key) -> Key {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// The fixed six-terminal metric.
pub fn metric6() -> TerminalMetric {
    let table = [
        ("a", "b", 2),
        ("a", "c", 1),
        ("a", "d", 3),
        ("a", "e", 1),
        ("a", "f", 2),
        ("b", "c", 1),
        ("b", "d", 3),
        ("b", "e", 3),
        ("b", "f", 2),
        ("c", "d", 2),
        ("c", "e", 2),
        ("c", "f", 3),
        ("d", "e", 2),
        ("d", "f", 1),
        ("e", "f", 1),
    ];
    let pairs: Vec<(&str, &str, Q)> = table.iter().map(|&(s, t, v)| (s, t, q(v))).collect();
    TerminalMetric::from_pairs(&TERMINALS, &pairs).expect("fixed table is a metric")
}

/// Coordinates of a tight-span point in the frame with origin `c` and axes
/// towards `h`, `g` and `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AssocVec {
    pub x: Q,
    pub y: Q,
    pub z: Q,
}

impl AssocVec {
    pub fn new(x: Q, y: Q, z: Q) -> Self {
        Self { x, y, z }
    }

    pub fn ints(x: i64, y: i64, z: i64) -> Self {
        Self::new(q(x), q(y), q(z))
    }

    pub fn from_key(k: Key, l: i64) -> Self {
        Self::new(qr(k[0], l), qr(k[1], l), qr(k[2], l))
    }

    /// Inside the prism (`z > 0`) or the rectangle `bcdf` (`z = 0`).
    pub fn is_admissible(&self) -> bool {
        let (x, y, z) = (&self.x, &self.y, &self.z);
        if z.is_negative() {
            return false;
        }
        if z.is_positive() {
            !x.is_negative() && *x <= q(1) && !y.is_negative() && y + z * q(2) <= q(2)
        } else {
            let s = x * q(2) + y;
            !s.is_negative() && s <= q(4) && !y.is_negative() && *y <= q(2)
        }
    }

    pub fn to_json(&self) -> Value {
        json!([fmt_q(&self.x), fmt_q(&self.y), fmt_q(&self.z)])
    }
}

impl fmt::Display for AssocVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Distance vector of an associated vector, by the six terminal formulas.
fn formulas(a: &AssocVec) -> TsPoint {
    let (x, y, z) = (&a.x, &a.y, &a.z);
    vec![x.abs() + q(1) - z, x + q(1) + z, x + y + z, q(2) - x + z, (x - q(1)).abs() + q(1) - z, q(3) - x - y - z]
}

pub fn from_assoc(a: &AssocVec) -> Result<TsPoint> {
    if !a.is_admissible() {
        return Err(Error::Precondition(format!("associated vector {a} outside the tight span")));
    }
    Ok(formulas(a))
}

pub fn to_assoc(p: &[Q]) -> Result<AssocVec> {
    let m = metric6();
    if p.len() != 6 || !in_tight_span(&m, p) {
        return Err(Error::Precondition("point is not in the tight span of the six-terminal metric".into()));
    }
    let z = (&p[B] + &p[D] - q(3)) / q(2);
    let x = &p[B] - q(1) - &z;
    let y = &p[C] - &x - &z;
    let a = AssocVec::new(x, y, z);
    if !a.is_admissible() || formulas(&a) != p {
        return Err(Error::Structural(format!("associated vector {a} does not reproduce the point")));
    }
    Ok(a)
}

/// Lower bound `|x - x'| + |z - z'|` on the tight-span distance.
pub fn assoc_distance_lower(a: &AssocVec, b: &AssocVec) -> Q {
    (&a.x - &b.x).abs() + (&a.z - &b.z).abs()
}

/// Exact distance between two points of the rectangle `bcdf`.
pub fn rect_distance(a: &AssocVec, b: &AssocVec) -> Result<Q> {
    if !a.z.is_zero() || !b.z.is_zero() {
        return Err(Error::Precondition("rectangle distance needs z = 0 on both points".into()));
    }
    let s = (&a.x * q(2) + &a.y - &b.x * q(2) - &b.y).abs();
    Ok((s + (&a.y - &b.y).abs()) / q(2))
}

/// Pushes a point down onto the rectangle: `(x, y, z) -> (x, y + z, 0)`.
pub fn rect_project(p: &[Q]) -> Result<TsPoint> {
    let a = to_assoc(p)?;
    from_assoc(&AssocVec::new(a.x, &a.y + &a.z, Q::zero()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Ad1,
    Be1,
    Ad2,
    Be2,
    Ad3,
    Be3,
    Cf3,
    Ab,
    De,
    Ad4,
    Be4,
    Cf4,
    Triple,
}

impl Group {
    pub const TABLE: [Group; 12] = [
        Group::Ad1,
        Group::Be1,
        Group::Ad2,
        Group::Be2,
        Group::Ad3,
        Group::Be3,
        Group::Cf3,
        Group::Ab,
        Group::De,
        Group::Ad4,
        Group::Be4,
        Group::Cf4,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Group::Ad1 => "ad1",
            Group::Be1 => "be1",
            Group::Ad2 => "ad2",
            Group::Be2 => "be2",
            Group::Ad3 => "ad3",
            Group::Be3 => "be3",
            Group::Cf3 => "cf3",
            Group::Ab => "ab",
            Group::De => "de",
            Group::Ad4 => "ad4",
            Group::Be4 => "be4",
            Group::Cf4 => "cf4",
            Group::Triple => "triple",
        }
    }

    /// `(source, sink, capacity, direction)` of a table group.
    fn shape(&self) -> (usize, usize, i64, Option<u8>) {
        match self {
            Group::Ad1 => (D, A, 2, Some(1)),
            Group::Be1 => (B, E, 2, Some(1)),
            Group::Ad2 => (A, D, 2, Some(2)),
            Group::Be2 => (E, B, 2, Some(2)),
            Group::Ad3 => (A, D, 1, Some(3)),
            Group::Be3 => (B, E, 1, Some(3)),
            Group::Cf3 => (C, F, 2, Some(3)),
            Group::Ab => (A, B, 1, None),
            Group::De => (E, D, 1, None),
            Group::Ad4 => (D, A, 1, Some(4)),
            Group::Be4 => (E, B, 1, Some(4)),
            Group::Cf4 => (C, F, 1, Some(4)),
            Group::Triple => unreachable!("triple paths are not table rows"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PathRecord {
    pub group: Group,
    /// Row of the direction-4 table (1..=3), 0 elsewhere.
    pub row: u8,
    pub i: i64,
    pub j: i64,
    pub source: usize,
    pub sink: usize,
    /// Vice-source through vice-sink.
    pub main: Vec<Key>,
    /// Graph vertices from source to sink, repeated vertices collapsed.
    pub vertices: Vec<usize>,
    pub capacity: Q,
    pub direction: Option<u8>,
    /// This path's edges in the graph.
    pub edges: Range<usize>,
}

impl PathRecord {
    pub fn name(&self) -> String {
        match self.row {
            0 => format!("{}[{},{}]", self.group.tag(), self.i, self.j),
            r => format!("{}.{}[{},{}]", self.group.tag(), r, self.i, self.j),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AveData {
    pub triple_paths: Vec<PathRecord>,
    pub demand: Demand,
    pub gamma: Q,
}

#[derive(Clone, Debug)]
pub struct HardInstance {
    pub l: i64,
    pub metric: TerminalMetric,
    pub graph: TerminalGraph,
    /// Key of every graph vertex.
    pub keys: Vec<Key>,
    /// Identity embedding of every graph vertex.
    pub points: Vec<TsPoint>,
    index: HashMap<Key, usize>,
    pub paths: Vec<PathRecord>,
    pub ave: Option<AveData>,
}

/// Table rows before they are laid into the graph.
struct RowSpec {
    group: Group,
    row: u8,
    i: i64,
    j: i64,
    main: Vec<Key>,
}

fn table_rows(l: i64) -> Vec<RowSpec> {
    let mut out = Vec::new();
    let mut push = |groups: &[Group], row: u8, i: i64, j: i64, main: Vec<Key>| {
        for &group in groups {
            out.push(RowSpec { group, row, i, j, main: main.clone() });
        }
    };
    for i in 0..=l {
        for j in 0..=l {
            push(&[Group::Ad1, Group::Be1], 0, i, j, (0..=l - j).map(|s| [i, 2 * j, s]).collect());
        }
    }
    for i in 0..=l {
        for j in 0..=l {
            push(&[Group::Ad2, Group::Be2], 0, i, j, (0..=j).map(|s| [i, 2 * s, j - s]).collect());
        }
    }
    for i in 0..=l {
        for j in 0..=l - i {
            push(&[Group::Ad3, Group::Be3, Group::Cf3], 0, i, j, (0..=l).map(|s| [s, 2 * i, j]).collect());
            push(&[Group::Ab], 0, i, j, vec![[0, 2 * i, j]]);
            push(&[Group::De], 0, i, j, vec![[l, 2 * i, j]]);
        }
    }
    let dir4 = [Group::Ad4, Group::Be4, Group::Cf4];
    let line = |i: i64, j: i64, s: Range<i64>| -> Vec<Key> { s.map(|s| [i - s, 2 * s, j]).collect() };
    for i in 0..=2 * l {
        for j in 0..=l {
            if i + j <= l {
                push(&dir4, 1, i, j, line(i, j, 0..i + 1));
            }
            if i <= l && i + j >= l {
                push(&dir4, 2, i, j, line(i, j, 0..l - j + 1));
            }
            if i >= l && i + j <= 2 * l {
                push(&dir4, 3, i, j, line(i, j, i - l..l - j + 1));
            }
        }
    }
    out
}

pub fn terminal_key(t: usize, l: i64) -> Key {
    [[0, 0, l], [-l, 2 * l, 0], [0, 0, 0], [2 * l, 0, 0], [l, 0, l], [l, 2 * l, 0]][t]
}

/// Builds the instance at resolution `l`; `ave` adds the weighted terminal
/// triple paths and the demand with `gamma · L²` on `(a, e)`.
pub fn generate(l: i64, ave: bool, gamma: &Q) -> Result<HardInstance> {
    if l < 2 {
        return Err(Error::Input(format!("resolution L must be at least 2, got {l}")));
    }
    if gamma.is_negative() {
        return Err(Error::Input("gamma must be nonnegative".into()));
    }
    let metric = metric6();
    let mut inst = HardInstance {
        l,
        metric,
        graph: TerminalGraph::new(),
        keys: Vec::new(),
        points: Vec::new(),
        index: HashMap::new(),
        paths: Vec::new(),
        ave: None,
    };
    for (t, name) in TERMINALS.iter().enumerate() {
        inst.graph.add_terminal(name, name)?;
        inst.register(terminal_key(t, l), name)?;
    }
    for r in table_rows(l) {
        let (source, sink, cap, direction) = r.group.shape();
        let mut vertices = vec![source];
        for &k in &r.main {
            vertices.push(inst.vertex_for(k)?);
        }
        vertices.push(sink);
        vertices.dedup();
        let edges = inst.lay_path(&vertices, &q(cap));
        inst.paths.push(PathRecord {
            group: r.group,
            row: r.row,
            i: r.i,
            j: r.j,
            source,
            sink,
            main: r.main,
            vertices,
            capacity: q(cap),
            direction,
            edges,
        });
    }
    if ave {
        let weight = q(l * l);
        let mut triple_paths = Vec::new();
        for (t, s, u) in collinear_triples(&inst.metric) {
            let vertices = vec![t, s, u];
            let edges = inst.lay_path(&vertices, &weight);
            triple_paths.push(PathRecord {
                group: Group::Triple,
                row: 0,
                i: s as i64,
                j: 0,
                source: t,
                sink: u,
                main: vec![terminal_key(s, l)],
                vertices,
                capacity: weight.clone(),
                direction: None,
                edges,
            });
        }
        let mut totals: BTreeMap<(usize, usize), Q> = BTreeMap::new();
        for p in inst.paths.iter().chain(&triple_paths) {
            let key = (p.source.min(p.sink), p.source.max(p.sink));
            *totals.entry(key).or_insert_with(Q::zero) += &p.capacity;
        }
        *totals.entry((A, E)).or_insert_with(Q::zero) += gamma * &weight;
        let mut demand = Demand::new();
        for ((s, t), v) in totals {
            demand.set(TERMINALS[s], TERMINALS[t], v)?;
        }
        inst.ave = Some(AveData { triple_paths, demand, gamma: gamma.clone() });
    }
    Ok(inst)
}

impl HardInstance {
    fn register(&mut self, k: Key, name: &str) -> Result<usize> {
        let v = self.graph.vertex(name);
        debug_assert_eq!(v, self.keys.len());
        self.keys.push(k);
        self.points.push(from_assoc(&AssocVec::from_key(k, self.l))?);
        self.index.insert(k, v);
        Ok(v)
    }

    fn vertex_for(&mut self, k: Key) -> Result<usize> {
        match self.index.get(&k) {
            Some(&v) => Ok(v),
            None => self.register(k, &format!("v{}_{}_{}", k[0], k[1], k[2])),
        }
    }

    fn lay_path(&mut self, vertices: &[usize], cap: &Q) -> Range<usize> {
        let start = self.graph.edges.len();
        for w in vertices.windows(2) {
            let len = ts_distance(&self.points[w[0]], &self.points[w[1]]);
            self.graph.add_edge(w[0], w[1], cap.clone(), len);
        }
        start..self.graph.edges.len()
    }

    pub fn vertex_of(&self, k: &Key) -> Option<usize> {
        self.index.get(k).copied()
    }

    pub fn assoc(&self, v: usize) -> AssocVec {
        AssocVec::from_key(self.keys[v], self.l)
    }

    pub fn terminal_vertex(&self, t: usize) -> usize {
        self.graph.terminals[t].1
    }

    /// Table paths followed by the triple paths of the average version.
    pub fn all_paths(&self) -> impl Iterator<Item = &PathRecord> {
        self.paths.iter().chain(self.ave.iter().flat_map(|a| a.triple_paths.iter()))
    }

    /// `Σ capacity · D(source, sink)` over all paths.
    pub fn opt(&self) -> Q {
        self.all_paths().map(|p| &p.capacity * self.metric.d(p.source, p.sink)).sum()
    }

    /// `Σ capacity · D(source, sink)` over the table paths alone.
    pub fn table_opt(&self) -> Q {
        self.paths.iter().map(|p| &p.capacity * self.metric.d(p.source, p.sink)).sum()
    }

    /// Embedded length of one path under the identity embedding.
    pub fn path_length(&self, p: &PathRecord) -> Q {
        self.graph.edges[p.edges.clone()].iter().map(|e| e.length.clone()).sum()
    }

    pub fn group_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for p in self.all_paths() {
            *out.entry(p.group.tag()).or_insert(0) += 1;
        }
        out
    }

    /// Path index and demand in JSON form.
    pub fn to_json(&self) -> Value {
        let paths: Vec<Value> = self
            .all_paths()
            .map(|p| {
                json!({
                    "name": p.name(),
                    "source": TERMINALS[p.source],
                    "sink": TERMINALS[p.sink],
                    "capacity": fmt_q(&p.capacity),
                    "direction": p.direction,
                    "vertices": p.vertices.iter().map(|&v| self.graph.name(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "L": self.l,
            "vertices": self.graph.n(),
            "edges": self.graph.edges.len(),
            "opt": fmt_q(&self.opt()),
            "gamma": self.ave.as_ref().map(|a| fmt_q(&a.gamma)),
            "demand": self.ave.as_ref().map(|a| a.demand.to_json()),
            "paths": paths,
        })
    }
}

/// An image point for every instance vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSolution {
    pub points: Vec<TsPoint>,
}

impl CandidateSolution {
    pub fn identity(inst: &HardInstance) -> Self {
        Self { points: inst.points.clone() }
    }

    /// Number of distinct image points.
    pub fn image_size(&self) -> usize {
        let mut pts: Vec<&TsPoint> = self.points.iter().collect();
        pts.sort();
        pts.dedup();
        pts.len()
    }

    /// Every image in the tight span and every terminal fixed.
    pub fn validate(&self, inst: &HardInstance) -> Result<()> {
        if self.points.len() != inst.graph.n() {
            return Err(Error::Structural(format!(
                "solution covers {} of {} vertices",
                self.points.len(),
                inst.graph.n()
            )));
        }
        for (v, p) in self.points.iter().enumerate() {
            if !in_tight_span(&inst.metric, p) {
                return Err(Error::Precondition(format!("image of {} is outside the tight span", inst.graph.name(v))));
            }
        }
        for t in 0..6 {
            let v = inst.terminal_vertex(t);
            if self.points[v] != inst.points[v] {
                return Err(Error::Precondition(format!("terminal {} is not fixed", TERMINALS[t])));
            }
        }
        Ok(())
    }
}

fn round_to(x: &Q, g: i64) -> Q {
    (x * q(g) + qr(1, 2)).floor() / q(g)
}

/// Rounds every non-terminal to the grid of step `1/g` (step `2/g` in `y`)
/// and projects back into the tight span. The identity for `g ≥ L`.
pub fn grid_snap(inst: &HardInstance, g: i64) -> Result<CandidateSolution> {
    if g < 1 {
        return Err(Error::Input(format!("grid must be at least 1, got {g}")));
    }
    let mut sol = CandidateSolution::identity(inst);
    if g >= inst.l {
        return Ok(sol);
    }
    let terminals: Vec<usize> = (0..6).map(|t| inst.terminal_vertex(t)).collect();
    let mut cache: HashMap<[Q; 3], TsPoint> = HashMap::new();
    for v in 0..inst.graph.n() {
        if terminals.contains(&v) {
            continue;
        }
        let a = inst.assoc(v);
        let snapped = [round_to(&a.x, g), round_to(&(&a.y / q(2)), g) * q(2), round_to(&a.z, g)];
        if let Some(p) = cache.get(&snapped) {
            sol.points[v] = p.clone();
            continue;
        }
        let mut x = formulas(&AssocVec::new(snapped[0].clone(), snapped[1].clone(), snapped[2].clone()));
        let m = &inst.metric;
        let deficit = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .map(|(i, j)| m.d(i, j) - &x[i] - &x[j])
            .chain(x.iter().map(|c| -c * q(2)))
            .max()
            .expect("nonempty");
        if deficit.is_positive() {
            let shift = deficit / q(2);
            for c in x.iter_mut() {
                *c += &shift;
            }
        }
        debug_assert!(is_valid_vector(m, &x)?);
        let p = project(m, &x)?;
        cache.insert(snapped, p.clone());
        sol.points[v] = p;
    }
    Ok(sol)
}
