//! Tight span of a finite metric: membership, the projection schedule, the
//! ℓ∞ tight-span distance, and exact enumeration of the polyhedral complex.

use std::collections::{BTreeSet, HashMap, HashSet};

use num::{Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::{is_valid_vector, TerminalMetric};
use crate::rational::{fmt_vec, linf, Q};

/// A point of the tight span, stored as a distance vector in terminal order.
pub type TsPoint = Vec<Q>;

/// Pairs `(i, j)` with `i <= j`; the diagonal pair `(t, t)` stands for the
/// nonnegativity constraint `2 x_t >= 0`.
pub fn pair_list(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            out.push((i, j));
        }
    }
    out
}

/// Bitmask over [`pair_list`] of the constraints that hold with equality at `x`.
pub fn tight_mask(m: &TerminalMetric, x: &[Q]) -> u32 {
    let mut mask = 0u32;
    for (b, (i, j)) in pair_list(m.k()).into_iter().enumerate() {
        if &x[i] + &x[j] == *m.d(i, j) {
            mask |= 1 << b;
        }
    }
    mask
}

/// True iff `x` is valid and every coordinate lies in a tight pair.
pub fn in_tight_span(m: &TerminalMetric, x: &[Q]) -> bool {
    if !matches!(is_valid_vector(m, x), Ok(true)) {
        return false;
    }
    (0..m.k()).all(|t| (0..m.k()).any(|s| &x[t] + &x[s] == *m.d(t, s)))
}

/// Shrinks active coordinates at a common rate until each meets a tight pair.
///
/// For an active coordinate `t`, its slack against `t'` is half the excess
/// `x_t + x_t' - D(t,t')` when `t'` is also active and the full excess when
/// `t'` is frozen. The pair `(t, t)` is included so coordinates never cross
/// zero. Each round subtracts the smallest slack from all active coordinates
/// and freezes those attaining it.
pub fn project(m: &TerminalMetric, x: &[Q]) -> Result<TsPoint> {
    if !is_valid_vector(m, x)? {
        return Err(Error::Precondition("projection needs a valid vector".into()));
    }
    let k = m.k();
    let mut x = x.to_vec();
    let mut active = vec![true; k];
    let two = Q::from_integer(2.into());
    while active.iter().any(|&a| a) {
        let mut slack: Vec<Option<Q>> = vec![None; k];
        for t in (0..k).filter(|&t| active[t]) {
            let mut best: Option<Q> = None;
            for s in 0..k {
                let excess = &x[t] + &x[s] - m.d(t, s);
                let d = if active[s] { excess / &two } else { excess };
                if best.as_ref().is_none_or(|b| d < *b) {
                    best = Some(d);
                }
            }
            slack[t] = best;
        }
        let delta = slack.iter().flatten().min().cloned().expect("an active coordinate");
        for t in 0..k {
            if let Some(s) = &slack[t] {
                x[t] -= &delta;
                if *s == delta {
                    active[t] = false;
                }
            }
        }
    }
    Ok(x)
}

/// The tight-span distance `max_t |x_t - y_t|`.
pub fn ts_distance(x: &[Q], y: &[Q]) -> Q {
    linf(x, y)
}

/// One face of the tight-span complex: all points where exactly the pairs in
/// `tight` are tight (relative interior) together with its boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub tight: u32,
    pub dim: usize,
    pub vertex_ids: Vec<usize>,
}

/// A maximal face, as reported to users.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub tight_pairs: Vec<(usize, usize)>,
    pub dimension: usize,
    pub vertex_ids: Vec<usize>,
    pub adjacent_cell_ids: Vec<usize>,
    /// Index into [`CellComplex::faces`].
    pub face: usize,
}

/// Polyhedral structure of TS(D): vertices, every face, and the maximal cells.
#[derive(Clone, Debug)]
pub struct CellComplex {
    pub metric: TerminalMetric,
    /// Sorted lexicographically by coordinates.
    pub vertices: Vec<TsPoint>,
    /// All faces, sorted by `(dim, vertex_ids)`.
    pub faces: Vec<Face>,
    /// Maximal faces only.
    pub cells: Vec<Cell>,
    by_mask: HashMap<u32, usize>,
}

impl CellComplex {
    pub fn k(&self) -> usize {
        self.metric.k()
    }

    pub fn pairs(&self, mask: u32) -> Vec<(usize, usize)> {
        pair_list(self.k()).into_iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, p)| p).collect()
    }

    /// Face whose relative interior contains `x`, if `x` is in TS(D).
    pub fn face_of(&self, x: &[Q]) -> Option<usize> {
        if !in_tight_span(&self.metric, x) {
            return None;
        }
        self.by_mask.get(&tight_mask(&self.metric, x)).copied()
    }

    /// Vertex id of a terminal's own point.
    pub fn terminal_vertex(&self, t: usize) -> usize {
        let row = self.metric.row(t);
        self.vertices.iter().position(|v| *v == row).expect("terminal rows are vertices")
    }

    /// ℓ∞ length of a 1-face.
    pub fn edge_length(&self, face: usize) -> Q {
        let f = &self.faces[face];
        assert_eq!(f.dim, 1, "edge_length needs a 1-face");
        ts_distance(&self.vertices[f.vertex_ids[0]], &self.vertices[f.vertex_ids[1]])
    }

    /// 1-faces contained in `face`.
    pub fn edges_of(&self, face: usize) -> Vec<usize> {
        let vs: HashSet<usize> = self.faces[face].vertex_ids.iter().copied().collect();
        (0..self.faces.len())
            .filter(|&g| self.faces[g].dim == 1 && self.faces[g].vertex_ids.iter().all(|v| vs.contains(v)))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let names = self.metric.names();
        let cells: Vec<Value> = self
            .cells
            .iter()
            .map(|c| {
                json!({
                    "pairs": c.tight_pairs.iter().map(|&(i, j)| vec![names[i].clone(), names[j].clone()]).collect::<Vec<_>>(),
                    "dim": c.dimension,
                    "vertices": c.vertex_ids,
                    "adjacent": c.adjacent_cell_ids,
                })
            })
            .collect();
        json!({
            "terminals": names,
            "vertices": self.vertices.iter().map(|v| fmt_vec(v)).collect::<Vec<_>>(),
            "cells": cells,
            "max_dim": max_cell_dimension(self),
        })
    }
}

/// Maximum dimension over the maximal cells.
pub fn max_cell_dimension(c: &CellComplex) -> usize {
    c.cells.iter().map(|c| c.dimension).max().unwrap_or(0)
}

/// Rank of a small integer matrix by fraction-free elimination.
pub(crate) fn int_rank(mut rows: Vec<Vec<i128>>) -> usize {
    let n = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else { continue };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let (a, b) = (rows[rank][col], rows[r][col]);
                for c in 0..n {
                    rows[r][c] = rows[r][c] * a - rows[rank][c] * b;
                }
                let g = rows[r].iter().fold(0i128, |g, &v| gcd(g, v.abs()));
                if g > 1 {
                    rows[r].iter_mut().for_each(|v| *v /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn incidence(k: usize, pairs: &[(usize, usize)]) -> Vec<Vec<i128>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let mut r = vec![0i128; k];
            r[i] += 1;
            r[j] += 1;
            r
        })
        .collect()
}

/// Solves the square system `x_i + x_j = D(i,j)` for the given pairs exactly.
fn solve_pairs(m: &TerminalMetric, pairs: &[(usize, usize)]) -> Option<Vec<Q>> {
    let k = m.k();
    let mut a: Vec<Vec<Q>> = pairs
        .iter()
        .map(|&(i, j)| {
            let mut r = vec![Q::zero(); k + 1];
            r[i] += Q::from_integer(1.into());
            r[j] += Q::from_integer(1.into());
            r[k] = m.d(i, j).clone();
            r
        })
        .collect();
    for col in 0..k {
        let p = (col..k).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        let piv = a[col][col].clone();
        for c in col..=k {
            a[col][c] = &a[col][c] / &piv;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=k {
                    let v = &a[col][c] * &f;
                    a[r][c] -= v;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[k].clone()).collect())
}

/// Floating-point screen: false only when the system is clearly infeasible.
fn float_feasible(df: &[Vec<f64>], pairs: &[(usize, usize)]) -> bool {
    let k = df.len();
    let mut a: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j)| {
            let mut r = vec![0.0; k + 1];
            r[i] += 1.0;
            r[j] += 1.0;
            r[k] = df[i][j];
            r
        })
        .collect();
    for col in 0..k {
        let p = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        let piv = a[col][col];
        for c in col..=k {
            a[col][c] /= piv;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let x: Vec<f64> = (0..k).map(|i| a[i][k]).collect();
    let scale = df.iter().flatten().fold(1.0f64, |s, &v| s.max(v.abs()));
    let tol = 1e-7 * scale;
    (0..k).all(|i| (i..k).all(|j| x[i] + x[j] >= df[i][j] - tol))
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    if r > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact enumeration of the tight-span complex for `k <= 6` terminals.
///
/// Vertices are the feasible unique solutions of `k` independent tight
/// equalities, the diagonal pairs included. Faces are the intersections of
/// vertex tight sets that still touch every coordinate.
pub fn enumerate_complex(m: &TerminalMetric) -> Result<CellComplex> {
    let k = m.k();
    if k > 6 {
        return Err(Error::Unsupported(format!("tight-span enumeration supports at most 6 terminals, got {k}")));
    }
    if k == 0 {
        return Err(Error::Precondition("metric has no terminals".into()));
    }
    let pairs = pair_list(k);
    let df: Vec<Vec<f64>> = m.matrix().iter().map(|r| r.iter().map(crate::rational::to_f64).collect()).collect();
    let combos = combinations(pairs.len(), k);
    let found: BTreeSet<Vec<Q>> = combos
        .par_iter()
        .filter_map(|c| {
            let sys: Vec<(usize, usize)> = c.iter().map(|&b| pairs[b]).collect();
            if int_rank(incidence(k, &sys)) < k || !float_feasible(&df, &sys) {
                return None;
            }
            let x = solve_pairs(m, &sys)?;
            let ok = x.iter().all(|v| !v.is_negative()) && is_valid_vector(m, &x).unwrap_or(false);
            ok.then_some(x)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let vertices: Vec<Vec<Q>> = found.into_iter().collect();
    let masks: Vec<u32> = vertices.iter().map(|v| tight_mask(m, v)).collect();

    let covers = |mask: u32| {
        let mut seen = vec![false; k];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                seen[i] = true;
                seen[j] = true;
            }
        }
        seen.into_iter().all(|s| s)
    };
    let gens: Vec<u32> = masks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut closure: HashSet<u32> = gens.iter().copied().collect();
    let mut stack: Vec<u32> = gens.clone();
    while let Some(a) = stack.pop() {
        for &g in &gens {
            let c = a & g;
            if covers(c) && closure.insert(c) {
                stack.push(c);
            }
        }
    }
    let mut faces: Vec<Face> = closure
        .into_iter()
        .filter(|&s| covers(s))
        .map(|s| {
            let vertex_ids: Vec<usize> = (0..vertices.len()).filter(|&v| masks[v] & s == s).collect();
            let sel: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(b, _)| s >> b & 1 == 1).map(|(_, &p)| p).collect();
            let dim = k - int_rank(incidence(k, &sel));
            Face { tight: s, dim, vertex_ids }
        })
        .collect();
    faces.sort_by(|a, b| (a.dim, &a.vertex_ids).cmp(&(b.dim, &b.vertex_ids)));
    let by_mask: HashMap<u32, usize> = faces.iter().enumerate().map(|(i, f)| (f.tight, i)).collect();

    let sets: Vec<HashSet<usize>> = faces.iter().map(|f| f.vertex_ids.iter().copied().collect()).collect();
    let maximal: Vec<usize> = (0..faces.len())
        .filter(|&f| !(0..faces.len()).any(|g| g != f && sets[g].len() > sets[f].len() && sets[f].is_subset(&sets[g])))
        .collect();
    let cells: Vec<Cell> = maximal
        .iter()
        .map(|&f| {
            let adjacent = maximal
                .iter()
                .enumerate()
                .filter(|&(_, &g)| g != f && !sets[f].is_disjoint(&sets[g]))
                .map(|(ci, _)| ci)
                .collect();
            Cell {
                tight_pairs: pairs
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| faces[f].tight >> b & 1 == 1)
                    .map(|(_, &p)| p)
                    .collect(),
                dimension: faces[f].dim,
                vertex_ids: faces[f].vertex_ids.clone(),
                adjacent_cell_ids: adjacent,
                face: f,
            }
        })
        .collect();
    Ok(CellComplex { metric: m.clone(), vertices, faces, cells, by_mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qr};

    fn m3() -> TerminalMetric {
        TerminalMetric::from_pairs(&["a", "b", "c"], &[("a", "b", q(7)), ("a", "c", q(5)), ("b", "c", q(8))]).unwrap()
    }

    fn all4() -> TerminalMetric {
        TerminalMetric::from_pairs(&["a", "b", "c"], &[("a", "b", q(4)), ("a", "c", q(4)), ("b", "c", q(4))]).unwrap()
    }

    fn v(xs: &[i64]) -> Vec<Q> {
        xs.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn membership_examples() {
        let m = m3();
        assert!(in_tight_span(&m, &v(&[0, 7, 5])));
        assert!(in_tight_span(&m, &v(&[1, 6, 4])));
        assert!(!in_tight_span(&m, &v(&[3, 6, 4])));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(&m3(), &v(&[3, 6, 4])).unwrap(), v(&[2, 5, 3]));
        assert_eq!(project(&m3(), &v(&[1, 6, 4])).unwrap(), v(&[1, 6, 4]));
        assert_eq!(project(&all4(), &v(&[1, 3, 5])).unwrap(), v(&[1, 3, 3]));
        assert!(matches!(project(&m3(), &v(&[0, 0, 0])), Err(Error::Precondition(_))));
    }

    #[test]
    fn projection_stays_nonnegative() {
        let m = TerminalMetric::from_pairs(&["a", "b"], &[("a", "b", q(1))]).unwrap();
        let p = project(&m, &v(&[0, 100])).unwrap();
        assert_eq!(p, v(&[0, 1]));
    }

    #[test]
    fn projection_is_not_nearest_point() {
        let x = v(&[1, 3, 5]);
        let p = project(&all4(), &x).unwrap();
        assert_eq!(linf(&x, &v(&[0, 4, 4])), q(1));
        assert_eq!(linf(&x, &p), q(2));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(ts_distance(&v(&[1, 6, 4]), &v(&[3, 6, 2])), q(2));
        assert_eq!(ts_distance(&v(&[0, 7, 5]), &v(&[7, 0, 8])), q(7));
    }

    #[test]
    fn two_point_complex() {
        let m = TerminalMetric::from_pairs(&["a", "b"], &[("a", "b", qr(5, 2))]).unwrap();
        let c = enumerate_complex(&m).unwrap();
        assert_eq!(c.vertices.len(), 2);
        assert_eq!(c.cells.len(), 1);
        assert_eq!(c.cells[0].dimension, 1);
        assert_eq!(c.edge_length(c.cells[0].face), qr(5, 2));
    }

    #[test]
    fn star_complex() {
        let c = enumerate_complex(&m3()).unwrap();
        assert_eq!(c.vertices.len(), 4);
        assert!(c.vertices.contains(&v(&[2, 5, 3])));
        let mut lens: Vec<Q> = c.cells.iter().map(|cell| c.edge_length(cell.face)).collect();
        lens.sort();
        assert_eq!(lens, vec![q(2), q(3), q(5)]);
        assert_eq!(max_cell_dimension(&c), 1);
    }

    #[test]
    fn single_terminal() {
        let m = TerminalMetric::new(vec!["a".into()], vec![vec![q(0)]]).unwrap();
        let c = enumerate_complex(&m).unwrap();
        assert_eq!(c.vertices, vec![v(&[0])]);
        assert_eq!(max_cell_dimension(&c), 0);
    }

    #[test]
    fn rank_of_odd_cycle() {
        let r = int_rank(incidence(3, &[(0, 1), (1, 2), (0, 2)]));
        assert_eq!(r, 3);
        let r = int_rank(incidence(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]));
        assert_eq!(r, 3);
    }
}

#[cfg(test)]
pub(crate) mod complex_tests {
    use super::*;
    use crate::rational::{q, qr};

    pub(crate) fn example2() -> TerminalMetric {
        TerminalMetric::from_pairs(
            &["a", "b", "c", "d"],
            &[
                ("a", "b", q(7)),
                ("a", "c", q(8)),
                ("a", "d", q(4)),
                ("b", "c", q(6)),
                ("b", "d", q(8)),
                ("c", "d", q(5)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rectangle_with_pendants() {
        let c = enumerate_complex(&example2()).unwrap();
        assert_eq!(max_cell_dimension(&c), 2);
        let mut pend: Vec<Q> = c.cells.iter().filter(|x| x.dimension == 1).map(|x| c.edge_length(x.face)).collect();
        pend.sort();
        assert_eq!(pend, vec![qr(1, 2), qr(3, 2), qr(3, 2), qr(5, 2)]);
        let sq = c.cells.iter().find(|x| x.dimension == 2).unwrap();
        let mut sides: Vec<Q> = c.edges_of(sq.face).into_iter().map(|e| c.edge_length(e)).collect();
        sides.sort();
        assert_eq!(sides, vec![q(2), q(2), q(3), q(3)]);
    }
}
