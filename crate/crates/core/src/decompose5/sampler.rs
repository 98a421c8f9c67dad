//! Randomized rounding of tight-span points onto a refined vertex set.
//!
//! Every 2-face is a polygon with sides parallel to its two ℓ1 axes or to
//! their diagonals. In axis coordinates `(t, s)` the vertices of all 2-faces
//! induce a grid; grid lines are carried across shared sides until stable, so
//! each 2-face splits into grid rectangles and right isosceles triangles whose
//! corners are the refined vertices.
//!
//! A rectangle rounds each axis independently with a threshold that is shared
//! by opposite sides. A triangle with right angle at `R` and legs `RP`, `RQ`
//! rounds to `P` past the `RP` threshold, else to `Q` past the `RQ` threshold,
//! else to `R`; its thresholds satisfy `θ(R→P) = θ(Q→P)` and
//! `θ(R→Q) = 1 - θ(R→P)`. These relations glue segments into zones with one
//! uniform threshold per zone, which makes every segment's threshold uniform
//! and the rounding consistent on shared boundaries. The expected ℓ∞ distance
//! between rounded points never exceeds the distance between the points.

use std::collections::{BTreeSet, HashMap};

use num::bigint::BigInt;
use num::{Integer, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::is_valid_vector;
use crate::rational::{q, Q};
use crate::tightspan::{ts_distance, CellComplex, TsPoint};

/// Thresholds are `m / 2^54` with odd `m`, so they never hit 0 or 1.
const SCALE_BITS: u32 = 54;
const SCALE: u64 = 1 << SCALE_BITS;

/// Axis coordinates of a 2-face.
#[derive(Clone, Debug)]
struct Frame {
    origin: TsPoint,
    /// Sign of each coordinate in the two moving directions.
    sign: [Vec<i8>; 2],
    rep: [usize; 2],
}

impl Frame {
    fn new(c: &CellComplex, face: usize) -> Result<Self> {
        let k = c.k();
        let f = &c.faces[face];
        let mut adj = vec![Vec::new(); k];
        let mut looped = vec![false; k];
        for (i, j) in c.pairs(f.tight) {
            if i == j {
                looped[i] = true;
            } else {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut color = vec![0i8; k];
        let mut comps = Vec::new();
        for start in 0..k {
            if color[start] != 0 {
                continue;
            }
            color[start] = 1;
            let mut stack = vec![start];
            let mut members = vec![start];
            let mut bipartite = true;
            while let Some(u) = stack.pop() {
                bipartite &= !looped[u];
                for &v in &adj[u] {
                    if color[v] == 0 {
                        color[v] = -color[u];
                        stack.push(v);
                        members.push(v);
                    } else if color[v] == color[u] {
                        bipartite = false;
                    }
                }
            }
            if bipartite {
                comps.push(members);
            }
        }
        if comps.len() != 2 {
            return Err(Error::Structural(format!("2-face has {} free directions", comps.len())));
        }
        let mut sign = [vec![0i8; k], vec![0i8; k]];
        for (d, members) in comps.iter().enumerate() {
            for &i in members {
                sign[d][i] = color[i];
            }
        }
        let rep = [comps[0][0], comps[1][0]];
        Ok(Self { origin: c.vertices[f.vertex_ids[0]].clone(), sign, rep })
    }

    fn coords(&self, x: &[Q]) -> (Q, Q) {
        let p = |d: usize| {
            let r = self.rep[d];
            (&x[r] - &self.origin[r]) * q(self.sign[d][r] as i64)
        };
        let (p1, p2) = (p(0), p(1));
        let two = q(2);
        ((&p1 + &p2) / &two, (p1 - p2) / two)
    }

    fn point(&self, t: &Q, s: &Q) -> TsPoint {
        let p1 = t + s;
        let p2 = t - s;
        self.origin
            .iter()
            .enumerate()
            .map(|(i, o)| o + &p1 * q(self.sign[0][i] as i64) + &p2 * q(self.sign[1][i] as i64))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Plane {
    face: usize,
    frame: Frame,
    ts: Vec<Q>,
    ss: Vec<Q>,
}

/// Piece corners are refined vertex ids.
#[derive(Clone, Copy, Debug)]
enum Piece {
    /// Corners at `(t_i, s_j)`, `(t_i+1, s_j)`, `(t_i, s_j+1)`, `(t_i+1, s_j+1)`.
    Rect([usize; 4]),
    /// Grid corner indices (0..4 as in `Rect`) of the right angle and of the
    /// missing corner, plus all four refined ids (the missing one unused).
    Tri { right: usize, missing: usize, ids: [usize; 4] },
}

/// A threshold test along one segment.
#[derive(Clone, Copy, Debug)]
struct AxisTest {
    seg: usize,
    /// `ceil(q * 2^54)` for the fraction `q` along the segment's canonical
    /// direction (lower id to higher id).
    pos: u64,
    /// Whether the canonical direction runs from the near end to the far end.
    forward: bool,
}

impl AxisTest {
    fn far(&self, thr: &[u64]) -> bool {
        (self.pos >= thr[self.seg]) == self.forward
    }
}

#[derive(Clone, Copy, Debug)]
enum Loc {
    Fixed(usize),
    Seg { test: AxisTest, near: usize, far: usize },
    Rect { t: AxisTest, s: AxisTest, ids: [usize; 4] },
    Tri { rp: AxisTest, rq: AxisTest, r: usize, p: usize, q: usize },
}

/// Refined subdivision of a complex together with its segment zones.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub complex: CellComplex,
    /// Refined vertices, sorted lexicographically.
    pub points: Vec<TsPoint>,
    index: HashMap<TsPoint, usize>,
    planes: Vec<Plane>,
    pieces: HashMap<(usize, usize, usize), Piece>,
    segs: HashMap<(usize, usize), usize>,
    /// Zone root and parity of every segment.
    zone: Vec<(usize, bool)>,
    roots: Vec<usize>,
}

fn ceil_scaled(x: &Q) -> u64 {
    let n: BigInt = x.numer() * BigInt::from(SCALE);
    let v = n.div_ceil(x.denom());
    v.to_u64().expect("fraction in [0, 1]")
}

fn fraction(a: &Q, b: &Q, x: &Q) -> Q {
    (x - a) / (b - a)
}

struct Zones {
    parent: Vec<usize>,
    parity: Vec<bool>,
}

impl Zones {
    fn add(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parity.push(false);
        self.parent.len() - 1
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (r, par) = self.find(p);
        self.parent[x] = r;
        self.parity[x] ^= par;
        (r, self.parity[x])
    }

    /// Records `value(a) = value(b)` when `flip` is false, else `1 - value(b)`.
    fn union(&mut self, a: usize, b: usize, flip: bool) -> Result<()> {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            if pa ^ pb != flip {
                return Err(Error::Structural("inconsistent rounding zones".into()));
            }
            return Ok(());
        }
        self.parent[ra] = rb;
        self.parity[ra] = pa ^ pb ^ flip;
        Ok(())
    }
}

impl Refinement {
    pub fn new(c: &CellComplex) -> Result<Self> {
        let mut planes = Vec::new();
        for (fi, f) in c.faces.iter().enumerate() {
            if f.dim > 2 {
                return Err(Error::Unsupported("tight spans of dimension above 2".into()));
            }
            if f.dim == 2 {
                let frame = Frame::new(c, fi)?;
                let mut ts = BTreeSet::new();
                let mut ss = BTreeSet::new();
                for &v in &f.vertex_ids {
                    let (t, s) = frame.coords(&c.vertices[v]);
                    ts.insert(t);
                    ss.insert(s);
                }
                planes.push(Plane { face: fi, frame, ts: ts.into_iter().collect(), ss: ss.into_iter().collect() });
            }
        }
        propagate_cuts(c, &mut planes);

        let mut point_set: BTreeSet<TsPoint> = c.vertices.iter().cloned().collect();
        let mut grids = Vec::new();
        for pl in &planes {
            let mut inside = vec![vec![None; pl.ss.len()]; pl.ts.len()];
            for (i, t) in pl.ts.iter().enumerate() {
                for (j, s) in pl.ss.iter().enumerate() {
                    let x = pl.frame.point(t, s);
                    if is_valid_vector(&c.metric, &x)? {
                        point_set.insert(x.clone());
                        inside[i][j] = Some(x);
                    }
                }
            }
            grids.push(inside);
        }
        let points: Vec<TsPoint> = point_set.into_iter().collect();
        let index: HashMap<TsPoint, usize> = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();

        let mut pieces = HashMap::new();
        for (pi, pl) in planes.iter().enumerate() {
            let g = &grids[pi];
            for i in 0..pl.ts.len().saturating_sub(1) {
                for j in 0..pl.ss.len().saturating_sub(1) {
                    let corners = [&g[i][j], &g[i + 1][j], &g[i][j + 1], &g[i + 1][j + 1]];
                    let present: Vec<usize> = (0..4).filter(|&x| corners[x].is_some()).collect();
                    let ids = corners.map(|x| x.as_ref().map_or(usize::MAX, |p| index[p]));
                    let centre =
                        pl.frame.point(&((&pl.ts[i] + &pl.ts[i + 1]) / q(2)), &((&pl.ss[j] + &pl.ss[j + 1]) / q(2)));
                    match present.len() {
                        4 => {
                            pieces.insert((pi, i, j), Piece::Rect(ids));
                        }
                        3 => {
                            let missing = (0..4).find(|x| !present.contains(x)).unwrap();
                            let right = 3 - missing;
                            let square = &pl.ts[i + 1] - &pl.ts[i] == &pl.ss[j + 1] - &pl.ss[j];
                            // a point three quarters of the way from the centre to the missing corner
                            let (tm, sm) = (&pl.ts[i + (missing & 1)], &pl.ss[j + (missing >> 1)]);
                            let (tc, sc) = ((&pl.ts[i] + &pl.ts[i + 1]) / q(2), (&pl.ss[j] + &pl.ss[j + 1]) / q(2));
                            let beyond = pl.frame.point(&((&tc + tm * q(3)) / q(4)), &((&sc + sm * q(3)) / q(4)));
                            if !square || is_valid_vector(&c.metric, &beyond)? {
                                return Err(Error::Unsupported("2-face does not split into grid pieces".into()));
                            }
                            pieces.insert((pi, i, j), Piece::Tri { right, missing, ids });
                        }
                        _ => {
                            if is_valid_vector(&c.metric, &centre)? {
                                return Err(Error::Unsupported("2-face does not split into grid pieces".into()));
                            }
                        }
                    }
                }
            }
        }

        let mut segs = HashMap::new();
        let mut zones = Zones { parent: Vec::new(), parity: Vec::new() };
        let mut seg = |a: usize, b: usize, zones: &mut Zones| -> (usize, bool) {
            let key = (a.min(b), a.max(b));
            let id = *segs.entry(key).or_insert_with(|| zones.add());
            (id, a > b)
        };
        let mut keys: Vec<_> = pieces.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            match pieces[&key] {
                Piece::Rect([c00, c10, c01, c11]) => {
                    let (b, fb) = seg(c00, c10, &mut zones);
                    let (t, ft) = seg(c01, c11, &mut zones);
                    zones.union(b, t, fb ^ ft)?;
                    let (l, fl) = seg(c00, c01, &mut zones);
                    let (r, fr) = seg(c10, c11, &mut zones);
                    zones.union(l, r, fl ^ fr)?;
                }
                Piece::Tri { right, missing, ids } => {
                    let (r, p, qv) = tri_corners(right, missing, ids);
                    let (rp, frp) = seg(r, p, &mut zones);
                    let (rq, frq) = seg(r, qv, &mut zones);
                    let (qp, fqp) = seg(qv, p, &mut zones);
                    zones.union(rp, qp, frp ^ fqp)?;
                    zones.union(rq, rp, frq ^ frp ^ true)?;
                }
            }
        }
        for (fi, f) in c.faces.iter().enumerate() {
            if f.dim == 1 && !planes.iter().any(|pl| contains(c, pl.face, fi)) {
                let a = index[&c.vertices[f.vertex_ids[0]]];
                let b = index[&c.vertices[f.vertex_ids[1]]];
                seg(a, b, &mut zones);
            }
        }
        let zone: Vec<(usize, bool)> = (0..zones.parent.len()).map(|s| zones.find(s)).collect();
        let mut roots: Vec<usize> = zone.iter().map(|z| z.0).collect();
        roots.sort_unstable();
        roots.dedup();
        Ok(Self { complex: c.clone(), points, index, planes, pieces, segs, zone, roots })
    }

    /// Number of independent thresholds drawn per sample.
    pub fn zone_count(&self) -> usize {
        self.roots.len()
    }

    fn seg_test(&self, near: usize, far: usize, frac: &Q) -> AxisTest {
        let key = (near.min(far), near.max(far));
        let seg = self.segs[&key];
        let forward = near < far;
        let canon = if forward { frac.clone() } else { q(1) - frac };
        AxisTest { seg, pos: ceil_scaled(&canon), forward }
    }

    fn locate(&self, x: &[Q]) -> Result<Loc> {
        if let Some(&id) = self.index.get(x) {
            return Ok(Loc::Fixed(id));
        }
        let c = &self.complex;
        let face = c.face_of(x).ok_or_else(|| Error::Structural("point is not in the tight span".into()))?;
        if let Some(pi) = self.planes.iter().position(|pl| contains(c, pl.face, face)) {
            return self.locate_in_plane(pi, x);
        }
        let f = &c.faces[face];
        if f.dim != 1 {
            return Err(Error::Structural("unlocated tight-span point".into()));
        }
        let a = self.index[&c.vertices[f.vertex_ids[0]]];
        let b = self.index[&c.vertices[f.vertex_ids[1]]];
        let frac = ts_distance(&self.points[a], x) / ts_distance(&self.points[a], &self.points[b]);
        Ok(Loc::Seg { test: self.seg_test(a, b, &frac), near: a, far: b })
    }

    fn locate_in_plane(&self, pi: usize, x: &[Q]) -> Result<Loc> {
        let pl = &self.planes[pi];
        let (t, s) = pl.frame.coords(x);
        let span = |cuts: &[Q], v: &Q| -> Vec<usize> {
            (0..cuts.len().saturating_sub(1)).filter(|&i| cuts[i] <= *v && *v <= cuts[i + 1]).collect()
        };
        for i in span(&pl.ts, &t) {
            for j in span(&pl.ss, &s) {
                let Some(piece) = self.pieces.get(&(pi, i, j)) else { continue };
                let u = fraction(&pl.ts[i], &pl.ts[i + 1], &t);
                let w = fraction(&pl.ss[j], &pl.ss[j + 1], &s);
                match *piece {
                    Piece::Rect(ids) => {
                        let [c00, c10, c01, _] = ids;
                        return Ok(Loc::Rect { t: self.seg_test(c00, c10, &u), s: self.seg_test(c00, c01, &w), ids });
                    }
                    Piece::Tri { right, missing, ids } => {
                        // fractions measured from the right-angle corner
                        let ur = if right & 1 == 0 { u.clone() } else { q(1) - &u };
                        let wr = if right & 2 == 0 { w.clone() } else { q(1) - &w };
                        if ur.clone() + &wr > q(1) {
                            continue;
                        }
                        let (r, p, qv) = tri_corners(right, missing, ids);
                        return Ok(Loc::Tri {
                            rp: self.seg_test(r, p, &ur),
                            rq: self.seg_test(r, qv, &wr),
                            r,
                            p,
                            q: qv,
                        });
                    }
                }
            }
        }
        Err(Error::Structural("point lies outside every piece of its 2-face".into()))
    }

    /// Draws one threshold per zone and returns every segment's threshold.
    fn thresholds(&self, rng: &mut impl Rng) -> Vec<u64> {
        let mut root_thr = HashMap::with_capacity(self.roots.len());
        for &r in &self.roots {
            let m = 2 * rng.gen_range(0..SCALE / 2) + 1;
            root_thr.insert(r, m);
        }
        self.zone.iter().map(|&(r, flip)| if flip { SCALE - root_thr[&r] } else { root_thr[&r] }).collect()
    }
}

/// Right-angle corner, the leg end along `t`, and the leg end along `s`.
fn tri_corners(right: usize, missing: usize, ids: [usize; 4]) -> (usize, usize, usize) {
    let p = ids[right ^ 1];
    let qv = ids[right ^ 2];
    debug_assert_eq!(right ^ 3, missing);
    (ids[right], p, qv)
}

fn contains(c: &CellComplex, outer: usize, inner: usize) -> bool {
    let o = &c.faces[outer].vertex_ids;
    c.faces[inner].vertex_ids.iter().all(|v| o.contains(v))
}

/// Carries grid lines across sides shared by several 2-faces until stable.
fn propagate_cuts(c: &CellComplex, planes: &mut [Plane]) {
    let edges: Vec<usize> = (0..c.faces.len()).filter(|&f| c.faces[f].dim == 1).collect();
    loop {
        let mut changed = false;
        for &e in &edges {
            let owners: Vec<usize> = (0..planes.len()).filter(|&p| contains(c, planes[p].face, e)).collect();
            if owners.len() < 2 {
                continue;
            }
            let ends = [&c.vertices[c.faces[e].vertex_ids[0]], &c.vertices[c.faces[e].vertex_ids[1]]];
            let mut pts: Vec<TsPoint> = Vec::new();
            for &p in &owners {
                let pl = &planes[p];
                let (ta, sa) = pl.frame.coords(ends[0]);
                let (tb, sb) = pl.frame.coords(ends[1]);
                if ta == tb {
                    let (lo, hi) = if sa < sb { (&sa, &sb) } else { (&sb, &sa) };
                    pts.extend(pl.ss.iter().filter(|s| lo < *s && *s < hi).map(|s| pl.frame.point(&ta, s)));
                } else if sa == sb {
                    let (lo, hi) = if ta < tb { (&ta, &tb) } else { (&tb, &ta) };
                    pts.extend(pl.ts.iter().filter(|t| lo < *t && *t < hi).map(|t| pl.frame.point(t, &sa)));
                }
            }
            for &p in &owners {
                let pl = &mut planes[p];
                for x in &pts {
                    let (t, s) = pl.frame.coords(x);
                    for (cuts, v) in [(&mut pl.ts, t), (&mut pl.ss, s)] {
                        if let Err(pos) = cuts.binary_search(&v) {
                            cuts.insert(pos, v);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Precomputed locations of a set of tight-span points.
#[derive(Clone, Debug)]
pub struct Rounder {
    pub refinement: Refinement,
    locs: Vec<Loc>,
}

impl Rounder {
    pub fn new(c: &CellComplex, points: &[TsPoint]) -> Result<Self> {
        let refinement = Refinement::new(c)?;
        let locs = points.par_iter().map(|x| refinement.locate(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { refinement, locs })
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    /// Refined vertex chosen for every point under one draw of thresholds.
    pub fn round(&self, seed: u64, stream: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let thr = self.refinement.thresholds(&mut rng);
        self.locs
            .iter()
            .map(|loc| match *loc {
                Loc::Fixed(v) => v,
                Loc::Seg { test, near, far } => {
                    if test.far(&thr) {
                        far
                    } else {
                        near
                    }
                }
                Loc::Rect { t, s, ids } => ids[t.far(&thr) as usize | (s.far(&thr) as usize) << 1],
                Loc::Tri { rp, rq, r, p, q } => {
                    if rp.far(&thr) {
                        p
                    } else if rq.far(&thr) {
                        q
                    } else {
                        r
                    }
                }
            })
            .collect()
    }
}
