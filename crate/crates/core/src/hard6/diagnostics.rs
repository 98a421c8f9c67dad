//! Path losses and their directional and planar decompositions.

use std::collections::{BTreeMap, HashMap};

use num::{Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{add_key, rect_project, to_assoc, AssocVec, CandidateSolution, Group, HardInstance, Key, STEPS, TERMINALS};
use crate::error::{Error, Result};
use crate::rational::{fmt_q, pos, q, qr, Q};
use crate::tightspan::ts_distance;

/// A named inequality `lhs ≥ rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub lhs: Q,
    pub rhs: Q,
}

impl Check {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }

    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "lhs": fmt_q(&self.lhs), "rhs": fmt_q(&self.rhs), "holds": self.holds()})
    }
}

#[derive(Clone, Debug)]
pub struct LossReport {
    /// `vol(P) - δ(source, sink)` in `all_paths` order.
    pub per_path: Vec<Q>,
    /// `Σ capacity · loss`.
    pub total: Q,
    pub vol: Q,
    /// `Σ capacity · D(source, sink)`.
    pub opt: Q,
}

impl LossReport {
    pub fn to_json(&self, inst: &HardInstance) -> Value {
        let mut groups: BTreeMap<&str, Q> = BTreeMap::new();
        for (p, l) in inst.all_paths().zip(&self.per_path) {
            *groups.entry(p.group.tag()).or_insert_with(Q::zero) += l;
        }
        let groups: BTreeMap<&str, String> = groups.iter().map(|(k, v)| (*k, fmt_q(v))).collect();
        json!({
            "total": fmt_q(&self.total),
            "vol": fmt_q(&self.vol),
            "opt": fmt_q(&self.opt),
            "group_losses": groups,
        })
    }
}

fn check_cover(inst: &HardInstance, sol: &CandidateSolution) -> Result<()> {
    if sol.points.len() != inst.graph.n() {
        return Err(Error::Structural(format!("solution covers {} of {} vertices", sol.points.len(), inst.graph.n())));
    }
    Ok(())
}

pub fn losses(inst: &HardInstance, sol: &CandidateSolution) -> Result<LossReport> {
    check_cover(inst, sol)?;
    let f = &sol.points;
    let paths: Vec<_> = inst.all_paths().collect();
    let rows: Vec<(Q, Q)> = paths
        .par_iter()
        .map(|p| {
            let vol: Q = inst.graph.edges[p.edges.clone()].iter().map(|e| ts_distance(&f[e.u], &f[e.v])).sum();
            let (s, t) = (inst.terminal_vertex(p.source), inst.terminal_vertex(p.sink));
            let loss = &vol - ts_distance(&f[s], &f[t]);
            (vol, loss)
        })
        .collect();
    let mut total = Q::zero();
    let mut vol = Q::zero();
    for (p, (v, l)) in paths.iter().zip(&rows) {
        total += &p.capacity * l;
        vol += &p.capacity * v;
    }
    Ok(LossReport { per_path: rows.into_iter().map(|r| r.1).collect(), total, vol, opt: inst.opt() })
}

/// Terminals used by the directional tables: `b`, `c`, `d`.
const DIR_TERMINALS: [usize; 3] = [1, 2, 3];

/// `(vertex key, direction, terminal)` with its forward and backward losses.
pub type DirectionalEntry = ((Key, u8, usize), (Q, Q));

#[derive(Clone, Debug)]
pub struct DirectionalLosses {
    /// `(v, direction, terminal) -> (ℓ_i(v,t), ℓ'_i(v,t))` where `v + w_i` exists.
    pub table: BTreeMap<(Key, u8, usize), (Q, Q)>,
    /// The four aggregate path-loss inequalities.
    pub cost_checks: Vec<Check>,
    pub claim_x_checked: usize,
    /// Per-vertex failures of the `x`-coordinate bounds.
    pub claim_x_failures: Vec<String>,
}

impl DirectionalLosses {
    pub fn get(&self, v: Key, dir: u8, t: usize) -> Option<&(Q, Q)> {
        self.table.get(&(v, dir, t))
    }

    pub fn to_json(&self) -> Value {
        let mut sums: BTreeMap<String, Q> = BTreeMap::new();
        for ((_, d, t), (a, b)) in &self.table {
            *sums.entry(format!("l{}({})", d, TERMINALS[*t])).or_insert_with(Q::zero) += a;
            *sums.entry(format!("l'{}({})", d, TERMINALS[*t])).or_insert_with(Q::zero) += b;
        }
        let sums: BTreeMap<String, String> = sums.into_iter().map(|(k, v)| (k, fmt_q(&v))).collect();
        json!({
            "entries": self.table.len(),
            "sums": sums,
            "cost_checks": self.cost_checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "claim_x_checked": self.claim_x_checked,
            "claim_x_failures": self.claim_x_failures,
        })
    }
}

pub fn directional_losses(inst: &HardInstance, sol: &CandidateSolution) -> Result<DirectionalLosses> {
    let rep = losses(inst, sol)?;
    let f = &sol.points;
    let tpoint: Vec<_> = (0..6).map(|t| &f[inst.terminal_vertex(t)]).collect();
    let entries: Vec<DirectionalEntry> = (0..inst.graph.n())
        .into_par_iter()
        .flat_map_iter(|v| {
            let mut out = Vec::new();
            for (i, w) in STEPS.iter().enumerate() {
                let Some(u) = inst.vertex_of(&add_key(inst.keys[v], *w)) else { continue };
                let step = ts_distance(&f[v], &f[u]);
                for &t in &DIR_TERMINALS {
                    let (dv, du) = (ts_distance(&f[v], tpoint[t]), ts_distance(&f[u], tpoint[t]));
                    let fwd = &step + &dv - &du;
                    let back = &step - &dv + &du;
                    out.push(((inst.keys[v], i as u8 + 1, t), (fwd, back)));
                }
            }
            out
        })
        .collect();
    let table: BTreeMap<_, _> = entries.into_iter().collect();

    let mut group_loss: HashMap<Group, Q> = HashMap::new();
    for (p, l) in inst.all_paths().zip(&rep.per_path) {
        *group_loss.entry(p.group).or_insert_with(Q::zero) += l;
    }
    let gl = |g: Group| group_loss.get(&g).cloned().unwrap_or_else(Q::zero);
    let sum = |dir: u8, terms: &[(usize, bool, i64)]| -> Q {
        let mut s = Q::zero();
        for ((_, d, t), (fwd, back)) in &table {
            if *d != dir {
                continue;
            }
            for &(tt, forward, coeff) in terms {
                if *t == tt {
                    s += q(coeff) * if forward { fwd } else { back };
                }
            }
        }
        s
    };
    let (b, c, d) = (1, 2, 3);
    let cost_checks = vec![
        Check {
            name: "direction 1".into(),
            lhs: gl(Group::Ad1) + gl(Group::Be1),
            rhs: sum(1, &[(d, true, 1), (b, true, 1)]),
        },
        Check {
            name: "direction 2".into(),
            lhs: gl(Group::Ad2) + gl(Group::Be2),
            rhs: sum(2, &[(d, false, 1), (b, false, 1)]),
        },
        Check {
            name: "direction 3".into(),
            lhs: gl(Group::Ad3) + gl(Group::Be3) + gl(Group::Cf3) * q(2),
            rhs: sum(3, &[(d, false, 1), (b, true, 1), (c, true, 2)]),
        },
        Check {
            name: "direction 4".into(),
            lhs: gl(Group::Ad4) + gl(Group::Be4) + gl(Group::Cf4) * q(2),
            rhs: sum(4, &[(d, true, 1), (b, false, 1), (c, true, 2)]),
        },
    ];

    // Bounds on the x coordinate, for images inside the tight span.
    let rows: Vec<_> = (0..6).map(|t| inst.metric.row(t)).collect();
    let assoc: Vec<Option<AssocVec>> = f.par_iter().map(|p| to_assoc(p).ok()).collect();
    let mut checked = 0;
    let mut failures = Vec::new();
    for v in 0..inst.graph.n() {
        let Some(av) = &assoc[v] else { continue };
        let name = inst.graph.name(v);
        checked += 1;
        for (dir, forward) in [(1u8, true), (2, false)] {
            let Some(u) = inst.vertex_of(&add_key(inst.keys[v], STEPS[dir as usize - 1])) else { continue };
            let Some(au) = &assoc[u] else { continue };
            let (ed, eb) = (&table[&(inst.keys[v], dir, d)], &table[&(inst.keys[v], dir, b)]);
            let lhs = if forward { &ed.0 + &eb.0 } else { &ed.1 + &eb.1 };
            if lhs < (&av.x - &au.x).abs() * q(2) {
                failures.push(format!("{name}: direction {dir} bound"));
            }
        }
        let ab = ts_distance(&rows[0], &f[v]) + ts_distance(&rows[1], &f[v]);
        if ab < q(2) + pos(&av.x) * q(2) {
            failures.push(format!("{name}: a+b bound"));
        }
        let de = ts_distance(&rows[3], &f[v]) + ts_distance(&rows[4], &f[v]);
        if de < q(2) + pos(&(q(1) - &av.x)) * q(2) {
            failures.push(format!("{name}: d+e bound"));
        }
    }
    Ok(DirectionalLosses { table, cost_checks, claim_x_checked: checked, claim_x_failures: failures })
}

/// Planar losses of one vertex; `None` where a needed neighbour is missing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlanarRow {
    pub lx: Option<Q>,
    pub ly: Option<Q>,
    pub lz1: Option<Q>,
    pub lz2: Option<Q>,
}

impl PlanarRow {
    pub fn sum(&self) -> Q {
        [&self.lx, &self.ly, &self.lz1, &self.lz2].into_iter().flatten().sum()
    }
}

#[derive(Clone, Debug)]
pub struct PlanarLosses {
    pub per_vertex: BTreeMap<Key, PlanarRow>,
    /// Row sums keyed by `(Y, Z)`, with the boundary terms folded in.
    pub rows: BTreeMap<(i64, i64), Q>,
    /// `Σ 2·p(v)[x]⁺` over `v[x] = 0`.
    pub boundary_low: Q,
    /// `Σ 2·(1 - p(v)[x])⁺` over `v[x] = 1`.
    pub boundary_high: Q,
    pub cx_checked: usize,
    pub cx_failures: Vec<String>,
    pub transfer_checked: usize,
    pub transfer_failures: Vec<String>,
    /// The aggregate bound on `vol - OPT`.
    pub cost_check: Check,
    /// The same bound with the right side summed row by row.
    pub row_check: Check,
}

impl PlanarLosses {
    pub fn row_total(&self) -> Q {
        self.rows.values().sum()
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self.rows.iter().map(|((y, z), v)| json!([y, z, fmt_q(v)])).collect();
        json!({
            "vertices": self.per_vertex.len(),
            "row_total": fmt_q(&self.row_total()),
            "rows": rows,
            "boundary_low": fmt_q(&self.boundary_low),
            "boundary_high": fmt_q(&self.boundary_high),
            "cx_checked": self.cx_checked,
            "cx_failures": self.cx_failures,
            "transfer_checked": self.transfer_checked,
            "transfer_failures": self.transfer_failures,
            "cost_check": self.cost_check.to_json(),
            "row_check": self.row_check.to_json(),
        })
    }
}

pub fn planar_losses(inst: &HardInstance, sol: &CandidateSolution) -> Result<PlanarLosses> {
    let rep = losses(inst, sol)?;
    let p: Vec<AssocVec> =
        sol.points.par_iter().map(|x| rect_project(x).and_then(|y| to_assoc(&y))).collect::<Result<_>>()?;
    let at = |k: Key| inst.vertex_of(&k).map(|v| &p[v]);
    let (w3, w4) = (STEPS[2], STEPS[3]);
    let plus = |a: &AssocVec| &a.x * q(2) + &a.y;
    let minus = |a: &AssocVec| &a.x * q(2) - &a.y;
    let mut per_vertex = BTreeMap::new();
    for (v, &k) in inst.keys.iter().enumerate() {
        let pv = &p[v];
        let row = PlanarRow {
            lx: at(add_key(k, w3)).map(|u| (&pv.y - &u.y).abs() + pos(&(plus(pv) - plus(u))) * q(2)),
            ly: at(add_key(add_key(k, w3), w4)).map(|u| (&pv.x - &u.x).abs() * q(2)),
            lz1: at(add_key(k, w4)).map(|u| (plus(pv) - plus(u)).abs()),
            lz2: at(add_key(add_key(add_key(k, w3), w3), w4)).map(|u| (minus(pv) - minus(u)).abs()),
        };
        per_vertex.insert(k, row);
    }

    let mut cx_failures = Vec::new();
    let mut cx_checked = 0;
    let mut transfer_failures = Vec::new();
    let mut transfer_checked = 0;
    for (k, row) in &per_vertex {
        let v = inst.vertex_of(k).expect("instance key");
        if let (Some(lx), Some(u)) = (&row.lx, at(add_key(*k, w3))) {
            cx_checked += 1;
            if *lx < pos(&(&p[v].x - &u.x)) * q(2) {
                cx_failures.push(inst.graph.name(v).to_string());
            }
        }
        if let Some(lz2) = &row.lz2 {
            let k3 = add_key(*k, w3);
            let k34 = add_key(k3, w4);
            let r3 = per_vertex.get(&k3);
            let r34 = per_vertex.get(&k34);
            let terms = [
                row.lx.clone(),
                r34.and_then(|r| r.lx.clone()),
                row.ly.clone(),
                r3.and_then(|r| r.ly.clone()),
                r3.and_then(|r| r.lz1.clone()),
            ];
            if terms.iter().all(Option::is_some) {
                transfer_checked += 1;
                let rhs: Q = terms.into_iter().flatten().sum();
                if *lz2 > rhs {
                    transfer_failures.push(inst.graph.name(v).to_string());
                }
            }
        }
    }

    let mut boundary_low = Q::zero();
    let mut boundary_high = Q::zero();
    let mut rows: BTreeMap<(i64, i64), Q> = BTreeMap::new();
    for (v, &k) in inst.keys.iter().enumerate() {
        let entry = rows.entry((k[1], k[2])).or_insert_with(Q::zero);
        *entry += per_vertex[&k].sum();
        if k[0] == 0 {
            let t = pos(&p[v].x);
            boundary_low += &t * q(2);
            *entry += t * q(3);
        }
        if k[0] == inst.l {
            let t = pos(&(q(1) - &p[v].x));
            boundary_high += &t * q(2);
            *entry += t * q(3);
        }
    }
    let vertex_total: Q = per_vertex.values().map(PlanarRow::sum).sum();
    let row_total: Q = rows.values().sum();
    let cost_check = Check {
        name: "planar cost".into(),
        lhs: rep.total.clone(),
        rhs: vertex_total * qr(2, 3) + &boundary_low + &boundary_high,
    };
    let row_check = Check { name: "row cost".into(), lhs: rep.total, rhs: row_total * qr(2, 3) };
    Ok(PlanarLosses {
        per_vertex,
        rows,
        boundary_low,
        boundary_high,
        cx_checked,
        cx_failures,
        transfer_checked,
        transfer_failures,
        cost_check,
        row_check,
    })
}
