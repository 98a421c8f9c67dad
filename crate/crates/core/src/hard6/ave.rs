//! The average version: near-collinear terminal distances and their exact
//! repair.

use num::{Signed, Zero};
use serde_json::{json, Value};

use super::{CandidateSolution, HardInstance, TERMINALS};
use crate::error::{Error, Result};
use crate::metric::collinear_triples;
use crate::rational::{fmt_q, q, Q};
use crate::tightspan::{ts_distance, TsPoint};

/// Terminal-to-terminal distances of a solution.
pub fn terminal_deltas(inst: &HardInstance, sol: &CandidateSolution) -> Vec<Vec<Q>> {
    let t: Vec<&TsPoint> = (0..6).map(|i| &sol.points[inst.terminal_vertex(i)]).collect();
    (0..6).map(|i| (0..6).map(|j| ts_distance(t[i], t[j])).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodReport {
    pub good: bool,
    /// Collinear triples `(t1, t2, t3)` with their slack
    /// `δ(t1,t2) + δ(t2,t3) - δ(t1,t3)`.
    pub violations: Vec<((usize, usize, usize), Q)>,
}

impl GoodReport {
    pub fn describe(&self) -> Vec<String> {
        self.violations
            .iter()
            .map(|((a, b, c), s)| format!("{}{}{} slack {}", TERMINALS[*a], TERMINALS[*b], TERMINALS[*c], s))
            .collect()
    }
}

/// A triple violates when its slack reaches `eta`; zero slack never does.
pub fn check_good(inst: &HardInstance, deltas: &[Vec<Q>], eta: &Q) -> GoodReport {
    let mut violations = Vec::new();
    for (a, b, c) in collinear_triples(&inst.metric) {
        let slack = &deltas[a][b] + &deltas[b][c] - &deltas[a][c];
        if slack >= *eta && slack.is_positive() {
            violations.push(((a, b, c), slack));
        }
    }
    GoodReport { good: violations.is_empty(), violations }
}

#[derive(Clone, Debug)]
pub struct Adjusted {
    pub solution: CandidateSolution,
    /// Repaired terminal distances before normalization.
    pub deltas: Vec<Vec<Q>>,
    /// Normalization factor restoring the demand-weighted average.
    pub kappa: Q,
    pub cost_before: Q,
    pub cost_after: Q,
    pub image_before: usize,
    pub image_after: usize,
}

impl Adjusted {
    pub fn to_json(&self) -> Value {
        json!({
            "kappa": fmt_q(&self.kappa),
            "cost_before": fmt_q(&self.cost_before),
            "cost_after": fmt_q(&self.cost_after),
            "image_before": self.image_before,
            "image_after": self.image_after,
        })
    }
}

fn vol(inst: &HardInstance, pts: &[TsPoint]) -> Q {
    inst.graph.edges.iter().map(|e| &e.capacity * ts_distance(&pts[e.u], &pts[e.v])).sum()
}

/// Repairs a good solution so that every collinear triple is exact.
///
/// Terminals become singleton clusters at the rows of the repaired metric,
/// every other vertex moves to `x̄_t = ‖x - t̄‖∞`, and all distances are
/// scaled so the demand-weighted terminal average is unchanged.
pub fn adjust_solution(inst: &HardInstance, sol: &CandidateSolution, deltas: &[Vec<Q>], eta: &Q) -> Result<Adjusted> {
    let ave = inst.ave.as_ref().ok_or_else(|| Error::Precondition("adjustment needs the average version".into()))?;
    if sol.points.len() != inst.graph.n() {
        return Err(Error::Structural("solution does not cover every vertex".into()));
    }
    if terminal_deltas(inst, sol) != deltas {
        return Err(Error::Precondition("deltas disagree with the solution's terminal distances".into()));
    }
    let report = check_good(inst, deltas, eta);
    if !report.good {
        return Err(Error::Precondition(format!("solution is not good: {}", report.describe().join(", "))));
    }
    let (a, b, c, d, e, f) = (0, 1, 2, 3, 4, 5);
    let ca = &deltas[b][c] - eta * q(3);
    let cb = &deltas[a][e] - eta * q(3);
    let mut nd = vec![vec![Q::zero(); 6]; 6];
    let mut put = |pairs: &[(usize, usize)], v: Q| {
        for &(s, t) in pairs {
            nd[s][t] = v.clone();
            nd[t][s] = v.clone();
        }
    };
    put(&[(a, c), (b, c), (d, f), (e, f)], ca.clone());
    put(&[(a, e)], cb.clone());
    put(&[(a, b), (d, e)], &ca * q(2));
    put(&[(a, f), (b, f), (c, d), (c, e)], &ca + &cb);
    put(&[(a, d), (b, e), (c, f), (b, d)], &ca * q(2) + &cb);
    if nd.iter().flatten().any(|v| v.is_negative()) {
        return Err(Error::Precondition("repaired terminal distances would be negative".into()));
    }

    let tv: Vec<usize> = (0..6).map(|t| inst.terminal_vertex(t)).collect();
    let mut pts: Vec<TsPoint> = Vec::with_capacity(sol.points.len());
    for (v, p) in sol.points.iter().enumerate() {
        if let Some(t) = tv.iter().position(|&w| w == v) {
            pts.push(nd[t].clone());
            continue;
        }
        let x: Vec<Q> = tv.iter().map(|&w| ts_distance(p, &sol.points[w])).collect();
        pts.push((0..6).map(|t| crate::rational::linf(&x, &nd[t])).collect());
    }

    let mut before = Q::zero();
    let mut after = Q::zero();
    for (s, t, w) in ave.demand.pairs() {
        let (i, j) = (inst.metric.index(s).expect("terminal"), inst.metric.index(t).expect("terminal"));
        before += w * &deltas[i][j];
        after += w * &nd[i][j];
    }
    if !after.is_positive() {
        return Err(Error::Precondition("repaired demand-weighted average is zero".into()));
    }
    let kappa = before / after;
    for p in pts.iter_mut() {
        for c in p.iter_mut() {
            *c *= &kappa;
        }
    }
    let solution = CandidateSolution { points: pts };
    Ok(Adjusted {
        cost_before: vol(inst, &sol.points),
        cost_after: vol(inst, &solution.points),
        image_before: sol.image_size(),
        image_after: solution.image_size(),
        deltas: nd,
        kappa,
        solution,
    })
}
