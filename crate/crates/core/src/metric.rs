//! Exact finite metrics on named terminals.

use std::collections::HashMap;
use std::fmt;

use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{parse_rational, Q};

/// A distance vector: one coordinate per terminal, in the owning metric's
/// terminal order.
pub type DistanceVector = Vec<Q>;

/// Exact distance matrix on an ordered list of distinct terminal names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalMetric {
    names: Vec<String>,
    dist: Vec<Vec<Q>>,
}

/// One reason a matrix fails to be a metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NonzeroDiagonal(String),
    Asymmetric(String, String),
    Negative(String, String),
    NonPositive(String, String),
    /// `D(ends.0, ends.1) > D(ends.0, via) + D(via, ends.1)`.
    Triangle {
        ends: (String, String),
        via: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal(t) => write!(f, "nonzero diagonal at {t}"),
            Violation::Asymmetric(a, b) => write!(f, "asymmetric pair ({a},{b})"),
            Violation::Negative(a, b) => write!(f, "negative distance ({a},{b})"),
            Violation::NonPositive(a, b) => write!(f, "zero distance between distinct terminals ({a},{b})"),
            Violation::Triangle { ends, via } => {
                write!(f, "triangle inequality fails for ({},{}) via {}", ends.0, ends.1, via)
            }
        }
    }
}

impl TerminalMetric {
    /// Builds a metric from names and a full matrix. Only the shape and name
    /// distinctness are checked here; use [`validate_metric`] for the axioms.
    pub fn new(names: Vec<String>, dist: Vec<Vec<Q>>) -> Result<Self> {
        let k = names.len();
        if dist.len() != k || dist.iter().any(|row| row.len() != k) {
            return Err(Error::Structural(format!("distance matrix must be {k}x{k}")));
        }
        let mut seen = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if seen.insert(n.clone(), i).is_some() {
                return Err(Error::Structural(format!("duplicate terminal name {n}")));
            }
        }
        Ok(Self { names, dist })
    }

    /// Builds a metric from unordered pair values; every pair must be given.
    pub fn from_pairs(names: &[&str], pairs: &[(&str, &str, Q)]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let k = names.len();
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut dist = vec![vec![None; k]; k];
        for (a, b, d) in pairs {
            let i = *index.get(a).ok_or_else(|| Error::Structural(format!("unknown terminal {a}")))?;
            let j = *index.get(b).ok_or_else(|| Error::Structural(format!("unknown terminal {b}")))?;
            dist[i][j] = Some(d.clone());
            dist[j][i] = Some(d.clone());
        }
        let mut out = vec![vec![Q::zero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                out[i][j] = dist[i][j]
                    .clone()
                    .ok_or_else(|| Error::Structural(format!("missing distance ({},{})", names[i], names[j])))?;
            }
        }
        Self::new(names, out)
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn d(&self, i: usize, j: usize) -> &Q {
        &self.dist[i][j]
    }

    /// Distance by terminal names. Panics on unknown names.
    pub fn by_name(&self, a: &str, b: &str) -> &Q {
        let i = self.index(a).expect("known terminal");
        let j = self.index(b).expect("known terminal");
        &self.dist[i][j]
    }

    pub fn matrix(&self) -> &[Vec<Q>] {
        &self.dist
    }

    /// Row of terminal `i`, i.e. the terminal's own distance vector.
    pub fn row(&self, i: usize) -> DistanceVector {
        self.dist[i].clone()
    }

    /// Orders named coordinates along the terminal list.
    pub fn vector_from_named(&self, coords: &[(&str, Q)]) -> Result<DistanceVector> {
        let mut out: Vec<Option<Q>> = vec![None; self.k()];
        for (n, v) in coords {
            let i = self.index(n).ok_or_else(|| Error::Structural(format!("unknown terminal {n}")))?;
            out[i] = Some(v.clone());
        }
        out.into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Structural(format!("missing coordinate {}", self.names[i]))))
            .collect()
    }

    /// Multiplies every distance by `s`.
    pub fn scaled(&self, s: &Q) -> Self {
        let dist = self.dist.iter().map(|r| r.iter().map(|d| d * s).collect()).collect();
        Self { names: self.names.clone(), dist }
    }
}

/// Lists every violated metric axiom; empty means valid.
pub fn validate_metric(m: &TerminalMetric) -> Vec<Violation> {
    let k = m.k();
    let n = |i: usize| m.names[i].clone();
    let mut out = Vec::new();
    for i in 0..k {
        if !m.dist[i][i].is_zero() {
            out.push(Violation::NonzeroDiagonal(n(i)));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if m.dist[i][j] != m.dist[j][i] {
                out.push(Violation::Asymmetric(n(i), n(j)));
            }
            if m.dist[i][j].is_negative() {
                out.push(Violation::Negative(n(i), n(j)));
            } else if m.dist[i][j].is_zero() {
                out.push(Violation::NonPositive(n(i), n(j)));
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            for v in 0..k {
                if v == i || v == j {
                    continue;
                }
                if m.dist[i][j] > &m.dist[i][v] + &m.dist[v][j] {
                    out.push(Violation::Triangle { ends: (n(i), n(j)), via: n(v) });
                }
            }
        }
    }
    out
}

/// True iff `x_t + x_t' >= D(t,t')` for every pair of distinct terminals and
/// every coordinate is nonnegative.
pub fn is_valid_vector(m: &TerminalMetric, x: &[Q]) -> Result<bool> {
    if x.len() != m.k() {
        return Err(Error::Structural(format!("vector has {} coordinates, metric has {}", x.len(), m.k())));
    }
    for i in 0..m.k() {
        if x[i].is_negative() {
            return Ok(false);
        }
        for j in i + 1..m.k() {
            if &x[i] + &x[j] < m.dist[i][j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Submetric on the named subset, in the order given.
pub fn restrict(m: &TerminalMetric, subset: &[&str]) -> Result<TerminalMetric> {
    if subset.is_empty() {
        return Err(Error::Precondition("subset must be nonempty".into()));
    }
    let idx: Vec<usize> = subset
        .iter()
        .map(|n| m.index(n).ok_or_else(|| Error::Structural(format!("unknown terminal {n}"))))
        .collect::<Result<_>>()?;
    let names = idx.iter().map(|&i| m.names[i].clone()).collect();
    let dist = idx.iter().map(|&i| idx.iter().map(|&j| m.dist[i][j].clone()).collect()).collect();
    TerminalMetric::new(names, dist)
}

/// Triples `(t, t', t'')` of distinct terminals with
/// `D(t,t'') = D(t,t') + D(t',t'')`, listed once per reversal class with
/// `t < t''` in terminal order.
pub fn collinear_triples(m: &TerminalMetric) -> Vec<(usize, usize, usize)> {
    let k = m.k();
    let mut out = Vec::new();
    for i in 0..k {
        for l in i + 1..k {
            for j in 0..k {
                if j == i || j == l {
                    continue;
                }
                if m.dist[i][l] == &m.dist[i][j] + &m.dist[j][l] {
                    out.push((i, j, l));
                }
            }
        }
    }
    out
}

/// Parses `dist <t1> <t2> <rational>` lines. Terminals are ordered by first
/// appearance; blank lines and `#` comments are ignored.
pub fn parse_metric(text: &str) -> Result<TerminalMetric> {
    let mut names: Vec<String> = Vec::new();
    let mut entries: HashMap<(usize, usize), (Q, usize)> = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "dist" {
            return Err(Error::Parse { line, msg: format!("expected `dist <t1> <t2> <rational>`, got `{body}`") });
        }
        let d = parse_rational(tok[3])
            .ok_or_else(|| Error::Parse { line, msg: format!("malformed rational `{}`", tok[3]) })?;
        if tok[1] == tok[2] {
            return Err(Error::Parse { line, msg: format!("self distance for {}", tok[1]) });
        }
        let mut id = |n: &str| match names.iter().position(|x| x == n) {
            Some(i) => i,
            None => {
                names.push(n.to_string());
                names.len() - 1
            }
        };
        let (a, b) = (id(tok[1]), id(tok[2]));
        let key = (a.min(b), a.max(b));
        if let Some((prev, _)) = entries.get(&key) {
            if *prev != d {
                return Err(Error::Parse { line, msg: format!("conflicting distance for ({},{})", tok[1], tok[2]) });
            }
        }
        entries.insert(key, (d, line));
    }
    let k = names.len();
    let mut dist = vec![vec![Q::zero(); k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let (d, _) = entries
                .get(&(i, j))
                .ok_or_else(|| Error::Input(format!("unspecified pair ({},{})", names[i], names[j])))?;
            dist[i][j] = d.clone();
            dist[j][i] = d.clone();
        }
    }
    TerminalMetric::new(names, dist)
}

/// Renders the metric in the `dist` line format.
pub fn format_metric(m: &TerminalMetric) -> String {
    let mut s = String::new();
    for i in 0..m.k() {
        for j in i + 1..m.k() {
            s.push_str(&format!("dist {} {} {}\n", m.names[i], m.names[j], m.dist[i][j]));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn m3() -> TerminalMetric {
        TerminalMetric::from_pairs(&["a", "b", "c"], &[("a", "b", q(7)), ("a", "c", q(5)), ("b", "c", q(8))]).unwrap()
    }

    #[test]
    fn star_metric_is_valid() {
        assert!(validate_metric(&m3()).is_empty());
    }

    #[test]
    fn reports_single_triangle_violation() {
        let m = TerminalMetric::from_pairs(&["a", "b", "c"], &[("a", "b", q(1)), ("a", "c", q(1)), ("b", "c", q(3))])
            .unwrap();
        let v = validate_metric(&m);
        assert_eq!(v, vec![Violation::Triangle { ends: ("b".into(), "c".into()), via: "a".into() }]);
    }

    #[test]
    fn reports_zero_distance() {
        let m = TerminalMetric::from_pairs(&["a", "b"], &[("a", "b", q(0))]).unwrap();
        assert_eq!(validate_metric(&m), vec![Violation::NonPositive("a".into(), "b".into())]);
    }

    #[test]
    fn shape_mismatch_is_structural() {
        let e = TerminalMetric::new(vec!["a".into(), "b".into()], vec![vec![q(0)]]);
        assert!(matches!(e, Err(Error::Structural(_))));
    }

    #[test]
    fn valid_vectors() {
        let m = m3();
        assert!(is_valid_vector(&m, &[q(3), q(6), q(4)]).unwrap());
        assert!(is_valid_vector(&m, &m.row(0)).unwrap());
        assert!(!is_valid_vector(&m, &[q(0), q(0), q(0)]).unwrap());
        assert!(is_valid_vector(&m, &[q(1)]).is_err());
    }

    #[test]
    fn restriction_forms() {
        let m = m3();
        assert_eq!(restrict(&m, &["a", "b", "c"]).unwrap(), m);
        let one = restrict(&m, &["b"]).unwrap();
        assert_eq!(one.k(), 1);
        assert!(one.d(0, 0).is_zero());
        assert!(restrict(&m, &["z"]).is_err());
    }

    #[test]
    fn line_metric_has_one_triple() {
        let m = TerminalMetric::from_pairs(&["a", "b", "c"], &[("a", "b", q(1)), ("b", "c", q(1)), ("a", "c", q(2))])
            .unwrap();
        assert_eq!(collinear_triples(&m), vec![(0, 1, 2)]);
    }

    #[test]
    fn parse_round_trip() {
        let m = m3();
        assert_eq!(parse_metric(&format_metric(&m)).unwrap(), m);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_metric("dist a b 1\ndist a c x/2\n").unwrap_err();
        assert_eq!(e, Error::Parse { line: 2, msg: "malformed rational `x/2`".into() });
        assert!(matches!(parse_metric("dist a b 1\ndist a c 1\n"), Err(Error::Input(_))));
    }
}
