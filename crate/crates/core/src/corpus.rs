//! Generators for the reversed-fluted reduction corpora: Diophantine systems
//! encoded as sentences (with the matching models), the grid axioms and
//! finite truncations of the ordered grid expansion.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::modeltools::Structure;
use crate::syntax::{parse_formula_infer, CountSpec, Formula, Signature};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: cannot read `{text}` as `u = 1`, `u + v = w` or `u * v = w`")]
    Malformed { line: usize, text: String },
    #[error("equation `{0}` repeats a variable")]
    NotSimple(String),
    #[error("no value given for variable `{0}`")]
    MissingValue(String),
    #[error("the assignment violates `{0}`")]
    Unsatisfied(String),
}

/// One equation of a simple system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiophEq {
    One(String),
    Sum(String, String, String),
    Product(String, String, String),
}

impl DiophEq {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            DiophEq::One(u) => vec![u],
            DiophEq::Sum(u, v, w) | DiophEq::Product(u, v, w) => vec![u, v, w],
        }
    }

    fn is_simple(&self) -> bool {
        let vs = self.variables();
        vs.iter().enumerate().all(|(i, a)| vs[i + 1..].iter().all(|b| a != b))
    }

    pub fn holds(&self, sol: &BTreeMap<String, u64>) -> Result<bool, CorpusError> {
        let val = |v: &String| sol.get(v).copied().ok_or_else(|| CorpusError::MissingValue(v.clone()));
        Ok(match self {
            DiophEq::One(u) => val(u)? == 1,
            DiophEq::Sum(u, v, w) => val(u)?.checked_add(val(v)?) == Some(val(w)?),
            DiophEq::Product(u, v, w) => val(u)?.checked_mul(val(v)?) == Some(val(w)?),
        })
    }
}

impl fmt::Display for DiophEq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiophEq::One(u) => write!(f, "{u} = 1"),
            DiophEq::Sum(u, v, w) => write!(f, "{u} + {v} = {w}"),
            DiophEq::Product(u, v, w) => write!(f, "{u} * {v} = {w}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiophSystem {
    pub equations: Vec<DiophEq>,
}

impl DiophSystem {
    pub fn new(equations: Vec<DiophEq>) -> Result<Self, CorpusError> {
        if let Some(e) = equations.iter().find(|e| !e.is_simple()) {
            return Err(CorpusError::NotSimple(e.to_string()));
        }
        Ok(DiophSystem { equations })
    }

    /// One equation per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut eqs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || CorpusError::Malformed { line: i + 1, text: raw.to_string() };
            let (lhs, rhs) = line.split_once('=').ok_or_else(bad)?;
            let rhs = rhs.trim();
            let name = |s: &str| {
                let s = s.trim();
                let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                ok.then(|| s.to_string())
            };
            let eq = if rhs == "1" {
                DiophEq::One(name(lhs).ok_or_else(bad)?)
            } else if let Some((u, v)) = lhs.split_once('+') {
                DiophEq::Sum(name(u).ok_or_else(bad)?, name(v).ok_or_else(bad)?, name(rhs).ok_or_else(bad)?)
            } else if let Some((u, v)) = lhs.split_once('*') {
                DiophEq::Product(name(u).ok_or_else(bad)?, name(v).ok_or_else(bad)?, name(rhs).ok_or_else(bad)?)
            } else {
                return Err(bad());
            };
            eqs.push(eq);
        }
        DiophSystem::new(eqs)
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.equations {
            for v in e.variables() {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn check(&self, sol: &BTreeMap<String, u64>) -> Result<(), CorpusError> {
        for e in &self.equations {
            if !e.holds(sol)? {
                return Err(CorpusError::Unsatisfied(e.to_string()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DiophSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.equations {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

pub fn block_name(var: &str) -> String {
    format!("A_{var}")
}

pub fn sum_relation(index: usize) -> String {
    format!("R_{index}")
}

pub fn product_relation(index: usize) -> String {
    format!("P_{index}")
}

/// The sentence that is finitely satisfiable exactly when the system has a
/// solution over the naturals; `A_u` holds the elements counted by `u`.
pub fn encode_hilbert(sys: &DiophSystem) -> Formula {
    let a = |v: &str, x: &str| Formula::atom(&block_name(v), &[x]);
    let one = CountSpec::exactly(1);
    let mut parts = Vec::new();
    for (i, e) in sys.equations.iter().enumerate() {
        match e {
            DiophEq::One(u) => parts.push(Formula::exists(one, "x", a(u, "x"))),
            DiophEq::Sum(u, v, w) => {
                let r = sum_relation(i);
                let left = || Formula::or(vec![a(u, "x"), a(v, "x")]);
                parts.push(Formula::forall(
                    "x",
                    Formula::implies(
                        left(),
                        Formula::exists(one, "y", Formula::and(vec![a(w, "y"), Formula::atom(&r, &["x", "y"])])),
                    ),
                ));
                parts.push(Formula::forall(
                    "y",
                    Formula::implies(
                        a(w, "y"),
                        Formula::exists(one, "x", Formula::and(vec![left(), Formula::atom(&r, &["x", "y"])])),
                    ),
                ));
            }
            DiophEq::Product(u, v, w) => {
                let p = product_relation(i);
                let pxyz = || Formula::atom(&p, &["x", "y", "z"]);
                parts.push(Formula::forall(
                    "x",
                    Formula::implies(
                        a(u, "x"),
                        Formula::forall(
                            "y",
                            Formula::implies(
                                a(v, "y"),
                                Formula::exists(one, "z", Formula::and(vec![a(w, "z"), pxyz()])),
                            ),
                        ),
                    ),
                ));
                parts.push(Formula::forall(
                    "z",
                    Formula::implies(
                        a(w, "z"),
                        Formula::exists(
                            one,
                            "y",
                            Formula::and(vec![
                                a(v, "y"),
                                Formula::exists(CountSpec::some(), "x", Formula::and(vec![a(u, "x"), pxyz()])),
                            ]),
                        ),
                    ),
                ));
                parts.push(Formula::forall(
                    "z",
                    Formula::implies(
                        a(w, "z"),
                        Formula::exists(
                            CountSpec::some(),
                            "y",
                            Formula::and(vec![a(v, "y"), Formula::exists(one, "x", Formula::and(vec![a(u, "x"), pxyz()]))]),
                        ),
                    ),
                ));
            }
        }
    }
    let vars = sys.variables();
    for (i, u) in vars.iter().enumerate() {
        for v in &vars[i + 1..] {
            parts.push(Formula::forall("x", Formula::or(vec![Formula::not(a(u, "x")), Formula::not(a(v, "x"))])));
        }
    }
    Formula::and(parts)
}

/// The signature of [`encode_hilbert`]'s output.
pub fn hilbert_signature(sys: &DiophSystem) -> Signature {
    let mut sig = Signature::new();
    for v in sys.variables() {
        sig.declare(&block_name(&v), 1).expect("distinct names");
    }
    for (i, e) in sys.equations.iter().enumerate() {
        match e {
            DiophEq::One(_) => {}
            DiophEq::Sum(..) => sig.declare(&sum_relation(i), 2).expect("distinct names"),
            DiophEq::Product(..) => sig.declare(&product_relation(i), 3).expect("distinct names"),
        }
    }
    sig
}

/// Disjoint blocks `A_u` of `sol[u]` elements, bijections for sums and the
/// grid indexing for products. An all-zero solution gets one extra element
/// outside every block, since domains are nonempty.
pub fn hilbert_model(sys: &DiophSystem, sol: &BTreeMap<String, u64>) -> Result<Structure, CorpusError> {
    sys.check(sol)?;
    let vars = sys.variables();
    let mut blocks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut next = 0;
    for v in &vars {
        let k = sol[v] as usize;
        blocks.insert(v, (next..next + k).collect());
        next += k;
    }
    let mut m = Structure::new(next.max(1), &hilbert_signature(sys));
    for (v, elems) in &blocks {
        for &e in elems {
            m.set(&block_name(v), &[e], true);
        }
    }
    for (i, e) in sys.equations.iter().enumerate() {
        match e {
            DiophEq::One(_) => {}
            DiophEq::Sum(u, v, w) => {
                let left = blocks[u.as_str()].iter().chain(&blocks[v.as_str()]);
                for (&a, &b) in left.zip(&blocks[w.as_str()]) {
                    m.set(&sum_relation(i), &[a, b], true);
                }
            }
            DiophEq::Product(u, v, w) => {
                let (us, vs, ws) = (&blocks[u.as_str()], &blocks[v.as_str()], &blocks[w.as_str()]);
                for (i_u, &a) in us.iter().enumerate() {
                    for (j_v, &b) in vs.iter().enumerate() {
                        m.set(&product_relation(i), &[a, b, ws[i_u * vs.len() + j_v]], true);
                    }
                }
            }
        }
    }
    Ok(m)
}

const GRID_AXIOMS: [&str; 13] = [
    "exists[=1] x (O(x)) & forall x (O(x) -> !G(x))",
    "forall x (O(x) -> forall y (!E_H(y, x) & !E_V(y, x)))",
    "exists[=1] x (G(x) & forall y (!E_H(x, y) & !E_V(x, y)))",
    "forall x (G(x) -> (exists[=1] y (H(x, y) & G(y)) & exists[=1] y (V(x, y) & G(y))))",
    "forall x (forall y (forall z (((E_H(y, x) | O(x)) & H(y, z)) -> exists[=1] w (E_H(z, w) & S_H(x, y, z, w))))) \
     & forall x (forall y (forall z (((E_V(y, x) | O(x)) & V(y, z)) -> exists[=1] w (E_V(z, w) & S_V(x, y, z, w)))))",
    "forall w (forall z (forall y ((E_H(z, w) & H(y, z)) -> exists[=1] x ((E_H(y, x) | O(x)) & S_H(x, y, z, w))))) \
     & forall w (forall z (forall y ((E_V(z, w) & V(y, z)) -> exists[=1] x ((E_V(y, x) | O(x)) & S_V(x, y, z, w)))))",
    "forall x (forall y (H(x, y) -> (leq_V(x, y) & leq_V(y, x)))) \
     & forall x (forall y (V(x, y) -> (leq_H(x, y) & leq_H(y, x))))",
    "forall x (forall y ((G(x) & G(y)) -> (leq_H(x, y) | leq_H(y, x)))) \
     & forall x (forall y ((G(x) & G(y)) -> (leq_V(x, y) | leq_V(y, x))))",
    "forall x (forall y (forall z ((leq_H(y, z) & E_H(y, x)) -> exists[=1] w (E_H(z, w) & R_H(x, y, z, w))))) \
     & forall x (forall y (forall z ((leq_V(y, z) & E_V(y, x)) -> exists[=1] w (E_V(z, w) & R_V(x, y, z, w)))))",
    "forall w (forall z (forall y ((leq_H(y, z) & E_H(z, w)) -> exists[<=1] x (E_H(y, x) & R_H(x, y, z, w))))) \
     & forall w (forall z (forall y ((leq_V(y, z) & E_V(z, w)) -> exists[<=1] x (E_V(y, x) & R_V(x, y, z, w)))))",
    "forall w (forall z (forall y (C_H(w, z, y) <-> exists[=1] x (E_H(y, x) & R_H(x, y, z, w))))) \
     & forall w (forall z (forall y (C_V(w, z, y) <-> exists[=1] x (E_V(y, x) & R_V(x, y, z, w)))))",
    "forall y (forall z ((G(y) & G(z) & forall w (E_H(z, w) -> C_H(w, z, y))) -> leq_H(z, y))) \
     & forall y (forall z ((G(y) & G(z) & forall w (E_V(z, w) -> C_V(w, z, y))) -> leq_V(z, y)))",
    "forall y (G(y) -> exists[=1] z (leq_H(y, z) & leq_H(z, y) & leq_V(y, z) & leq_V(z, y)))",
];

const GRID_CHI: &str = "forall x (exists[0+1] y (E_H(x, y))) & forall x (exists[0+1] y (E_V(x, y)))";

/// Grid axiom `i` (1-based, `1..=13`).
pub fn grid_axiom(i: usize) -> Formula {
    assert!((1..=13).contains(&i), "grid axioms are numbered 1 to 13");
    parse_formula_infer(GRID_AXIOMS[i - 1]).expect("grid axiom text parses").0
}

/// The sentence excluding transfinite degrees.
pub fn grid_chi() -> Formula {
    parse_formula_infer(GRID_CHI).expect("chi text parses").0
}

/// The conjunction of the thirteen grid axioms, followed by the degree
/// finiteness sentence when `with_chi`.
pub fn encode_grid_axioms(with_chi: bool) -> Formula {
    let mut parts: Vec<Formula> = (1..=13).map(grid_axiom).collect();
    if with_chi {
        parts.push(grid_chi());
    }
    Formula::And(parts)
}

pub fn grid_signature() -> Signature {
    Signature::from_pairs([
        ("G", 1),
        ("O", 1),
        ("H", 2),
        ("V", 2),
        ("E_H", 2),
        ("E_V", 2),
        ("leq_H", 2),
        ("leq_V", 2),
        ("C_H", 3),
        ("C_V", 3),
        ("R_H", 4),
        ("R_V", 4),
        ("S_H", 4),
        ("S_V", 4),
    ])
    .expect("distinct names")
}

/// Layout of [`truncated_grid_expansion`]: cell `(i, j)` is element
/// `i * n + j` and counter `k` is element `n * n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridTruncation {
    pub side: usize,
}

impl GridTruncation {
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.side + j
    }

    pub fn counter(&self, k: usize) -> usize {
        self.side * self.side + k
    }

    pub fn domain_size(&self) -> usize {
        self.side * self.side + self.side
    }
}

/// The graphed, mapped and ordered expansion of the grid restricted to cells
/// `[0, n)^2` and counters `0..n`. `H` steps the first coordinate (the one
/// `E_H` counts) and `V` the second.
pub fn truncated_grid_expansion(n: usize) -> Structure {
    assert!(n >= 1, "grid side must be positive");
    let g = GridTruncation { side: n };
    let mut m = Structure::new(g.domain_size(), &grid_signature());
    m.set("O", &[g.counter(0)], true);
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    for &(i, j) in &cells {
        let c = g.cell(i, j);
        m.set("G", &[c], true);
        if i + 1 < n {
            m.set("H", &[c, g.cell(i + 1, j)], true);
        }
        if j + 1 < n {
            m.set("V", &[c, g.cell(i, j + 1)], true);
        }
        for k in 1..=i {
            m.set("E_H", &[c, g.counter(k)], true);
        }
        for k in 1..=j {
            m.set("E_V", &[c, g.counter(k)], true);
        }
    }
    // Per direction: the coordinate counted by the degree, and the names.
    let dirs: [(fn(usize, usize) -> usize, &str, &str, &str, &str); 2] =
        [(|i, _| i, "R_H", "S_H", "C_H", "leq_H"), (|_, j| j, "R_V", "S_V", "C_V", "leq_V")];
    for (coord, r, s, c_rel, leq) in dirs {
        for &(i, j) in &cells {
            let a = g.cell(i, j);
            let da = coord(i, j);
            for &(i2, j2) in &cells {
                let b = g.cell(i2, j2);
                let db = coord(i2, j2);
                if da <= db {
                    m.set(leq, &[a, b], true);
                    for k in 1..=da {
                        m.set(r, &[g.counter(k), a, b, g.counter(k)], true);
                        m.set(c_rel, &[g.counter(k), b, a], true);
                    }
                }
                if db == da + 1 {
                    for k in 1..=da + 1 {
                        m.set(s, &[g.counter(k - 1), a, b, g.counter(k)], true);
                    }
                }
            }
        }
    }
    m
}

/// Number of `pred`-successors of `elem`.
pub fn out_degree(m: &Structure, pred: &str, elem: usize) -> usize {
    m.tuples(pred).iter().filter(|t| t[0] == elem).count()
}
