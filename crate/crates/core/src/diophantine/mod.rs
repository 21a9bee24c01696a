//! Systems of disjunctive linear comparisons over the naturals, optionally
//! extended with the infinite cardinal, and a feasibility solver for them.

mod ilp;
pub mod lp;
mod solver;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ext::ExtNat;
use crate::ResourceCap;

pub use ilp::solve_ilp;

pub type Var = usize;

/// `sum coef * var + constant`, with coefficients and constant in the extended naturals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LinExpr {
    terms: Vec<(Var, ExtNat)>,
    constant: ExtNat,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<ExtNat>) -> Self {
        LinExpr { terms: Vec::new(), constant: c.into() }
    }

    pub fn var(v: Var) -> Self {
        LinExpr { terms: vec![(v, ExtNat::ONE)], constant: ExtNat::ZERO }
    }

    pub fn sum(vars: impl IntoIterator<Item = Var>) -> Self {
        let mut e = LinExpr::zero();
        for v in vars {
            e.add_term(v, ExtNat::ONE);
        }
        e
    }

    pub fn add_term(&mut self, v: Var, coef: impl Into<ExtNat>) {
        let coef = coef.into();
        if coef.is_zero() {
            return;
        }
        match self.terms.binary_search_by_key(&v, |t| t.0) {
            Ok(i) => self.terms[i].1 = self.terms[i].1 + coef,
            Err(i) => self.terms.insert(i, (v, coef)),
        }
    }

    pub fn with_term(mut self, v: Var, coef: impl Into<ExtNat>) -> Self {
        self.add_term(v, coef);
        self
    }

    pub fn plus(mut self, c: impl Into<ExtNat>) -> Self {
        self.constant = self.constant + c.into();
        self
    }

    /// Terms sorted by variable, with nonzero coefficients.
    pub fn terms(&self) -> &[(Var, ExtNat)] {
        &self.terms
    }

    pub fn constant_term(&self) -> ExtNat {
        self.constant
    }

    pub fn eval(&self, a: &Assignment) -> ExtNat {
        self.terms.iter().map(|&(v, c)| c * a.get(v)).sum::<ExtNat>() + self.constant
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Cmp {
    pub fn holds(self, a: ExtNat, b: ExtNat) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Le => a <= b,
            Cmp::Lt => a < b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub lhs: LinExpr,
    pub op: Cmp,
    pub rhs: LinExpr,
}

impl Comparison {
    pub fn new(lhs: LinExpr, op: Cmp, rhs: LinExpr) -> Self {
        Comparison { lhs, op, rhs }
    }

    pub fn eval(&self, a: &Assignment) -> bool {
        self.op.holds(self.lhs.eval(a), self.rhs.eval(a))
    }
}

/// A nonempty disjunction of comparisons.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause(pub Vec<Comparison>);

impl Clause {
    pub fn unit(c: Comparison) -> Self {
        Clause(vec![c])
    }
}

/// Disjunctive semantics: true iff some comparison holds.
pub fn eval_constraint(c: &Clause, a: &Assignment) -> bool {
    c.0.iter().any(|cmp| cmp.eval(a))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct System {
    names: Vec<String>,
    finite_only: Vec<bool>,
    index: BTreeMap<String, Var>,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("empty clause")]
    EmptyClause,
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl System {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable; panics if the name is taken.
    pub fn add_var(&mut self, name: impl Into<String>, finite_only: bool) -> Var {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate variable {name}");
        let v = self.names.len();
        self.index.insert(name.clone(), v);
        self.names.push(name);
        self.finite_only.push(finite_only);
        v
    }

    pub fn add_clause(&mut self, c: Clause) {
        assert!(!c.0.is_empty(), "empty clause");
        self.clauses.push(c);
    }

    pub fn add(&mut self, c: Comparison) {
        self.add_clause(Clause::unit(c));
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v]
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.index.get(name).copied()
    }

    pub fn is_finite_only(&self, v: Var) -> bool {
        self.finite_only[v]
    }

    /// Whether `a` respects the finiteness flags and satisfies every clause.
    pub fn check(&self, a: &Assignment) -> bool {
        a.values.len() == self.num_vars()
            && (0..self.num_vars()).all(|v| !self.finite_only[v] || a.get(v).is_finite())
            && self.clauses.iter().all(|c| eval_constraint(c, a))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let expr = |e: &LinExpr| ExprJson {
            terms: e.terms.iter().map(|&(v, c)| (self.names[v].clone(), c)).collect(),
            constant: e.constant,
        };
        let doc = SystemJson {
            variables: (0..self.num_vars())
                .map(|v| VarJson { name: self.names[v].clone(), finite_only: self.finite_only[v] })
                .collect(),
            clauses: self
                .clauses
                .iter()
                .map(|c| {
                    c.0.iter().map(|cmp| CmpJson { lhs: expr(&cmp.lhs), op: cmp.op, rhs: expr(&cmp.rhs) }).collect()
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("system serialises")
    }

    pub fn from_json(text: &str) -> Result<System, SystemError> {
        let doc: SystemJson = serde_json::from_str(text)?;
        let mut sys = System::new();
        for v in &doc.variables {
            if sys.index.contains_key(&v.name) {
                return Err(SystemError::DuplicateVariable(v.name.clone()));
            }
            sys.add_var(v.name.clone(), v.finite_only);
        }
        let expr = |sys: &System, e: &ExprJson| -> Result<LinExpr, SystemError> {
            let mut out = LinExpr::constant(e.constant);
            for (n, c) in &e.terms {
                let v = sys.var(n).ok_or_else(|| SystemError::UnknownVariable(n.clone()))?;
                out.add_term(v, *c);
            }
            Ok(out)
        };
        for c in &doc.clauses {
            if c.is_empty() {
                return Err(SystemError::EmptyClause);
            }
            let cmps = c
                .iter()
                .map(|cmp| Ok(Comparison::new(expr(&sys, &cmp.lhs)?, cmp.op, expr(&sys, &cmp.rhs)?)))
                .collect::<Result<Vec<_>, SystemError>>()?;
            sys.add_clause(Clause(cmps));
        }
        Ok(sys)
    }

    pub fn assignment_json(&self, a: &Assignment) -> BTreeMap<String, ExtNat> {
        (0..self.num_vars()).map(|v| (self.names[v].clone(), a.get(v))).collect()
    }

    pub fn assignment_from_json(&self, map: &BTreeMap<String, ExtNat>) -> Result<Assignment, SystemError> {
        let mut a = Assignment::zeros(self.num_vars());
        for (n, val) in map {
            let v = self.var(n).ok_or_else(|| SystemError::UnknownVariable(n.clone()))?;
            a.set(v, *val);
        }
        Ok(a)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let expr = |e: &LinExpr| {
            let mut parts: Vec<String> = e
                .terms
                .iter()
                .map(|&(v, c)| if c == ExtNat::ONE { self.names[v].clone() } else { format!("{c}*{}", self.names[v]) })
                .collect();
            if !e.constant.is_zero() || parts.is_empty() {
                parts.push(e.constant.to_string());
            }
            parts.join(" + ")
        };
        for c in &self.clauses {
            let d: Vec<String> =
                c.0.iter().map(|cmp| format!("{} {} {}", expr(&cmp.lhs), cmp.op.symbol(), expr(&cmp.rhs))).collect();
            writeln!(f, "{}", d.join(" | "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct VarJson {
    name: String,
    #[serde(default)]
    finite_only: bool,
}

#[derive(Serialize, Deserialize)]
struct ExprJson {
    #[serde(default)]
    terms: BTreeMap<String, ExtNat>,
    #[serde(default)]
    constant: ExtNat,
}

#[derive(Serialize, Deserialize)]
struct CmpJson {
    lhs: ExprJson,
    op: Cmp,
    rhs: ExprJson,
}

#[derive(Serialize, Deserialize)]
struct SystemJson {
    variables: Vec<VarJson>,
    clauses: Vec<Vec<CmpJson>>,
}

/// Values for every variable of a system, indexed by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<ExtNat>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment { values: vec![ExtNat::ZERO; n] }
    }

    pub fn from_values(values: Vec<ExtNat>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, v: Var) -> ExtNat {
        self.values[v]
    }

    pub fn set(&mut self, v: Var, x: ExtNat) {
        self.values[v] = x;
    }

    pub fn values(&self) -> &[ExtNat] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveMode {
    /// All variables finite.
    OverN,
    /// Variables without a finiteness flag may take the infinite value.
    OverNStar,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_nodes: u64,
    pub max_ilp_nodes: u64,
    pub max_lp_calls: u64,
    pub max_pivots: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_nodes: 5_000_000,
            max_ilp_nodes: 200_000,
            max_lp_calls: 5_000_000,
            max_pivots: 200_000,
            time_limit: Some(Duration::from_secs(600)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_calls: u64,
    pub ilp_nodes: u64,
    pub leaves: u64,
}

/// Shared counters enforcing the configured caps.
#[derive(Clone, Debug)]
pub struct Budget {
    pub stats: SolveStats,
    max_nodes: u64,
    max_ilp_nodes: u64,
    max_lp_calls: u64,
    pub max_pivots: usize,
    deadline: Option<Instant>,
}

impl Budget {
    pub fn new(cfg: &SolverConfig) -> Self {
        Budget {
            stats: SolveStats::default(),
            max_nodes: cfg.max_nodes,
            max_ilp_nodes: cfg.max_ilp_nodes,
            max_lp_calls: cfg.max_lp_calls,
            max_pivots: cfg.max_pivots,
            deadline: cfg.time_limit.map(|d| Instant::now() + d),
        }
    }

    fn check_time(&self) -> Result<(), ResourceCap> {
        match self.deadline {
            Some(d) if Instant::now() > d => Err(ResourceCap("solver time limit".into())),
            _ => Ok(()),
        }
    }

    pub fn tick_node(&mut self) -> Result<(), ResourceCap> {
        self.stats.nodes += 1;
        if self.stats.nodes > self.max_nodes {
            return Err(ResourceCap(format!("search node limit {}", self.max_nodes)));
        }
        self.check_time()
    }

    pub fn tick_ilp(&mut self) -> Result<(), ResourceCap> {
        self.stats.ilp_nodes += 1;
        if self.stats.ilp_nodes > self.max_ilp_nodes {
            return Err(ResourceCap(format!("branch-and-bound node limit {}", self.max_ilp_nodes)));
        }
        self.check_time()
    }

    pub fn tick_lp(&mut self) -> Result<(), ResourceCap> {
        self.stats.lp_calls += 1;
        if self.stats.lp_calls > self.max_lp_calls {
            return Err(ResourceCap(format!("LP call limit {}", self.max_lp_calls)));
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(&SolverConfig::default())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub assignment: Option<Assignment>,
    pub stats: SolveStats,
}

/// Decides feasibility of `sys`. Any returned assignment satisfies every clause.
pub fn solve(sys: &System, mode: SolveMode) -> Result<Option<Assignment>, ResourceCap> {
    solve_with(sys, mode, &SolverConfig::default()).map(|o| o.assignment)
}

pub fn solve_with(sys: &System, mode: SolveMode, cfg: &SolverConfig) -> Result<SolveOutcome, ResourceCap> {
    let mut budget = Budget::new(cfg);
    let assignment = solver::search(sys, mode, &mut budget)?;
    if let Some(a) = &assignment {
        assert!(sys.check(a), "solver returned an assignment violating the system");
    }
    Ok(SolveOutcome { assignment, stats: budget.stats })
}
