//! Depth-first search over disjunct choices and infinity guesses.
//!
//! Every variable starts with an undecided status (or finite, when it may
//! not be infinite). A comparison is decided by the infinity truth table as
//! soon as either side is known to be infinite; comparisons between finite
//! sides become linear rows. Rows are tracked with interval bounds for cheap
//! propagation, an LP relaxation prunes infeasible nodes, and complete
//! choices are finished by branch-and-bound over the integers.

use super::ilp::{lp_feasible, solve_ilp, LpStatus};
use super::lp::LpRow;
use super::{Assignment, Budget, Cmp, Comparison, LinExpr, SolveMode, System, Var};
use crate::ext::ExtNat;
use crate::ResourceCap;

/// Bounds beyond this magnitude are dropped to keep arithmetic exact.
const BOUND_LIMIT: i128 = 1 << 62;
const PROPAGATION_ROUNDS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Unknown,
    Fin,
    Inf,
}

#[derive(Clone, Copy, Debug)]
enum Decision {
    /// Whether the variable is infinite.
    Infinity(Var),
    /// Whether a finite variable with an infinite coefficient is zero.
    Positivity(Var),
}

enum Side {
    Inf,
    Fin(Vec<(Var, i128)>, i128),
    Open(Decision),
}

/// `sum coeffs * v  op  k` between finite sides.
#[derive(Clone, Debug)]
struct FinCmp {
    coeffs: Vec<(Var, i128)>,
    op: Cmp,
    k: i128,
}

enum Eval {
    True,
    False,
    Fin(FinCmp),
    Open(Decision),
}

fn row(coeffs: Vec<(Var, i128)>, rhs: i128, eq: bool) -> LpRow {
    LpRow { coeffs, rhs, eq }
}

fn negated(coeffs: &[(Var, i128)]) -> Vec<(Var, i128)> {
    coeffs.iter().map(|&(v, c)| (v, -c)).collect()
}

impl FinCmp {
    /// The comparison as alternatives of single rows (two only for `!=`).
    fn alternatives(&self) -> Vec<LpRow> {
        let c = &self.coeffs;
        let k = self.k;
        match self.op {
            Cmp::Eq => vec![row(c.clone(), k, true)],
            Cmp::Le => vec![row(c.clone(), k, false)],
            Cmp::Lt => vec![row(c.clone(), k - 1, false)],
            Cmp::Ge => vec![row(negated(c), -k, false)],
            Cmp::Gt => vec![row(negated(c), -k - 1, false)],
            Cmp::Ne => vec![row(c.clone(), k - 1, false), row(negated(c), -k - 1, false)],
        }
    }

    fn negation(&self) -> FinCmp {
        let op = match self.op {
            Cmp::Eq => Cmp::Ne,
            Cmp::Ne => Cmp::Eq,
            Cmp::Le => Cmp::Gt,
            Cmp::Lt => Cmp::Ge,
            Cmp::Ge => Cmp::Lt,
            Cmp::Gt => Cmp::Le,
        };
        FinCmp { coeffs: self.coeffs.clone(), op, k: self.k }
    }
}

fn inf_table(op: Cmp, lhs_inf: bool, rhs_inf: bool) -> bool {
    match (lhs_inf, rhs_inf) {
        (true, true) => matches!(op, Cmp::Eq | Cmp::Le | Cmp::Ge),
        (false, true) => matches!(op, Cmp::Lt | Cmp::Le | Cmp::Ne),
        (true, false) => matches!(op, Cmp::Gt | Cmp::Ge | Cmp::Ne),
        (false, false) => unreachable!("finite sides are not decided by the table"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Open,
}

#[derive(Clone)]
struct Node {
    status: Vec<Status>,
    lb: Vec<i128>,
    ub: Vec<Option<i128>>,
    rows: Vec<LpRow>,
    satisfied: Vec<bool>,
    excluded: Vec<Vec<usize>>,
    rows_checked: usize,
}

struct Search<'a> {
    sys: &'a System,
    mode: SolveMode,
    budget: &'a mut Budget,
}

impl Node {
    fn side(&self, e: &LinExpr) -> Side {
        if e.constant_term() == ExtNat::Inf {
            return Side::Inf;
        }
        let mut open = None;
        let mut coeffs = Vec::new();
        for &(v, c) in e.terms() {
            match c {
                ExtNat::Fin(c) => match self.status[v] {
                    Status::Inf => return Side::Inf,
                    Status::Fin => coeffs.push((v, c as i128)),
                    Status::Unknown => {
                        open.get_or_insert(Decision::Infinity(v));
                    }
                },
                ExtNat::Inf => match self.status[v] {
                    Status::Inf => return Side::Inf,
                    _ if self.lb[v] >= 1 => return Side::Inf,
                    Status::Fin if self.ub[v] == Some(0) => {}
                    Status::Fin => {
                        open.get_or_insert(Decision::Positivity(v));
                    }
                    Status::Unknown => {
                        open.get_or_insert(Decision::Infinity(v));
                    }
                },
            }
        }
        match open {
            Some(d) => Side::Open(d),
            None => Side::Fin(coeffs, e.constant_term().finite().unwrap() as i128),
        }
    }

    fn eval(&self, cmp: &Comparison) -> Eval {
        let l = self.side(&cmp.lhs);
        let r = self.side(&cmp.rhs);
        match (l, r) {
            (Side::Open(d), _) | (_, Side::Open(d)) => Eval::Open(d),
            (Side::Inf, Side::Inf) => truth(inf_table(cmp.op, true, true)),
            (Side::Inf, Side::Fin(..)) => truth(inf_table(cmp.op, true, false)),
            (Side::Fin(..), Side::Inf) => truth(inf_table(cmp.op, false, true)),
            (Side::Fin(lc, lk), Side::Fin(rc, rk)) => {
                let mut coeffs = lc;
                for (v, c) in rc {
                    match coeffs.iter_mut().find(|t| t.0 == v) {
                        Some(t) => t.1 -= c,
                        None => coeffs.push((v, -c)),
                    }
                }
                coeffs.retain(|t| t.1 != 0);
                coeffs.sort_unstable();
                Eval::Fin(FinCmp { coeffs, op: cmp.op, k: rk - lk })
            }
        }
    }

    /// Interval of `sum coeffs * v` under the current bounds.
    fn range(&self, coeffs: &[(Var, i128)]) -> (Option<i128>, Option<i128>) {
        let mut lo = Some(0i128);
        let mut hi = Some(0i128);
        for &(v, c) in coeffs {
            let (a, b) = (Some(self.lb[v]), self.ub[v]);
            let (tlo, thi) = if c > 0 { (a.map(|x| x * c), b.map(|x| x * c)) } else { (b.map(|x| x * c), a.map(|x| x * c)) };
            lo = lo.zip(tlo).map(|(x, y)| x + y);
            hi = hi.zip(thi).map(|(x, y)| x + y);
        }
        (lo, hi)
    }

    fn row_truth(&self, r: &LpRow) -> Truth {
        let (lo, hi) = self.range(&r.coeffs);
        if r.eq {
            if lo == Some(r.rhs) && hi == Some(r.rhs) {
                Truth::True
            } else if lo.is_some_and(|l| l > r.rhs) || hi.is_some_and(|h| h < r.rhs) {
                Truth::False
            } else {
                Truth::Open
            }
        } else if hi.is_some_and(|h| h <= r.rhs) {
            Truth::True
        } else if lo.is_some_and(|l| l > r.rhs) {
            Truth::False
        } else {
            Truth::Open
        }
    }

    fn fin_truth(&self, f: &FinCmp) -> Truth {
        let ts: Vec<Truth> = f.alternatives().iter().map(|r| self.row_truth(r)).collect();
        if ts.contains(&Truth::True) {
            Truth::True
        } else if ts.iter().all(|t| *t == Truth::False) {
            Truth::False
        } else {
            Truth::Open
        }
    }

    fn add_row(&mut self, mut r: LpRow) {
        r.coeffs.retain(|t| t.1 != 0);
        if !self.rows.contains(&r) {
            self.rows.push(r);
        }
    }

    /// Tightens bounds from the rows. Returns false on an empty interval.
    fn propagate(&mut self) -> bool {
        for _ in 0..PROPAGATION_ROUNDS {
            let mut changed = false;
            for i in 0..self.rows.len() {
                let r = &self.rows[i];
                let mut forms = vec![(r.coeffs.clone(), r.rhs)];
                if r.eq {
                    forms.push((negated(&r.coeffs), -r.rhs));
                }
                for (coeffs, rhs) in forms {
                    match self.tighten(&coeffs, rhs) {
                        None => return false,
                        Some(c) => changed |= c,
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }

    /// Applies `sum coeffs * v <= rhs` to the bounds.
    fn tighten(&mut self, coeffs: &[(Var, i128)], rhs: i128) -> Option<bool> {
        // minimum contribution of each term; None for unbounded below
        let mins: Vec<Option<i128>> = coeffs
            .iter()
            .map(|&(v, c)| if c > 0 { Some(self.lb[v] * c) } else { self.ub[v].map(|u| u * c) })
            .collect();
        let unbounded = mins.iter().filter(|m| m.is_none()).count();
        if unbounded > 1 {
            return Some(false);
        }
        let total: i128 = mins.iter().flatten().sum();
        if unbounded == 0 && total > rhs {
            return None;
        }
        let mut changed = false;
        for (j, &(v, c)) in coeffs.iter().enumerate() {
            let rest = match mins[j] {
                Some(m) if unbounded == 0 => total - m,
                None => total,
                _ => continue,
            };
            let slack = rhs - rest;
            if slack.abs() > BOUND_LIMIT {
                continue;
            }
            if c > 0 {
                let nb = slack.div_euclid(c);
                if nb < self.lb[v] {
                    return None;
                }
                if self.ub[v].is_none_or(|u| nb < u) {
                    self.ub[v] = Some(nb);
                    changed = true;
                }
            } else {
                // c * v <= slack  =>  v >= ceil(slack / c)
                let nb = -((slack).div_euclid(-c));
                let nb = nb.max(0);
                if self.ub[v].is_some_and(|u| nb > u) {
                    return None;
                }
                if nb > self.lb[v] {
                    self.lb[v] = nb;
                    changed = true;
                }
            }
        }
        Some(changed)
    }
}

fn truth(b: bool) -> Eval {
    if b {
        Eval::True
    } else {
        Eval::False
    }
}

enum Choice {
    Decide(Decision),
    /// Commit to a finite comparison of clause `clause`, disjunct `disjunct`.
    Commit { clause: usize, disjunct: usize, cmp: FinCmp },
}

impl Search<'_> {
    fn may_be_infinite(&self, v: Var) -> bool {
        self.mode == SolveMode::OverNStar && !self.sys.is_finite_only(v)
    }

    /// Unit propagation to a fixpoint; returns the branching choice, or
    /// `Ok(None)` inside `Some` when every clause is satisfied.
    fn propagate(&mut self, node: &mut Node) -> Option<Option<Choice>> {
        loop {
            if !node.propagate() {
                return None;
            }
            let mut best: Option<(usize, usize, Choice)> = None;
            let mut progressed = false;
            for (ci, clause) in self.sys.clauses.iter().enumerate() {
                if node.satisfied[ci] {
                    continue;
                }
                let mut viable: Vec<(usize, Eval)> = Vec::new();
                let mut sat = false;
                for (di, cmp) in clause.0.iter().enumerate() {
                    if node.excluded[ci].contains(&di) {
                        continue;
                    }
                    match node.eval(cmp) {
                        Eval::True => {
                            sat = true;
                            break;
                        }
                        Eval::False => {}
                        Eval::Fin(f) => match node.fin_truth(&f) {
                            Truth::True => {
                                sat = true;
                                break;
                            }
                            Truth::False => {}
                            Truth::Open => viable.push((di, Eval::Fin(f))),
                        },
                        Eval::Open(d) => viable.push((di, Eval::Open(d))),
                    }
                }
                if sat {
                    node.satisfied[ci] = true;
                    continue;
                }
                match viable.len() {
                    0 => return None,
                    1 if matches!(viable[0].1, Eval::Fin(ref f) if f.op != Cmp::Ne) => {
                        let Eval::Fin(f) = viable.pop().unwrap().1 else { unreachable!() };
                        for r in f.alternatives() {
                            node.add_row(r);
                        }
                        node.satisfied[ci] = true;
                        progressed = true;
                    }
                    n => {
                        if best.as_ref().is_none_or(|b| n < b.0) {
                            let (di, e) = viable.swap_remove(0);
                            let choice = match e {
                                Eval::Open(d) => Choice::Decide(d),
                                Eval::Fin(cmp) => Choice::Commit { clause: ci, disjunct: di, cmp },
                                _ => unreachable!(),
                            };
                            best = Some((n, ci, choice));
                        }
                    }
                }
            }
            if !progressed {
                return Some(best.map(|b| b.2));
            }
        }
    }

    fn lp_prune(&mut self, node: &mut Node) -> Result<bool, ResourceCap> {
        if node.rows.len() == node.rows_checked {
            return Ok(false);
        }
        node.rows_checked = node.rows.len();
        let (n, rows) = compact(node);
        Ok(lp_feasible(n, &rows, self.budget)? == LpStatus::Infeasible)
    }

    fn leaf(&mut self, node: &Node) -> Result<Option<Assignment>, ResourceCap> {
        self.budget.stats.leaves += 1;
        let (n, rows, vars) = compact_with_map(node);
        let Some(x) = solve_ilp(n, &rows, self.budget)? else {
            return Ok(None);
        };
        let mut a = Assignment::zeros(self.sys.num_vars());
        for v in 0..self.sys.num_vars() {
            if node.status[v] == Status::Inf {
                a.set(v, ExtNat::Inf);
            }
        }
        for (i, &v) in vars.iter().enumerate() {
            a.set(v, ExtNat::Fin(x[i] as u64));
        }
        debug_assert!(self.sys.check(&a), "leaf assignment violates the system");
        Ok(if self.sys.check(&a) { Some(a) } else { None })
    }

    fn dfs(&mut self, mut node: Node) -> Result<Option<Assignment>, ResourceCap> {
        self.budget.tick_node()?;
        let Some(choice) = self.propagate(&mut node) else {
            return Ok(None);
        };
        if self.lp_prune(&mut node)? {
            return Ok(None);
        }
        let Some(choice) = choice else {
            return self.leaf(&node);
        };
        match choice {
            Choice::Decide(Decision::Infinity(v)) => {
                let mut fin = node.clone();
                fin.status[v] = Status::Fin;
                if let Some(a) = self.dfs(fin)? {
                    return Ok(Some(a));
                }
                if self.may_be_infinite(v) {
                    node.status[v] = Status::Inf;
                    return self.dfs(node);
                }
                Ok(None)
            }
            Choice::Decide(Decision::Positivity(v)) => {
                let mut zero = node.clone();
                zero.add_row(row(vec![(v, 1)], 0, false));
                if let Some(a) = self.dfs(zero)? {
                    return Ok(Some(a));
                }
                node.add_row(row(vec![(v, -1)], -1, false));
                self.dfs(node)
            }
            Choice::Commit { clause, disjunct, cmp } => {
                for r in cmp.alternatives() {
                    if node.row_truth(&r) == Truth::False {
                        continue;
                    }
                    let mut child = node.clone();
                    child.add_row(r);
                    child.satisfied[clause] = true;
                    if let Some(a) = self.dfs(child)? {
                        return Ok(Some(a));
                    }
                }
                node.excluded[clause].push(disjunct);
                let neg = cmp.negation();
                let alts: Vec<LpRow> =
                    neg.alternatives().into_iter().filter(|r| node.row_truth(r) != Truth::False).collect();
                if alts.is_empty() {
                    return Ok(None);
                }
                if alts.len() == 1 {
                    node.add_row(alts.into_iter().next().unwrap());
                }
                self.dfs(node)
            }
        }
    }
}

fn compact_with_map(node: &Node) -> (usize, Vec<LpRow>, Vec<Var>) {
    let mut vars: Vec<Var> = node.rows.iter().flat_map(|r| r.coeffs.iter().map(|t| t.0)).collect();
    vars.extend((0..node.lb.len()).filter(|&v| node.lb[v] > 0 && node.status[v] == Status::Fin));
    vars.sort_unstable();
    vars.dedup();
    let idx = |v: Var| vars.binary_search(&v).unwrap();
    let mut rows: Vec<LpRow> = node
        .rows
        .iter()
        .map(|r| LpRow { coeffs: r.coeffs.iter().map(|&(v, c)| (idx(v), c)).collect(), rhs: r.rhs, eq: r.eq })
        .collect();
    for (i, &v) in vars.iter().enumerate() {
        if node.lb[v] > 0 {
            rows.push(row(vec![(i, -1)], -node.lb[v], false));
        }
        if let Some(u) = node.ub[v] {
            rows.push(row(vec![(i, 1)], u, false));
        }
    }
    (vars.len(), rows, vars)
}

fn compact(node: &Node) -> (usize, Vec<LpRow>) {
    let (n, rows, _) = compact_with_map(node);
    (n, rows)
}

pub(super) fn search(sys: &System, mode: SolveMode, budget: &mut Budget) -> Result<Option<Assignment>, ResourceCap> {
    let n = sys.num_vars();
    let status = (0..n)
        .map(|v| if mode == SolveMode::OverN || sys.is_finite_only(v) { Status::Fin } else { Status::Unknown })
        .collect();
    let root = Node {
        status,
        lb: vec![0; n],
        ub: vec![None; n],
        rows: Vec::new(),
        satisfied: vec![false; sys.clauses.len()],
        excluded: vec![Vec::new(); sys.clauses.len()],
        rows_checked: 0,
    };
    let mut s = Search { sys, mode, budget };
    s.dfs(root)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::ext::{Fin, Inf};

    fn x_plus_y() -> (System, Var, Var) {
        let mut sys = System::new();
        let x = sys.add_var("x", false);
        let y = sys.add_var("y", false);
        (sys, x, y)
    }

    #[test]
    fn simple_sum() {
        let (mut sys, x, y) = x_plus_y();
        sys.add(Comparison::new(LinExpr::sum([x, y]), Cmp::Eq, LinExpr::constant(3u64)));
        sys.add(Comparison::new(LinExpr::var(x), Cmp::Ge, LinExpr::constant(2u64)));
        let a = solve(&sys, SolveMode::OverN).unwrap().unwrap();
        assert!(sys.check(&a));
        assert!(a.get(x) >= Fin(2));
    }

    #[test]
    fn successor_fixpoint() {
        let mut sys = System::new();
        let x = sys.add_var("x", false);
        sys.add(Comparison::new(LinExpr::var(x), Cmp::Eq, LinExpr::var(x).plus(1u64)));
        assert_eq!(solve(&sys, SolveMode::OverN).unwrap(), None);
        let a = solve(&sys, SolveMode::OverNStar).unwrap().unwrap();
        assert_eq!(a.get(x), Inf);
    }

    #[test]
    fn finite_flag_respected() {
        let mut sys = System::new();
        let x = sys.add_var("x", false);
        sys.add(Comparison::new(LinExpr::var(x), Cmp::Lt, LinExpr::constant(Inf)));
        sys.add(Comparison::new(LinExpr::var(x), Cmp::Ge, LinExpr::constant(5u64)));
        let a = solve(&sys, SolveMode::OverNStar).unwrap().unwrap();
        assert_eq!(a.get(x), Fin(5));
    }

    #[test]
    fn infinite_coefficient() {
        // inf * x = 0 or x >= 1 and inf * x >= 7
        let mut sys = System::new();
        let x = sys.add_var("x", true);
        sys.add(Comparison::new(LinExpr::zero().with_term(x, Inf), Cmp::Ge, LinExpr::constant(7u64)));
        let a = solve(&sys, SolveMode::OverN).unwrap().unwrap();
        assert!(a.get(x) >= Fin(1));
    }

    #[test]
    fn disjunction_and_disequality() {
        let (mut sys, x, y) = x_plus_y();
        sys.add(Comparison::new(LinExpr::var(x), Cmp::Ne, LinExpr::var(y)));
        sys.add(Comparison::new(LinExpr::sum([x, y]), Cmp::Le, LinExpr::constant(1u64)));
        sys.add_clause(Clause(vec![
            Comparison::new(LinExpr::var(x), Cmp::Eq, LinExpr::constant(5u64)),
            Comparison::new(LinExpr::var(y), Cmp::Gt, LinExpr::constant(0u64)),
        ]));
        let a = solve(&sys, SolveMode::OverN).unwrap().unwrap();
        assert_eq!((a.get(x), a.get(y)), (Fin(0), Fin(1)));
    }
}
