//! Rewriting fluted sentences into guarded counting normal form.
//!
//! Every quantified subformula `exists[c] x_d (chi)` is replaced, innermost
//! first, by a fresh predicate `q` of arity `d - 1`, and the pair
//! `forall^(d-1) (q -> exists[c] chi)`, `forall^(d-1) (!q -> !exists[c] chi)`
//! is recorded. Quantifier-free parts are kept as [`Qf`] trees over suffix
//! atoms, so padding a conjunct to a larger depth is the identity.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::modeltools::{all_tuples, evaluate, Structure};
use crate::syntax::{classify_fragment, CountSpec, Formula, Signature};

/// Quantifier-free formula over suffix atoms at an implicit depth `d`.
/// `Pred(r, a)` stands for `r(x_{d-a+1}, ..., x_d)`; `Eq` for `x_{d-1} = x_d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Qf {
    True,
    False,
    Pred(String, usize),
    Eq,
    Not(Box<Qf>),
    And(Vec<Qf>),
    Or(Vec<Qf>),
    Iff(Box<Qf>, Box<Qf>),
}

impl Qf {
    pub fn pred(name: &str, arity: usize) -> Qf {
        Qf::Pred(name.to_string(), arity)
    }

    pub fn not(q: Qf) -> Qf {
        match q {
            Qf::True => Qf::False,
            Qf::False => Qf::True,
            Qf::Not(inner) => *inner,
            q => Qf::Not(Box::new(q)),
        }
    }

    pub fn and(qs: Vec<Qf>) -> Qf {
        let mut out = Vec::with_capacity(qs.len());
        for q in qs {
            match q {
                Qf::True => {}
                Qf::False => return Qf::False,
                Qf::And(inner) => out.extend(inner),
                q => out.push(q),
            }
        }
        match out.len() {
            0 => Qf::True,
            1 => out.pop().unwrap(),
            _ => Qf::And(out),
        }
    }

    pub fn or(qs: Vec<Qf>) -> Qf {
        let mut out = Vec::with_capacity(qs.len());
        for q in qs {
            match q {
                Qf::False => {}
                Qf::True => return Qf::True,
                Qf::Or(inner) => out.extend(inner),
                q => out.push(q),
            }
        }
        match out.len() {
            0 => Qf::False,
            1 => out.pop().unwrap(),
            _ => Qf::Or(out),
        }
    }

    pub fn implies(a: Qf, b: Qf) -> Qf {
        Qf::or(vec![Qf::not(a), b])
    }

    pub fn iff(a: Qf, b: Qf) -> Qf {
        match (a, b) {
            (Qf::True, q) | (q, Qf::True) => q,
            (Qf::False, q) | (q, Qf::False) => Qf::not(q),
            (a, b) => Qf::Iff(Box::new(a), Box::new(b)),
        }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Qf::True | Qf::False | Qf::Pred(..) | Qf::Eq => 1,
            Qf::Not(q) => 1 + q.size(),
            Qf::And(qs) | Qf::Or(qs) => 1 + qs.iter().map(Qf::size).sum::<usize>(),
            Qf::Iff(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Largest atom arity mentioned (2 for equality).
    pub fn max_arity(&self) -> usize {
        match self {
            Qf::True | Qf::False => 0,
            Qf::Pred(_, a) => *a,
            Qf::Eq => 2,
            Qf::Not(q) => q.max_arity(),
            Qf::And(qs) | Qf::Or(qs) => qs.iter().map(Qf::max_arity).max().unwrap_or(0),
            Qf::Iff(a, b) => a.max_arity().max(b.max_arity()),
        }
    }

    pub fn predicates(&self, out: &mut BTreeMap<String, usize>) {
        match self {
            Qf::Pred(n, a) => {
                out.insert(n.clone(), *a);
            }
            Qf::Not(q) => q.predicates(out),
            Qf::And(qs) | Qf::Or(qs) => qs.iter().for_each(|q| q.predicates(out)),
            Qf::Iff(a, b) => {
                a.predicates(out);
                b.predicates(out);
            }
            _ => {}
        }
    }

    /// Replaces the listed nullary predicates by constants and simplifies.
    pub fn substitute(&self, values: &BTreeMap<String, bool>) -> Qf {
        match self {
            Qf::Pred(n, 0) => match values.get(n) {
                Some(true) => Qf::True,
                Some(false) => Qf::False,
                None => self.clone(),
            },
            Qf::Not(q) => Qf::not(q.substitute(values)),
            Qf::And(qs) => Qf::and(qs.iter().map(|q| q.substitute(values)).collect()),
            Qf::Or(qs) => Qf::or(qs.iter().map(|q| q.substitute(values)).collect()),
            Qf::Iff(a, b) => Qf::iff(a.substitute(values), b.substitute(values)),
            q => q.clone(),
        }
    }

    /// Value under a partial valuation of nullary predicates; `None` if undetermined.
    fn eval_nullary(&self, values: &BTreeMap<String, bool>) -> Option<bool> {
        match self.substitute(values) {
            Qf::True => Some(true),
            Qf::False => Some(false),
            _ => None,
        }
    }

    /// The formula at `depth` using variables `x1 .. x{depth}`.
    pub fn to_formula(&self, depth: usize) -> Formula {
        match self {
            Qf::True => Formula::True,
            Qf::False => Formula::False,
            Qf::Pred(n, a) => {
                let args: Vec<String> = (depth + 1 - a..=depth).map(var_name).collect();
                Formula::Atom { pred: n.clone(), args }
            }
            Qf::Eq => Formula::Equal(var_name(depth - 1), var_name(depth)),
            Qf::Not(q) => Formula::not(q.to_formula(depth)),
            Qf::And(qs) => Formula::And(qs.iter().map(|q| q.to_formula(depth)).collect()),
            Qf::Or(qs) => Formula::Or(qs.iter().map(|q| q.to_formula(depth)).collect()),
            Qf::Iff(a, b) => Formula::iff(a.to_formula(depth), b.to_formula(depth)),
        }
    }
}

impl fmt::Display for Qf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qf::True => write!(f, "true"),
            Qf::False => write!(f, "false"),
            Qf::Pred(n, _) => write!(f, "{n}"),
            Qf::Eq => write!(f, "="),
            Qf::Not(q) => write!(f, "!{q}"),
            Qf::Iff(a, b) => write!(f, "({a} <-> {b})"),
            Qf::And(qs) | Qf::Or(qs) => {
                let sep = if matches!(self, Qf::And(_)) { " & " } else { " | " };
                write!(f, "(")?;
                for (i, q) in qs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{q}")?;
                }
                write!(f, ")")
            }
        }
    }
}

pub fn var_name(i: usize) -> String {
    format!("x{i}")
}

/// `forall x1..xl (guard -> [!] exists[count] x{l+1} body)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Conjunct {
    pub guard: Qf,
    pub count: CountSpec,
    pub body: Qf,
}

impl Conjunct {
    pub fn new(guard: Qf, count: CountSpec, body: Qf) -> Self {
        Conjunct { guard, count, body }
    }

    fn size(&self) -> usize {
        self.guard.size() + self.body.size() + 1
    }
}

/// Definition of a fresh predicate: it holds of `x1..x{arity}` exactly when
/// `formula` does (with `vars[i]` naming `x{i+1}`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshDef {
    pub arity: usize,
    pub vars: Vec<String>,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    /// Number of variables; guards live at depth `width - 1`, bodies at `width`.
    pub width: usize,
    pub positive: Vec<Conjunct>,
    pub negative: Vec<Conjunct>,
    pub signature: Signature,
    pub fresh: BTreeMap<String, FreshDef>,
    /// Propositional part over nullary predicates; `True` once branched.
    pub residue: Qf,
    /// Values fixed for nullary predicates by [`branch_nullary`].
    pub nullary: BTreeMap<String, bool>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalFormError {
    #[error("not a sentence; free variables: {}", .0.join(", "))]
    NotSentence(Vec<String>),
    #[error("not fluted: {}", .0.iter().map(|(a, r)| format!("{a} ({r})")).collect::<Vec<_>>().join("; "))]
    NotFluted(Vec<(String, String)>),
}

impl NormalForm {
    pub fn size(&self) -> usize {
        self.positive.iter().chain(&self.negative).map(Conjunct::size).sum::<usize>() + self.residue.size()
    }

    /// Predicates of arity zero still present.
    pub fn nullary_predicates(&self) -> Vec<String> {
        self.signature.iter().filter(|&(_, a)| a == 0).map(|(n, _)| n.to_string()).collect()
    }

    /// The sentence denoted, over variables `x1 .. x{width}`.
    pub fn to_formula(&self) -> Formula {
        let vars: Vec<String> = (1..self.width).map(var_name).collect();
        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
        Formula::forall_many(&vars, Formula::and(self.conditions()))
    }

    /// Per-tuple conditions over `x1 .. x{width-1}` whose universal closure
    /// is equivalent to [`NormalForm::to_formula`].
    pub fn conditions(&self) -> Vec<Formula> {
        let l = self.width - 1;
        let last = var_name(self.width);
        let mut out = Vec::new();
        for (positive, list) in [(true, &self.positive), (false, &self.negative)] {
            for c in list {
                let mut inner = Formula::exists(c.count, &last, c.body.to_formula(self.width));
                if !positive {
                    inner = Formula::not(inner);
                }
                out.push(Formula::implies(c.guard.to_formula(l), inner));
            }
        }
        if self.residue != Qf::True {
            out.push(self.residue.to_formula(0));
        }
        for (n, v) in &self.nullary {
            let a = Formula::Atom { pred: n.clone(), args: vec![] };
            out.push(if *v { a } else { Formula::not(a) });
        }
        out
    }

    /// Adds the fresh predicates to `s`, interpreted by their definitions.
    /// Nullary predicates fixed by branching are set as recorded.
    pub fn expand_fresh(&self, s: &Structure) -> Structure {
        let mut out = s.clone();
        for (n, v) in &self.nullary {
            if out.relation(n).is_none() {
                out.add_predicate(n, 0);
            }
            out.set(n, &[], *v);
        }
        for (name, def) in &self.fresh {
            out.add_predicate(name, def.arity);
            for t in all_tuples(s.size(), def.arity) {
                let env: Vec<(&str, usize)> = def.vars.iter().map(String::as_str).zip(t.iter().copied()).collect();
                if evaluate(s, &def.formula, &env) {
                    out.set(name, &t, true);
                }
            }
        }
        out
    }

    /// Signature without the fresh predicates.
    pub fn original_signature(&self) -> Signature {
        let mut sig = self.signature.clone();
        for n in self.fresh.keys() {
            sig.remove(n);
        }
        sig
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "width {}", self.width)?;
        for c in &self.positive {
            writeln!(f, "+ {} -> {} {}", c.guard, c.count, c.body)?;
        }
        for c in &self.negative {
            writeln!(f, "- {} -> !{} {}", c.guard, c.count, c.body)?;
        }
        if self.residue != Qf::True {
            writeln!(f, "residue {}", self.residue)?;
        }
        Ok(())
    }
}

struct Builder {
    sig: Signature,
    fresh: BTreeMap<String, FreshDef>,
    /// Fresh predicate already naming (depth, count, abstracted body).
    shared: HashMap<(usize, CountSpec, Qf), String>,
    /// (positive?, conjunct)
    emitted: Vec<(bool, Conjunct)>,
    vars: Vec<String>,
}

impl Builder {
    fn abstract_formula(&mut self, f: &Formula) -> Qf {
        match f {
            Formula::True => Qf::True,
            Formula::False => Qf::False,
            Formula::Atom { pred, args } => Qf::Pred(pred.clone(), args.len()),
            // classification guarantees the two sides are x_{d-1} and x_d
            Formula::Equal(..) => Qf::Eq,
            Formula::Not(g) => Qf::not(self.abstract_formula(g)),
            Formula::And(gs) => Qf::and(gs.iter().map(|g| self.abstract_formula(g)).collect()),
            Formula::Or(gs) => Qf::or(gs.iter().map(|g| self.abstract_formula(g)).collect()),
            Formula::Implies(a, b) => {
                let a = self.abstract_formula(a);
                Qf::implies(a, self.abstract_formula(b))
            }
            Formula::Iff(a, b) => {
                let a = self.abstract_formula(a);
                Qf::iff(a, self.abstract_formula(b))
            }
            Formula::Exists { count, var, body } => self.quantifier(*count, var, body, f, false),
            Formula::Forall { var, body } => Qf::not(self.quantifier(CountSpec::some(), var, body, f, true)),
        }
    }

    fn quantifier(&mut self, count: CountSpec, var: &str, body: &Formula, whole: &Formula, negate: bool) -> Qf {
        let d = self.vars.len();
        self.vars.push(var.to_string());
        let mut chi = self.abstract_formula(body);
        self.vars.pop();
        if negate {
            chi = Qf::not(chi);
        }
        let key = (d, count, chi.clone());
        if let Some(name) = self.shared.get(&key) {
            return Qf::Pred(name.clone(), d);
        }
        let name = self.sig.fresh_name(&format!("q{d}_"));
        self.shared.insert(key, name.clone());
        self.sig.declare(&name, d).expect("fresh name");
        let formula = if negate {
            Formula::exists(CountSpec::some(), var, Formula::not(body.clone()))
        } else {
            whole.clone()
        };
        self.fresh.insert(name.clone(), FreshDef { arity: d, vars: self.vars.clone(), formula });
        let q = Qf::Pred(name, d);
        self.emitted.push((true, Conjunct::new(q.clone(), count, chi.clone())));
        self.emitted.push((false, Conjunct::new(Qf::not(q.clone()), count, chi)));
        q
    }
}

impl Builder {
    /// Whether `f`, under `k` enclosing universal quantifiers, is a
    /// conjunction of guarded counting statements.
    fn recognizable(f: &Formula, k: usize) -> bool {
        match f {
            Formula::Forall { body, .. } => Self::recognizable(body, k + 1),
            Formula::And(parts) => parts.iter().all(|p| Self::recognizable(p, k)),
            Formula::Implies(_, b) if Self::quantified_matrix(b) => true,
            f if Self::quantified_matrix(f) => true,
            f => k >= 1 && quantifier_free(f),
        }
    }

    fn quantified_matrix(f: &Formula) -> bool {
        match f {
            Formula::Exists { .. } | Formula::Forall { .. } => true,
            Formula::Not(g) => matches!(**g, Formula::Exists { .. }),
            _ => false,
        }
    }

    fn emit_direct(&mut self, f: &Formula) {
        match f {
            Formula::Forall { var, body } => {
                self.vars.push(var.clone());
                self.emit_direct(body);
                self.vars.pop();
            }
            Formula::And(parts) => parts.iter().for_each(|p| self.emit_direct(p)),
            Formula::Implies(a, b) if Self::quantified_matrix(b) => {
                let guard = self.abstract_formula(a);
                self.emit_matrix(guard, b);
            }
            f if Self::quantified_matrix(f) => self.emit_matrix(Qf::True, f),
            f => {
                // forall x1..xk (theta): no value of the last variable falsifies theta
                let theta = self.abstract_formula(f);
                self.emitted.push((false, Conjunct::new(Qf::True, CountSpec::some(), Qf::not(theta))));
            }
        }
    }

    fn emit_matrix(&mut self, guard: Qf, f: &Formula) {
        let (positive, count, var, body, negate) = match f {
            Formula::Exists { count, var, body } => (true, *count, var, body, false),
            Formula::Forall { var, body } => (false, CountSpec::some(), var, body, true),
            Formula::Not(g) => match &**g {
                Formula::Exists { count, var, body } => (false, *count, var, body, false),
                _ => unreachable!("checked by recognizable"),
            },
            _ => unreachable!("checked by recognizable"),
        };
        self.vars.push(var.clone());
        let mut chi = self.abstract_formula(body);
        self.vars.pop();
        if negate {
            chi = Qf::not(chi);
        }
        self.emitted.push((positive, Conjunct::new(guard, count, chi)));
    }
}

fn quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False | Formula::Atom { .. } | Formula::Equal(..) => true,
        Formula::Not(g) => quantifier_free(g),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().all(quantifier_free),
        Formula::Implies(a, b) | Formula::Iff(a, b) => quantifier_free(a) && quantifier_free(b),
        Formula::Exists { .. } | Formula::Forall { .. } => false,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NormalFormOptions {
    /// Emit top-level conjuncts already of the shape
    /// `forall x1..xk (guard -> [!]exists[c] x{k+1} body)` directly instead of
    /// naming them with fresh predicates.
    pub recognize_guarded: bool,
}

/// Normal form of a fluted sentence. The output's width is at least 2.
pub fn to_normal_form(s: &Formula) -> Result<NormalForm, NormalFormError> {
    to_normal_form_with(s, NormalFormOptions::default())
}

pub fn to_normal_form_with(s: &Formula, options: NormalFormOptions) -> Result<NormalForm, NormalFormError> {
    if !s.is_sentence() {
        return Err(NormalFormError::NotSentence(s.free_variables()));
    }
    let report = classify_fragment(s);
    if !report.is_fluted {
        return Err(NormalFormError::NotFluted(report.offending_atoms));
    }
    let mut sig = Signature::new();
    for (n, a) in s.predicates() {
        sig.declare(&n, a).expect("formula predicates have one arity each");
    }
    let mut b = Builder { sig, fresh: BTreeMap::new(), shared: HashMap::new(), emitted: Vec::new(), vars: Vec::new() };
    let top: Vec<&Formula> = match s {
        Formula::And(parts) => parts.iter().collect(),
        f => vec![f],
    };
    let mut rest = Vec::new();
    for part in top {
        if options.recognize_guarded && Builder::recognizable(part, 0) {
            b.emit_direct(part);
        } else {
            rest.push(b.abstract_formula(part));
        }
    }
    let residue = Qf::and(rest);
    let width = report.variable_width.max(2);
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (pos, c) in b.emitted {
        if pos {
            positive.push(c);
        } else {
            negative.push(c);
        }
    }
    Ok(NormalForm {
        width,
        positive,
        negative,
        signature: b.sig,
        fresh: b.fresh,
        residue,
        nullary: BTreeMap::new(),
    })
}

/// Splits on the values of the nullary predicates. Each branch is free of
/// nullary predicates; the input is satisfiable iff some branch is. Guards
/// that become false drop their conjunct.
pub fn branch_nullary(nf: &NormalForm) -> Vec<NormalForm> {
    let names = nf.nullary_predicates();
    let mut out = Vec::new();
    let mut values = BTreeMap::new();
    enumerate(nf, &names, 0, &mut values, &mut out);
    out
}

fn enumerate(
    nf: &NormalForm,
    names: &[String],
    i: usize,
    values: &mut BTreeMap<String, bool>,
    out: &mut Vec<NormalForm>,
) {
    if nf.residue.eval_nullary(values) == Some(false) {
        return;
    }
    if i == names.len() {
        out.push(apply_branch(nf, values));
        return;
    }
    for v in [true, false] {
        values.insert(names[i].clone(), v);
        enumerate(nf, names, i + 1, values, out);
    }
    values.remove(&names[i]);
}

fn apply_branch(nf: &NormalForm, values: &BTreeMap<String, bool>) -> NormalForm {
    let sub = |cs: &[Conjunct]| -> Vec<Conjunct> {
        cs.iter()
            .map(|c| Conjunct::new(c.guard.substitute(values), c.count, c.body.substitute(values)))
            .filter(|c| c.guard != Qf::False)
            .collect()
    };
    let mut signature = nf.signature.clone();
    let mut nullary = nf.nullary.clone();
    for (n, v) in values {
        signature.remove(n);
        nullary.insert(n.clone(), *v);
    }
    NormalForm {
        width: nf.width,
        positive: sub(&nf.positive),
        negative: sub(&nf.negative),
        signature,
        fresh: nf.fresh.clone(),
        residue: Qf::True,
        nullary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_formula_infer;

    const ORCHESTRA: &str = "forall x1 (orch(x1) -> exists[0+2] x2 (pers(x2) & \
        exists x3 (first_viol(x3) & hires_to_play(x1, x2, x3))))";

    fn nf(text: &str) -> NormalForm {
        to_normal_form(&parse_formula_infer(text).unwrap().0).unwrap()
    }

    #[test]
    fn orchestra_shape() {
        let n = nf(ORCHESTRA);
        assert_eq!(n.width, 3);
        assert_eq!(n.positive.len() + n.negative.len(), 6);
        let arities: Vec<usize> = n.fresh.values().map(|d| d.arity).collect();
        assert_eq!(arities, vec![0, 1, 2]);
        assert_eq!(branch_nullary(&n).len(), 1);
    }

    #[test]
    fn universal_becomes_negative_conjunct() {
        let branches = branch_nullary(&nf("forall x1 (p(x1))"));
        assert_eq!(branches.len(), 1);
        let b = &branches[0];
        assert!(b.positive.is_empty());
        assert_eq!(b.negative, vec![Conjunct::new(Qf::True, CountSpec::some(), Qf::not(Qf::pred("p", 1)))]);
    }

    #[test]
    fn axiom_of_infinity() {
        let branches = branch_nullary(&nf("!exists[0+1] x (true)"));
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].negative, vec![Conjunct::new(Qf::True, CountSpec::periodic(0, 1), Qf::True)]);
        assert!(branches[0].positive.is_empty());
    }

    #[test]
    fn residue_contradiction() {
        assert!(branch_nullary(&nf("a & !a")).is_empty());
        assert!(branch_nullary(&nf("a & b")).len() == 1);
        assert!(branch_nullary(&nf("a | b")).len() <= 4);
        assert_eq!(branch_nullary(&nf("a | b")).len(), 3);
    }

    #[test]
    fn guarded_conjuncts_recognised() {
        let opts = NormalFormOptions { recognize_guarded: true };
        let (f, _) = parse_formula_infer(
            "forall x (p(x) -> exists[1+2] y (r(x,y))) & forall x (forall y (r(x,y) -> p(y))) & exists x (p(x))",
        )
        .unwrap();
        let n = to_normal_form_with(&f, opts).unwrap();
        assert!(n.fresh.is_empty());
        assert_eq!(n.residue, Qf::True);
        assert_eq!(n.positive.len(), 2);
        assert_eq!(n.negative.len(), 1);
        assert_eq!(n.negative[0].body, Qf::not(Qf::or(vec![Qf::not(Qf::pred("r", 2)), Qf::pred("p", 1)])));
        let orch = to_normal_form_with(&parse_formula_infer(ORCHESTRA).unwrap().0, opts).unwrap();
        assert_eq!(orch.fresh.len(), 1);
        assert_eq!(orch.width, 3);
    }

    #[test]
    fn rejects_non_fluted_and_open() {
        let (f, _) = parse_formula_infer("forall x (r(x,x))").unwrap();
        assert!(matches!(to_normal_form(&f), Err(NormalFormError::NotFluted(_))));
        let f = Formula::atom("p", &["y"]);
        assert!(matches!(to_normal_form(&f), Err(NormalFormError::NotSentence(_))));
    }

    #[test]
    fn to_formula_is_fluted() {
        for b in branch_nullary(&nf(ORCHESTRA)) {
            let f = b.to_formula();
            assert!(f.is_sentence());
            assert!(classify_fragment(&f).is_fluted);
        }
    }

    #[test]
    fn expansion_satisfies_normal_form() {
        let (f, sig) = parse_formula_infer("forall x (p(x) <-> exists y (r(x,y) & !p(y)))").unwrap();
        let n = to_normal_form(&f).unwrap();
        let m = crate::modeltools::brute_force_search(&f, &sig, 3).unwrap().unwrap();
        let branches = branch_nullary(&n);
        assert!(branches.iter().any(|b| evaluate(&b.expand_fresh(&m), &b.to_formula(), &[])));
    }
}
