//! Finite structures, a model checker for counting first-order logic,
//! exhaustive model search and structure serialization.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalform::{var_name, NormalForm};
use crate::syntax::{CountSpec, Formula, Signature};
use crate::ResourceCap;

/// Truth table of one predicate over a domain of size `n`, indexed
/// lexicographically (`n^arity` entries; one entry for nullary predicates).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    pub arity: usize,
    bits: Vec<bool>,
}

/// A finite structure over the domain `0..size`. Equality is never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Structure {
    size: usize,
    relations: BTreeMap<String, Relation>,
}

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("cannot read or write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed structure JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("predicate `{pred}`: tuple {tuple:?} is outside the domain of size {size}")]
    OutOfRange { pred: String, tuple: Vec<usize>, size: usize },
    #[error("predicate `{pred}` has arity {arity} but a tuple of length {len}")]
    ArityMismatch { pred: String, arity: usize, len: usize },
    #[error("nullary predicate `{0}` needs a boolean `value`")]
    MissingValue(String),
    #[error("domain must be nonempty")]
    EmptyDomain,
}

fn pow(n: usize, k: usize) -> usize {
    n.checked_pow(k as u32).expect("relation too large")
}

impl Structure {
    /// The structure of the given size interpreting every predicate of `sig` as empty.
    pub fn new(size: usize, sig: &Signature) -> Self {
        let mut s = Structure { size, relations: BTreeMap::new() };
        for (name, arity) in sig.iter() {
            s.add_predicate(name, arity);
        }
        s
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Adds an empty predicate; an existing predicate of the same name is kept.
    pub fn add_predicate(&mut self, name: &str, arity: usize) {
        let size = self.size;
        self.relations
            .entry(name.to_string())
            .or_insert_with(|| Relation { arity, bits: vec![false; pow(size, arity)] });
    }

    pub fn remove_predicate(&mut self, name: &str) {
        self.relations.remove(name);
    }

    pub fn signature(&self) -> Signature {
        Signature::from_pairs(self.relations.iter().map(|(n, r)| (n.as_str(), r.arity)))
            .expect("relations have unique names")
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(n, r)| (n.as_str(), r))
    }

    fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &e| {
            debug_assert!(e < self.size);
            acc * self.size + e
        })
    }

    /// Truth of `pred(tuple)`; undeclared predicates are empty.
    pub fn holds(&self, pred: &str, tuple: &[usize]) -> bool {
        match self.relations.get(pred) {
            Some(r) => {
                debug_assert_eq!(r.arity, tuple.len());
                r.bits[self.index(tuple)]
            }
            None => false,
        }
    }

    /// Sets `pred(tuple)`; panics if `pred` is undeclared.
    pub fn set(&mut self, pred: &str, tuple: &[usize], value: bool) {
        let i = self.index(tuple);
        let r = self.relations.get_mut(pred).unwrap_or_else(|| panic!("undeclared predicate {pred}"));
        assert_eq!(r.arity, tuple.len(), "arity mismatch for {pred}");
        r.bits[i] = value;
    }

    /// All tuples in the relation, in lexicographic order.
    pub fn tuples(&self, pred: &str) -> Vec<Vec<usize>> {
        let Some(r) = self.relations.get(pred) else {
            return Vec::new();
        };
        all_tuples(self.size, r.arity).filter(|t| r.bits[self.index(t)]).collect()
    }

    /// Keeps only the predicates declared in `sig`.
    pub fn reduct(&self, sig: &Signature) -> Structure {
        Structure {
            size: self.size,
            relations: self.relations.iter().filter(|(n, _)| sig.contains(n)).map(|(n, r)| (n.clone(), r.clone())).collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let preds = self
            .relations
            .iter()
            .map(|(n, r)| {
                let p = if r.arity == 0 {
                    PredJson { arity: 0, tuples: None, value: Some(r.bits[0]) }
                } else {
                    PredJson { arity: r.arity, tuples: Some(self.tuples(n)), value: None }
                };
                (n.clone(), p)
            })
            .collect();
        serde_json::to_value(StructureJson { domain: self.size, preds }).expect("structure serialises")
    }

    pub fn from_json(text: &str) -> Result<Structure, StructureError> {
        let doc: StructureJson = serde_json::from_str(text)?;
        if doc.domain == 0 {
            return Err(StructureError::EmptyDomain);
        }
        let mut s = Structure { size: doc.domain, relations: BTreeMap::new() };
        for (name, p) in doc.preds {
            s.add_predicate(&name, p.arity);
            if p.arity == 0 {
                let v = p.value.ok_or_else(|| StructureError::MissingValue(name.clone()))?;
                s.set(&name, &[], v);
                continue;
            }
            for t in p.tuples.unwrap_or_default() {
                if t.len() != p.arity {
                    return Err(StructureError::ArityMismatch { pred: name, arity: p.arity, len: t.len() });
                }
                if t.iter().any(|&e| e >= s.size) {
                    return Err(StructureError::OutOfRange { pred: name, tuple: t, size: s.size });
                }
                s.set(&name, &t, true);
            }
        }
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct PredJson {
    arity: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tuples: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    value: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    domain: usize,
    preds: BTreeMap<String, PredJson>,
}

pub fn load_structure(path: impl AsRef<Path>) -> Result<Structure, StructureError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StructureError::Io { path: path.display().to_string(), source })?;
    Structure::from_json(&text)
}

pub fn save_structure(s: &Structure, path: impl AsRef<Path>) -> Result<(), StructureError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&s.to_json())?;
    fs::write(path, text + "\n").map_err(|source| StructureError::Io { path: path.display().to_string(), source })
}

/// All `k`-tuples over `0..n` in lexicographic order.
pub fn all_tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = if n == 0 && k > 0 { 0 } else { pow(n, k) };
    (0..total).map(move |mut i| {
        let mut t = vec![0; k];
        for slot in t.iter_mut().rev() {
            *slot = i % n;
            i /= n;
        }
        t
    })
}

/// Formula compiled against variable positions for repeated evaluation.
enum Node {
    Const(bool),
    Atom(String, Vec<usize>),
    Eq(usize, usize),
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
    Exists(CountSpec, Box<Node>),
    Forall(Box<Node>),
}

fn compile(f: &Formula, scope: &mut Vec<String>) -> Node {
    let slot = |v: &String, scope: &Vec<String>| {
        scope.iter().rposition(|s| s == v).unwrap_or_else(|| panic!("variable {v} is not bound"))
    };
    match f {
        Formula::True => Node::Const(true),
        Formula::False => Node::Const(false),
        Formula::Atom { pred, args } => Node::Atom(pred.clone(), args.iter().map(|a| slot(a, scope)).collect()),
        Formula::Equal(a, b) => Node::Eq(slot(a, scope), slot(b, scope)),
        Formula::Not(g) => Node::Not(Box::new(compile(g, scope))),
        Formula::And(fs) => Node::And(fs.iter().map(|g| compile(g, scope)).collect()),
        Formula::Or(fs) => Node::Or(fs.iter().map(|g| compile(g, scope)).collect()),
        Formula::Implies(a, b) => Node::Implies(Box::new(compile(a, scope)), Box::new(compile(b, scope))),
        Formula::Iff(a, b) => Node::Iff(Box::new(compile(a, scope)), Box::new(compile(b, scope))),
        Formula::Exists { count, var, body } => {
            scope.push(var.clone());
            let b = compile(body, scope);
            scope.pop();
            Node::Exists(*count, Box::new(b))
        }
        Formula::Forall { var, body } => {
            scope.push(var.clone());
            let b = compile(body, scope);
            scope.pop();
            Node::Forall(Box::new(b))
        }
    }
}

impl Node {
    fn eval(&self, s: &Structure, env: &mut Vec<usize>, buf: &mut Vec<usize>) -> bool {
        match self {
            Node::Const(b) => *b,
            Node::Atom(p, slots) => {
                let start = buf.len();
                buf.extend(slots.iter().map(|&i| env[i]));
                let v = s.holds(p, &buf[start..]);
                buf.truncate(start);
                v
            }
            Node::Eq(a, b) => env[*a] == env[*b],
            Node::Not(g) => !g.eval(s, env, buf),
            Node::And(gs) => gs.iter().all(|g| g.eval(s, env, buf)),
            Node::Or(gs) => gs.iter().any(|g| g.eval(s, env, buf)),
            Node::Implies(a, b) => !a.eval(s, env, buf) || b.eval(s, env, buf),
            Node::Iff(a, b) => a.eval(s, env, buf) == b.eval(s, env, buf),
            Node::Forall(body) => (0..s.size).all(|c| {
                env.push(c);
                let v = body.eval(s, env, buf);
                env.pop();
                v
            }),
            Node::Exists(count, body) => {
                // counting can stop early once the outcome is fixed
                let cap = match (count.period, count.admits_infinite) {
                    (1, _) => Some(count.base),
                    (0, _) => Some(count.base + 1),
                    _ => None,
                };
                let mut k = 0u64;
                for c in 0..s.size {
                    env.push(c);
                    if body.eval(s, env, buf) {
                        k += 1;
                    }
                    env.pop();
                    if cap.is_some_and(|m| k >= m) {
                        break;
                    }
                }
                count.contains(k)
            }
        }
    }
}

/// A formula prepared for repeated evaluation on structures.
pub struct Checker {
    node: Node,
    free: Vec<String>,
}

impl Checker {
    /// `free` lists the variables supplied by the environment, outermost first.
    pub fn new(f: &Formula, free: &[&str]) -> Self {
        let mut scope: Vec<String> = free.iter().map(|s| s.to_string()).collect();
        Checker { node: compile(f, &mut scope), free: scope }
    }

    pub fn sentence(f: &Formula) -> Self {
        Checker::new(f, &[])
    }

    pub fn eval(&self, s: &Structure, values: &[usize]) -> bool {
        assert_eq!(values.len(), self.free.len(), "environment does not match the free variables");
        let mut env = values.to_vec();
        self.node.eval(s, &mut env, &mut Vec::new())
    }
}

/// Evaluates `f` in `s` under `env`, which must bind every free variable.
pub fn evaluate(s: &Structure, f: &Formula, env: &[(&str, usize)]) -> bool {
    let names: Vec<&str> = env.iter().map(|e| e.0).collect();
    let values: Vec<usize> = env.iter().map(|e| e.1).collect();
    Checker::new(f, &names).eval(s, &values)
}

/// Largest number of relation bits enumerated per domain size.
pub const DEFAULT_SEARCH_BITS: usize = 24;

/// Searches structures of size `1..=max_size` over `sig` in canonical order
/// and returns the first model of `f`.
///
/// The canonical order enumerates domain sizes upwards and, within a size,
/// all interpretations as a binary counter over the relations in name order
/// and their tuples in lexicographic order.
pub fn brute_force_search(f: &Formula, sig: &Signature, max_size: usize) -> Result<Option<Structure>, ResourceCap> {
    brute_force_search_with(f, sig, max_size, DEFAULT_SEARCH_BITS)
}

pub fn brute_force_search_with(
    f: &Formula,
    sig: &Signature,
    max_size: usize,
    max_bits: usize,
) -> Result<Option<Structure>, ResourceCap> {
    // Relations are assigned one at a time in name order, most significant
    // first, so a depth-first walk meets structures in canonical order. A
    // top-level conjunct is checked as soon as all its predicates are fixed.
    let names: Vec<(String, usize)> = sig.iter().map(|(n, a)| (n.to_string(), a)).collect();
    let mut conjuncts = Vec::new();
    flatten_and(f, &mut conjuncts);
    let mut stages: Vec<Vec<Checker>> = (0..names.len().max(1)).map(|_| Vec::new()).collect();
    for c in conjuncts {
        let ready = c
            .predicates()
            .iter()
            .map(|(p, _)| names.iter().position(|(n, _)| n == p).unwrap_or(names.len()))
            .max()
            .unwrap_or(0)
            .min(stages.len() - 1);
        stages[ready].push(Checker::sentence(c));
    }
    for n in 1..=max_size {
        let slots: Vec<Vec<Vec<usize>>> = names.iter().map(|(_, a)| all_tuples(n, *a).collect()).collect();
        let total: usize = slots.iter().map(Vec::len).sum();
        if total > max_bits {
            return Err(ResourceCap(format!("brute force at size {n} needs {total} relation bits (limit {max_bits})")));
        }
        let mut s = Structure::new(n, sig);
        if names.is_empty() {
            if stages[0].iter().all(|c| c.eval(&s, &[])) {
                return Ok(Some(s));
            }
            continue;
        }
        if staged_search(&mut s, &names, &slots, &stages, 0) {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn flatten_and<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(fs) => fs.iter().for_each(|g| flatten_and(g, out)),
        g => out.push(g),
    }
}

fn staged_search(
    s: &mut Structure,
    names: &[(String, usize)],
    slots: &[Vec<Vec<usize>>],
    stages: &[Vec<Checker>],
    level: usize,
) -> bool {
    if level == names.len() {
        return true;
    }
    let name = &names[level].0;
    let k = slots[level].len();
    for mask in 0u64..(1u64 << k) {
        for (i, t) in slots[level].iter().enumerate() {
            s.set(name, t, mask >> (k - 1 - i) & 1 == 1);
        }
        if stages[level].iter().all(|c| c.eval(s, &[])) && staged_search(s, names, slots, stages, level + 1) {
            return true;
        }
    }
    false
}

/// Exhaustive search for models of `forall vars (conditions)`, where the
/// predicates of arity `vars.len() + 1` (the top predicates) only occur with
/// the argument list `vars` followed by one further variable.
///
/// Such conditions, at a fixed tuple for `vars`, only see that tuple's row of
/// the top predicates, so rows are chosen tuple by tuple instead of jointly.
/// The search is complete: it finds a model of size `<= max_size` whenever
/// one exists. `max_bits` bounds both the lower-arity bits and the row bits.
pub fn row_search(
    conditions: &[Formula],
    vars: &[&str],
    sig: &Signature,
    max_size: usize,
    max_bits: usize,
) -> Result<Option<Structure>, ResourceCap> {
    let w = vars.len() + 1;
    let checkers: Vec<Checker> = conditions.iter().map(|f| Checker::new(f, vars)).collect();
    let top: Vec<String> = sig.iter().filter(|&(_, a)| a == w).map(|(n, _)| n.to_string()).collect();
    let low_sig: Vec<(String, usize)> = sig.iter().filter(|&(_, a)| a < w).map(|(n, a)| (n.to_string(), a)).collect();
    if let Some((n, a)) = sig.iter().find(|&(_, a)| a > w) {
        panic!("predicate {n}/{a} exceeds the row width {w}");
    }
    for n in 1..=max_size {
        let low_slots: Vec<(String, Vec<usize>)> = low_sig
            .iter()
            .flat_map(|(name, a)| all_tuples(n, *a).map(move |t| (name.clone(), t)))
            .collect();
        let row_bits = top.len() * n;
        if low_slots.len() > max_bits || row_bits > max_bits {
            return Err(ResourceCap(format!(
                "row search at size {n} needs {} + {row_bits} bits (limit {max_bits})",
                low_slots.len()
            )));
        }
        let prefixes: Vec<Vec<usize>> = all_tuples(n, w - 1).collect();
        let mut s = Structure::new(n, sig);
        let mut tuple = vec![0; w];
        'low: for mask in 0u64..(1u64 << low_slots.len()) {
            for (i, (name, t)) in low_slots.iter().enumerate() {
                s.set(name, t, mask >> (low_slots.len() - 1 - i) & 1 == 1);
            }
            for b in &prefixes {
                tuple[..w - 1].copy_from_slice(b);
                let mut found = false;
                for row in 0u64..(1u64 << row_bits) {
                    for (k, name) in top.iter().enumerate() {
                        for c in 0..n {
                            tuple[w - 1] = c;
                            s.set(name, &tuple, row >> (row_bits - 1 - (k * n + c)) & 1 == 1);
                        }
                    }
                    if checkers.iter().all(|ch| ch.eval(&s, b)) {
                        found = true;
                        break;
                    }
                }
                if !found {
                    continue 'low;
                }
            }
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// [`row_search`] on a normal form; returns a model of the normal form itself
/// (fresh predicates included).
pub fn search_normal_form(nf: &NormalForm, max_size: usize) -> Result<Option<Structure>, ResourceCap> {
    let vars: Vec<String> = (1..nf.width).map(var_name).collect();
    let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
    let mut sig = nf.signature.clone();
    for n in nf.nullary.keys() {
        sig.declare(n, 0).expect("nullary names are unique");
    }
    row_search(&nf.conditions(), &vars, &sig, max_size, DEFAULT_SEARCH_BITS)
}
