//! Variable reduction for normal forms of width three and more, model
//! lifting, and the decision procedure for arbitrary width.
//!
//! One reduction step turns a width `l + 1` normal form into a width `l`
//! one. For each `l`-type `P` a predicate `q_P` of arity `l - 1` marks the
//! tuples `b` extended on the left to `P` by some element; for each pair
//! `(P, T)` with `T` an `(l + 1)`-type, `s_P_T(b, c)` says that the elements
//! extending `b` to `P` see `c` through `T`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diophantine::{SolveStats, SolverConfig};
use crate::modeltools::{all_tuples, evaluate, Structure};
use crate::normalform::{branch_nullary, to_normal_form_with, Conjunct, NormalForm, NormalFormError, NormalFormOptions, Qf};
use crate::sat2::{build_model, decide2_with, EncodeOptions, EncodingStats, Sat2Error, Witness};
use crate::syntax::{CountSpec, Formula, Signature};
use crate::typespace::{
    atom_basis, compute_ftp, enumerate_types, restrict_type, AtomBasis, BasisAtom, CompiledQf, FlutedType, TypeError,
};
use crate::ResourceCap;

#[derive(Debug, Error)]
pub enum DecideError {
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Sat2(Sat2Error),
    #[error(transparent)]
    Cap(#[from] ResourceCap),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<Sat2Error> for DecideError {
    fn from(e: Sat2Error) -> Self {
        match e {
            Sat2Error::Cap(c) => DecideError::Cap(c),
            Sat2Error::Type(t) => DecideError::Type(t),
            e => DecideError::Sat2(e),
        }
    }
}

/// How the left-extension predicates are indexed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ReductionMode {
    /// One `q` per `l`-type and one `s` per pair of an `l`-type and an
    /// `(l + 1)`-type.
    Types,
    /// One `q` per realizable vector of guard values and one `s` per such
    /// vector and assignment to the full-arity predicates. Bodies are
    /// rewritten over the lower atoms, so `s` needs no consistency axioms.
    #[default]
    Classes,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ReduceOptions {
    pub mode: ReductionMode,
    /// Omit `s` predicates that a `!exists` (or `exists[=0]`) conjunct forbids outright.
    pub prune: bool,
}

/// What tuples `a b` a `q` predicate stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ClassKey {
    Type(FlutedType),
    Guards(Vec<bool>),
}

#[derive(Clone, Debug)]
pub struct ReductionClass {
    pub key: ClassKey,
    pub q: String,
}

#[derive(Clone, Debug)]
pub struct SPredicate {
    pub name: String,
    pub class: usize,
    /// Values of the full-arity predicates, bit `k` for `ReductionStep::top[k]`.
    pub top: u128,
    /// The whole `(l + 1)`-type in [`ReductionMode::Types`].
    pub full: Option<FlutedType>,
}

/// Bookkeeping for one reduction from width `source_width` to `source_width - 1`.
#[derive(Clone, Debug)]
pub struct ReductionStep {
    pub source_width: usize,
    pub source_signature: Signature,
    pub target_signature: Signature,
    pub mode: ReductionMode,
    pub classes: Vec<ReductionClass>,
    pub s: Vec<SPredicate>,
    /// Distinct non-constant guards, compiled over `basis_lo` (class mode).
    pub guards: Vec<CompiledQf>,
    /// Full-arity predicates of the source, with their index in `basis_hi`.
    pub top: Vec<(usize, String)>,
    pub basis_lo: AtomBasis,
    pub basis_hi: AtomBasis,
    index: HashMap<ClassKey, usize>,
}

impl ReductionStep {
    /// The class of an `l`-type, if any conjunct applies to it.
    pub fn class_of(&self, p: FlutedType) -> Option<usize> {
        let key = match self.mode {
            ReductionMode::Types => ClassKey::Type(p),
            ReductionMode::Classes => ClassKey::Guards(self.guards.iter().map(|g| g.eval(p)).collect()),
        };
        self.index.get(&key).copied()
    }

    fn top_bits(&self, t: FlutedType) -> u128 {
        self.top.iter().enumerate().fold(0, |acc, (k, (i, _))| if t.get(*i) { acc | 1 << k } else { acc })
    }
}

fn unique_name(sig: &Signature, base: String) -> String {
    if sig.contains(&base) {
        sig.fresh_name(&format!("{base}_"))
    } else {
        base
    }
}

fn is_forbid(c: &Conjunct, positive: bool) -> bool {
    if positive {
        c.count == CountSpec::exactly(0)
    } else {
        c.count.is_plain_exists()
    }
}

fn exactly_one(atoms: &[Qf]) -> Qf {
    let mut parts = vec![Qf::or(atoms.to_vec())];
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            parts.push(Qf::or(vec![Qf::not(atoms[i].clone()), Qf::not(atoms[j].clone())]));
        }
    }
    Qf::and(parts)
}

/// Replaces atoms of arity `arity` by the values in `bits` (indexed like `top`).
fn fix_top(phi: &Qf, top: &[(usize, String)], arity: usize, bits: u128) -> Qf {
    match phi {
        Qf::Pred(n, a) if *a == arity => {
            let k = top.iter().position(|(_, t)| t == n).expect("full-arity predicate is listed");
            if bits >> k & 1 == 1 {
                Qf::True
            } else {
                Qf::False
            }
        }
        Qf::Not(g) => Qf::not(fix_top(g, top, arity, bits)),
        Qf::And(gs) => Qf::and(gs.iter().map(|g| fix_top(g, top, arity, bits)).collect()),
        Qf::Or(gs) => Qf::or(gs.iter().map(|g| fix_top(g, top, arity, bits)).collect()),
        Qf::Iff(a, b) => Qf::iff(fix_top(a, top, arity, bits), fix_top(b, top, arity, bits)),
        other => other.clone(),
    }
}

const GUARD_SEARCH_NODES: u64 = 1 << 22;

/// Distinct value vectors of `guards` over the types of some basis, by a
/// search over the atoms they mention that stops once every guard is decided.
fn guard_vectors(guards: &[CompiledQf]) -> Result<Vec<Vec<bool>>, ResourceCap> {
    let mut mask = 0u128;
    for g in guards {
        g.atoms(&mut mask);
    }
    let order: Vec<usize> = (0..128).filter(|i| mask >> i & 1 == 1).collect();
    let mut found = BTreeSet::new();
    let mut nodes = 0u64;
    let mut stack = vec![(FlutedType(0), 0u128, 0usize)];
    while let Some((t, known, depth)) = stack.pop() {
        nodes += 1;
        if nodes > GUARD_SEARCH_NODES {
            return Err(ResourceCap(format!("guard class search exceeded {GUARD_SEARCH_NODES} nodes")));
        }
        let values: Vec<Option<bool>> = guards.iter().map(|g| g.eval_partial(t, known)).collect();
        if values.iter().all(Option::is_some) {
            found.insert(values.into_iter().map(|v| v.unwrap()).collect::<Vec<bool>>());
            continue;
        }
        let i = order[depth];
        let known = known | 1 << i;
        stack.push((t.with(i, true), known, depth + 1));
        stack.push((t.with(i, false), known, depth + 1));
    }
    Ok(found.into_iter().collect())
}

/// Removes one variable from a nullary-free normal form of width at least 3.
pub fn reduce_once(nf: &NormalForm, opts: ReduceOptions) -> Result<(NormalForm, ReductionStep), DecideError> {
    let l = nf.width - 1;
    assert!(l >= 2, "reduce_once needs width at least 3");
    if let Some(n) = nf.nullary_predicates().into_iter().next() {
        return Err(Sat2Error::Nullary(n).into());
    }
    let sig = &nf.signature;
    let lo = atom_basis(sig, l);
    let hi = atom_basis(sig, l + 1);
    let top: Vec<(usize, String)> = hi
        .top_atoms()
        .filter_map(|i| match &hi.atoms()[i] {
            BasisAtom::Pred { name, .. } => Some((i, name.clone())),
            BasisAtom::Equality => None,
        })
        .collect();
    if top.len() > TOP_CAP {
        return Err(TypeError::BasisTooLarge { size: top.len(), cap: TOP_CAP }.into());
    }

    let compile = |list: &[Conjunct]| -> Result<Vec<_>, TypeError> {
        list.iter().map(|c| Ok((lo.compile(&c.guard)?, hi.compile(&c.body)?))).collect()
    };
    let pos = compile(&nf.positive)?;
    let neg = compile(&nf.negative)?;

    let mut target = Signature::new();
    for (n, a) in sig.iter() {
        if a <= l {
            target.declare(n, a).expect("copied from a signature");
        }
    }

    // Class keys with a witness type used to evaluate the guards.
    let mut distinct_guards: Vec<Qf> = Vec::new();
    for c in nf.positive.iter().chain(&nf.negative) {
        if !matches!(c.guard, Qf::True | Qf::False) && !distinct_guards.contains(&c.guard) {
            distinct_guards.push(c.guard.clone());
        }
    }
    let guards: Vec<CompiledQf> = match opts.mode {
        ReductionMode::Types => Vec::new(),
        ReductionMode::Classes => distinct_guards.iter().map(|g| lo.compile(g)).collect::<Result<_, _>>()?,
    };
    let keys: Vec<ClassKey> = match opts.mode {
        ReductionMode::Types => enumerate_types(&lo)?.into_iter().map(ClassKey::Type).collect(),
        ReductionMode::Classes => guard_vectors(&guards)?.into_iter().map(ClassKey::Guards).collect(),
    };
    let guard_holds = |key: &ClassKey, c: &Conjunct, g: &CompiledQf| match key {
        ClassKey::Type(p) => g.eval(*p),
        ClassKey::Guards(v) => match &c.guard {
            Qf::True => true,
            Qf::False => false,
            guard => v[distinct_guards.iter().position(|d| d == guard).expect("guard was collected")],
        },
    };
    let class_formula = |key: &ClassKey| match key {
        ClassKey::Type(p) => lo.type_formula(*p),
        ClassKey::Guards(v) => Qf::and(
            distinct_guards
                .iter()
                .zip(v)
                .map(|(g, &b)| if b { g.clone() } else { Qf::not(g.clone()) })
                .collect(),
        ),
    };

    let mut classes = Vec::new();
    let mut index = HashMap::new();
    let mut s = Vec::new();
    let hi_types = match opts.mode {
        ReductionMode::Types => enumerate_types(&hi)?,
        ReductionMode::Classes => Vec::new(),
    };
    for key in keys {
        let applies = nf.positive.iter().zip(&pos).chain(nf.negative.iter().zip(&neg)).any(|(c, (g, _))| guard_holds(&key, c, g));
        if !applies && opts.mode == ReductionMode::Classes {
            continue;
        }
        let label = match &key {
            ClassKey::Type(p) => p.0.to_string(),
            ClassKey::Guards(v) => v.iter().map(|&b| if b { '1' } else { '0' }).collect(),
        };
        let q = unique_name(&target, format!("q{l}_{label}"));
        target.declare(&q, l - 1).expect("fresh");
        let idx = classes.len();
        let forbids = |positive: bool, list: &[Conjunct], comp: &[(CompiledQf, CompiledQf)]| -> Vec<usize> {
            list.iter()
                .zip(comp)
                .enumerate()
                .filter(|(_, (c, (g, _)))| opts.prune && is_forbid(c, positive) && guard_holds(&key, c, g))
                .map(|(i, _)| i)
                .collect()
        };
        let pos_forbids = forbids(true, &nf.positive, &pos);
        let neg_forbids = forbids(false, &nf.negative, &neg);
        match &key {
            ClassKey::Type(_) => {
                for &t in &hi_types {
                    let dead = pos_forbids.iter().map(|&i| &pos[i].1).chain(neg_forbids.iter().map(|&i| &neg[i].1)).any(|b| b.eval(t));
                    if dead {
                        continue;
                    }
                    let name = unique_name(&target, format!("s{l}_{label}_{}", t.0));
                    target.declare(&name, l).expect("fresh");
                    let bits = top.iter().enumerate().fold(0, |acc, (k, (i, _))| if t.get(*i) { acc | 1 << k } else { acc });
                    s.push(SPredicate { name, class: idx, top: bits, full: Some(t) });
                }
            }
            ClassKey::Guards(_) => {
                for bits in 0..1u128 << top.len() {
                    let dead = pos_forbids
                        .iter()
                        .map(|&i| &nf.positive[i].body)
                        .chain(neg_forbids.iter().map(|&i| &nf.negative[i].body))
                        .any(|b| fix_top(b, &top, l + 1, bits) == Qf::True);
                    if dead {
                        continue;
                    }
                    let name = unique_name(&target, format!("s{l}_{label}_{bits}"));
                    target.declare(&name, l).expect("fresh");
                    s.push(SPredicate { name, class: idx, top: bits, full: None });
                }
            }
        }
        index.insert(key.clone(), idx);
        classes.push(ReductionClass { key, q });
    }

    let some = CountSpec::some();
    let members: Vec<Vec<&SPredicate>> =
        (0..classes.len()).map(|i| s.iter().filter(|sp| sp.class == i).collect()).collect();
    let atom = |sp: &SPredicate| Qf::Pred(sp.name.clone(), l);
    // The reduced body of `body` for class `i`.
    let transfer = |i: usize, compiled: &CompiledQf, body: &Qf| -> Qf {
        Qf::or(
            members[i]
                .iter()
                .filter_map(|sp| match sp.full {
                    Some(t) => compiled.eval(t).then(|| atom(sp)),
                    None => {
                        // Lower suffix atoms and `=` keep their meaning on the
                        // last `l` variables, so the rest is read at depth `l` as is.
                        let rest = fix_top(body, &top, l + 1, sp.top);
                        (rest != Qf::False).then(|| Qf::and(vec![atom(sp), rest]))
                    }
                })
                .collect(),
        )
    };
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        let q = Qf::Pred(class.q.clone(), l - 1);
        // psi1: every tuple of the class is marked by q on its tail
        negative.push(Conjunct::new(Qf::True, some, Qf::and(vec![class_formula(&class.key), Qf::not(q.clone())])));
        // psi2: s agrees with the tail of its type, and exactly one s is chosen below q
        for sp in &members[i] {
            if let Some(t) = sp.full {
                let tail = lo.type_formula(restrict_type(t, &hi, &lo));
                negative.push(Conjunct::new(Qf::True, some, Qf::and(vec![atom(sp), Qf::not(tail)])));
            }
        }
        let choices: Vec<Qf> = members[i].iter().map(|sp| atom(sp)).collect();
        negative.push(Conjunct::new(q.clone(), some, Qf::not(exactly_one(&choices))));
    }
    let mut push = |positive_side: bool, c: Conjunct| {
        let trivial = c.body == Qf::False && c.count.contains(0) == positive_side;
        if !trivial {
            if positive_side {
                positive.push(c);
            } else {
                negative.push(c);
            }
        }
    };
    for (i, class) in classes.iter().enumerate() {
        // psi3 / psi4: counting requirements transferred to the s predicates
        let q = Qf::Pred(class.q.clone(), l - 1);
        for (c, (g, b)) in nf.positive.iter().zip(&pos) {
            if guard_holds(&class.key, c, g) {
                push(true, Conjunct::new(q.clone(), c.count, transfer(i, b, &c.body)));
            }
        }
        for (c, (g, b)) in nf.negative.iter().zip(&neg) {
            if guard_holds(&class.key, c, g) {
                push(false, Conjunct::new(q.clone(), c.count, transfer(i, b, &c.body)));
            }
        }
    }
    let reduced = NormalForm {
        width: l,
        positive,
        negative,
        signature: target.clone(),
        fresh: BTreeMap::new(),
        residue: Qf::True,
        nullary: nf.nullary.clone(),
    };
    let step = ReductionStep {
        source_width: l + 1,
        source_signature: sig.clone(),
        target_signature: target,
        mode: opts.mode,
        classes,
        s,
        guards,
        top,
        basis_lo: lo,
        basis_hi: hi,
        index,
    };
    Ok((reduced, step))
}

/// Largest number of full-arity predicates the class reduction enumerates.
const TOP_CAP: usize = 16;

/// Turns a model of the reduced sentence into a model of the source over the
/// same domain by reading the full-arity rows off the `s` predicates.
pub fn lift_model(reduced: &Structure, step: &ReductionStep) -> Result<Structure, DecideError> {
    let l = step.source_width - 1;
    let n = reduced.size();
    let mut out = Structure::new(n, &step.source_signature);
    for (name, a) in step.source_signature.iter() {
        if a <= l {
            for t in reduced.tuples(name) {
                out.set(name, &t, true);
            }
        }
    }
    let mut members: Vec<Vec<&SPredicate>> = vec![Vec::new(); step.classes.len()];
    for sp in &step.s {
        members[sp.class].push(sp);
    }
    let mut full = vec![0; l + 1];
    for ab in all_tuples(n, l) {
        let p = compute_ftp(reduced, &step.basis_lo, &ab);
        let Some(class) = step.class_of(p) else {
            continue;
        };
        full[..l].copy_from_slice(&ab);
        for c in 0..n {
            full[l] = c;
            let mut chosen = members[class].iter().filter(|sp| reduced.holds(&sp.name, &full[1..]));
            let (Some(sp), None) = (chosen.next(), chosen.next()) else {
                return Err(DecideError::Verification(format!("tuple {full:?}: no unique s predicate for its class")));
            };
            for (k, (_, name)) in step.top.iter().enumerate() {
                if sp.top >> k & 1 == 1 {
                    out.set(name, &full, true);
                }
            }
        }
    }
    Ok(out)
}

/// Interprets the `q` and `s` predicates of `step` in a model of the source
/// sentence, taking the least left extension of each class as exemplar.
pub fn expand_reduction(s: &Structure, step: &ReductionStep) -> Structure {
    let l = step.source_width - 1;
    let n = s.size();
    let mut out = Structure::new(n, &step.target_signature);
    for (name, a) in step.target_signature.iter() {
        if a <= l && s.relation(name).is_some() {
            for t in s.tuples(name) {
                out.set(name, &t, true);
            }
        }
    }
    let lookup: HashMap<(usize, u128), &str> = step
        .s
        .iter()
        .map(|sp| ((sp.class, sp.full.map_or(sp.top, |t| t.0)), sp.name.as_str()))
        .collect();
    let mut full = vec![0; l + 1];
    for b in all_tuples(n, l - 1) {
        let mut seen: Vec<usize> = Vec::new();
        for a in 0..n {
            full[0] = a;
            full[1..l].copy_from_slice(&b);
            let p = compute_ftp(s, &step.basis_lo, &full[..l]);
            let Some(class) = step.class_of(p) else {
                continue;
            };
            if seen.contains(&class) {
                continue;
            }
            seen.push(class);
            out.set(&step.classes[class].q, &b, true);
            for c in 0..n {
                full[l] = c;
                let t = compute_ftp(s, &step.basis_hi, &full);
                let key = match step.mode {
                    ReductionMode::Types => t.0,
                    ReductionMode::Classes => step.top_bits(t),
                };
                if let Some(name) = lookup.get(&(class, key)) {
                    out.set(name, &full[1..], true);
                }
            }
        }
    }
    out
}

/// Groups `l`-tuples `a b` by `b` and type; checks that members of a group
/// see every `c` through the same `(l + 1)`-type.
pub fn is_locally_homogeneous(s: &Structure, l: usize) -> bool {
    let sig = s.signature();
    let lo = atom_basis(&sig, l);
    let hi = atom_basis(&sig, l + 1);
    let n = s.size();
    let mut full = vec![0; l + 1];
    for b in all_tuples(n, l - 1) {
        let mut rows: HashMap<FlutedType, Vec<FlutedType>> = HashMap::new();
        for a in 0..n {
            full[0] = a;
            full[1..l].copy_from_slice(&b);
            let p = compute_ftp(s, &lo, &full[..l]);
            let row: Vec<FlutedType> = (0..n)
                .map(|c| {
                    full[l] = c;
                    compute_ftp(s, &hi, &full)
                })
                .collect();
            match rows.get(&p) {
                Some(r) if *r != row => return false,
                Some(_) => {}
                None => {
                    rows.insert(p, row);
                }
            }
        }
    }
    true
}

/// Copies, within each group of [`is_locally_homogeneous`], the full-arity
/// row of the least member to the others.
pub fn locally_homogenize(s: &Structure, l: usize) -> Structure {
    let sig = s.signature();
    let lo = atom_basis(&sig, l);
    let n = s.size();
    let top: Vec<String> = sig.iter().filter(|&(_, a)| a == l + 1).map(|(n, _)| n.to_string()).collect();
    let mut out = s.clone();
    let mut src = vec![0; l + 1];
    let mut dst = vec![0; l + 1];
    for b in all_tuples(n, l - 1) {
        let mut exemplar: HashMap<FlutedType, usize> = HashMap::new();
        for a in 0..n {
            dst[0] = a;
            dst[1..l].copy_from_slice(&b);
            let p = compute_ftp(s, &lo, &dst[..l]);
            let e = *exemplar.entry(p).or_insert(a);
            if e == a {
                continue;
            }
            src[..l].copy_from_slice(&dst[..l]);
            src[0] = e;
            for c in 0..n {
                src[l] = c;
                dst[l] = c;
                for r in &top {
                    out.set(r, &dst, s.holds(r, &src));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DecideConfig {
    pub finite: bool,
    pub build_witness: bool,
    /// Explore nullary branches sequentially.
    pub deterministic: bool,
    pub reduce: ReduceOptions,
    pub encode: EncodeOptions,
    #[serde(skip)]
    pub solver: SolverConfig,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig {
            finite: true,
            build_witness: true,
            deterministic: false,
            reduce: ReduceOptions::default(),
            encode: EncodeOptions::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DecideStats {
    pub branches: usize,
    pub width: usize,
    /// Widths and sizes of the normal forms met while reducing.
    pub reductions: Vec<ReductionStats>,
    pub encodings: Vec<EncodingStats>,
    pub solver_nodes: u64,
    pub lp_calls: u64,
    pub ilp_nodes: u64,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionStats {
    pub width: usize,
    pub q_predicates: usize,
    pub s_predicates: usize,
    pub conjuncts: usize,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub satisfiable: bool,
    /// A finite model over the input's signature, or an abstract model when
    /// the input has width at most 2 and only infinite solutions were found.
    pub witness: Option<Witness>,
    pub stats: DecideStats,
}

struct BranchResult {
    sat: bool,
    witness: Option<Witness>,
    encoding: EncodingStats,
    reductions: Vec<ReductionStats>,
    solver: SolveStats,
}

/// Reduces one nullary-free normal form to width 2, decides it, and lifts
/// the witness back (into the branch's signature) when requested.
pub fn decide_normal_form(nf: &NormalForm, cfg: &DecideConfig) -> Result<(bool, Option<Witness>), DecideError> {
    let r = decide_branch(nf, cfg)?;
    Ok((r.sat, r.witness))
}

fn decide_branch(nf: &NormalForm, cfg: &DecideConfig) -> Result<BranchResult, DecideError> {
    let mut cur = nf.clone();
    let mut steps = Vec::new();
    let mut reductions = Vec::new();
    while cur.width > 2 {
        let (next, step) = reduce_once(&cur, cfg.reduce)?;
        reductions.push(ReductionStats {
            width: next.width,
            q_predicates: step.classes.len(),
            s_predicates: step.s.len(),
            conjuncts: next.positive.len() + next.negative.len(),
        });
        steps.push(step);
        cur = next;
    }
    let d = decide2_with(&cur, cfg.finite, cfg.encode, &cfg.solver)?;
    let mut witness = None;
    if let (Some(a), true) = (&d.assignment, cfg.build_witness) {
        match build_model(&d.encoding, a)? {
            Witness::Finite(mut m) => {
                for step in steps.iter().rev() {
                    m = lift_model(&m, step)?;
                }
                witness = Some(Witness::Finite(m));
            }
            w @ Witness::Abstract(_) if steps.is_empty() => witness = Some(w),
            Witness::Abstract(_) => {}
        }
    }
    Ok(BranchResult {
        sat: d.assignment.is_some(),
        witness,
        encoding: d.encoding.stats.clone(),
        reductions,
        solver: d.stats,
    })
}

/// Decides (finite) satisfiability of a fluted sentence. Finite witnesses are
/// checked against the input before being returned.
pub fn decide(s: &Formula, cfg: &DecideConfig) -> Result<Verdict, DecideError> {
    let start = Instant::now();
    let nf = to_normal_form_with(s, NormalFormOptions { recognize_guarded: true })?;
    let branches = branch_nullary(&nf);
    let run = |b: &NormalForm| decide_branch(b, cfg);
    let results: Vec<Result<BranchResult, DecideError>> = if cfg.deterministic {
        branches.iter().map(run).collect()
    } else {
        branches.par_iter().map(run).collect()
    };
    let mut stats = DecideStats { branches: branches.len(), width: nf.width, ..Default::default() };
    let mut first_error = None;
    let mut found: Option<(usize, BranchResult)> = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                stats.encodings.push(r.encoding.clone());
                stats.solver_nodes += r.solver.nodes;
                stats.lp_calls += r.solver.lp_calls;
                stats.ilp_nodes += r.solver.ilp_nodes;
                if stats.reductions.is_empty() {
                    stats.reductions = r.reductions.clone();
                }
                if r.sat && found.is_none() {
                    found = Some((i, r));
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    stats.elapsed_ms = start.elapsed().as_millis();
    let Some((i, r)) = found else {
        if let Some(e) = first_error {
            return Err(e);
        }
        return Ok(Verdict { satisfiable: false, witness: None, stats });
    };
    let witness = match r.witness {
        Some(Witness::Finite(m)) => {
            let b = &branches[i];
            let mut full = m;
            for (n, v) in &b.nullary {
                if full.relation(n).is_none() {
                    full.add_predicate(n, 0);
                }
                full.set(n, &[], *v);
            }
            let original: Signature = {
                let mut sig = Signature::new();
                for (n, a) in s.predicates() {
                    sig.declare(&n, a).expect("formula predicates have one arity each");
                }
                sig
            };
            let model = full.reduct(&original);
            if !evaluate(&model, s, &[]) {
                return Err(DecideError::Verification("witness does not satisfy the input".into()));
            }
            Some(Witness::Finite(model))
        }
        w => w,
    };
    Ok(Verdict { satisfiable: true, witness, stats })
}
