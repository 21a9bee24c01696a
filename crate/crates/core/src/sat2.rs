//! Satisfiability of two-variable normal forms via linear systems over the
//! extended naturals.
//!
//! Variables: `x_P` counts elements of one-type `P`; `y_P_c` counts, for an
//! element of type `P`, the elements it sees through two-types of group `c`;
//! `i_P_r` / `j_P_t` are finite period counters. With [`Grouping::PerType`]
//! every two-type is its own group. [`Grouping::Cells`] merges two-types that
//! no constraint can tell apart for `P` (same endpoint, same equality bit,
//! same truth value of every relevant conjunct body) and drops two-types that
//! a universal constraint forbids outright.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::diophantine::{
    solve_with, Assignment, Clause, Cmp, Comparison, LinExpr, SolveMode, SolveStats, SolverConfig, System, Var,
};
use crate::ext::ExtNat;
use crate::modeltools::Structure;
use crate::normalform::{Conjunct, NormalForm};
use crate::syntax::{CountSpec, Signature};
use crate::typespace::{
    atom_basis, compute_ftp, compute_profile, enumerate_types, AtomBasis, BasisAtom, CompiledQf, FlutedType,
    Profile, Restriction, TypeError,
};
use crate::ResourceCap;

#[derive(Debug, Error)]
pub enum Sat2Error {
    #[error("expected a normal form of width 2, got width {0}")]
    Width(usize),
    #[error("nullary predicate `{0}` must be branched away first")]
    Nullary(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Cap(#[from] ResourceCap),
    #[error("verification failed: {0}")]
    Verification(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum Grouping {
    PerType,
    #[default]
    Cells,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EncodeOptions {
    pub grouping: Grouping,
    /// Fix to zero (or drop) groups forbidden by `!exists` conjuncts.
    pub prune: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { grouping: Grouping::Cells, prune: true }
    }
}

/// Maximum search nodes spent enumerating cells for one one-type.
const CELL_NODE_CAP: u64 = 20_000_000;
/// Limits across all one-types of one encoding.
const TOTAL_CELL_NODE_CAP: u64 = 200_000_000;
const TOTAL_CELL_CAP: usize = 2_000_000;

/// A group of two-types emitted by elements of one one-type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    /// Some member two-type; every member behaves identically.
    pub rep: FlutedType,
    /// Index into [`Encoding::one_types`] of the member types' endpoint.
    pub endpoint: usize,
    pub eq: bool,
    pub var: Var,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Key {
    endpoint: FlutedType,
    eq: bool,
    bodies: Vec<bool>,
    exact: Option<FlutedType>,
}

#[derive(Clone, Debug)]
struct Compiled {
    guard: CompiledQf,
    body: CompiledQf,
    count: CountSpec,
    positive: bool,
    /// Position in the positive or negative list.
    index: usize,
}

impl Compiled {
    fn is_forbid(&self) -> bool {
        if self.positive {
            self.count == CountSpec::exactly(0)
        } else {
            self.count.is_plain_exists()
        }
    }
}

/// Sizes reported alongside verdicts.
#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct EncodingStats {
    pub one_type_basis: usize,
    pub two_type_basis: usize,
    pub one_types: usize,
    pub cells: usize,
    pub variables: usize,
    pub clauses: usize,
}

#[derive(Clone, Debug)]
pub struct Encoding {
    pub system: System,
    pub options: EncodeOptions,
    pub signature: Signature,
    pub basis1: AtomBasis,
    pub basis2: AtomBasis,
    /// One-types that may be realised; in cell mode, types that cannot emit
    /// their own equality type are left out (their count is necessarily 0).
    pub one_types: Vec<FlutedType>,
    pub x: Vec<Var>,
    pub cells: Vec<Vec<Cell>>,
    pub stats: EncodingStats,
    conjuncts: Vec<Compiled>,
    restriction: Restriction,
    /// Per one-type: indices into `conjuncts` that are key-relevant.
    relevant: Vec<Vec<usize>>,
    lookup: Vec<HashMap<Key, usize>>,
    /// Period counters by (one-type index, positive?, conjunct index).
    counters: BTreeMap<(usize, bool, usize), Var>,
}

fn compile_all(nf: &NormalForm, b1: &AtomBasis, b2: &AtomBasis) -> Result<Vec<Compiled>, TypeError> {
    let mut out = Vec::new();
    for (positive, list) in [(true, &nf.positive), (false, &nf.negative)] {
        for (index, c) in list.iter().enumerate() {
            let Conjunct { guard, count, body } = c;
            out.push(Compiled { guard: b1.compile(guard)?, body: b2.compile(body)?, count: *count, positive, index });
        }
    }
    Ok(out)
}

fn check_input(nf: &NormalForm) -> Result<(), Sat2Error> {
    if nf.width != 2 {
        return Err(Sat2Error::Width(nf.width));
    }
    if let Some(n) = nf.nullary_predicates().into_iter().next() {
        return Err(Sat2Error::Nullary(n));
    }
    Ok(())
}

struct CellSearch<'a> {
    order: Vec<usize>,
    key_len: usize,
    keys: Vec<&'a CompiledQf>,
    forbids: Vec<&'a CompiledQf>,
    ep_idx: &'a [usize],
    eq_idx: usize,
    pi: FlutedType,
    /// One-types that can be realised at all; endpoints outside are skipped.
    alive: Option<&'a HashSet<FlutedType>>,
    seen: HashSet<Key>,
    found: Vec<(Key, FlutedType)>,
    nodes: u64,
}

impl CellSearch<'_> {
    fn endpoint(&self, t: FlutedType) -> FlutedType {
        let mut out = 0u128;
        for (j, &i) in self.ep_idx.iter().enumerate() {
            out |= ((t.0 >> i) & 1) << j;
        }
        FlutedType(out)
    }

    fn violates(&self, t: FlutedType, known: u128) -> bool {
        let ep_mask: u128 = self.ep_idx.iter().fold(0, |m, &i| m | 1 << i);
        if known & ep_mask == ep_mask {
            let ep = self.endpoint(t);
            if known >> self.eq_idx & 1 == 1 && t.get(self.eq_idx) && ep != self.pi {
                return true;
            }
            if self.alive.is_some_and(|a| !a.contains(&ep)) {
                return true;
            }
        }
        self.forbids.iter().any(|f| f.eval_partial(t, known) == Some(true))
    }

    fn tick(&mut self) -> Result<(), ResourceCap> {
        self.nodes += 1;
        if self.nodes > CELL_NODE_CAP {
            return Err(ResourceCap("cell enumeration node limit".into()));
        }
        Ok(())
    }

    fn run(&mut self, t: FlutedType, known: u128, pos: usize) -> Result<(), ResourceCap> {
        self.tick()?;
        if self.violates(t, known) {
            return Ok(());
        }
        if pos >= self.key_len {
            let key = Key {
                endpoint: self.endpoint(t),
                eq: t.get(self.eq_idx),
                bodies: self.keys.iter().map(|k| k.eval(t)).collect(),
                exact: None,
            };
            if self.seen.contains(&key) {
                return Ok(());
            }
            if let Some(rep) = self.complete(t, known, pos)? {
                self.seen.insert(key.clone());
                self.found.push((key, rep));
            }
            return Ok(());
        }
        let a = self.order[pos];
        for v in [false, true] {
            self.run(t.with(a, v), known | 1 << a, pos + 1)?;
        }
        Ok(())
    }

    fn complete(&mut self, t: FlutedType, known: u128, pos: usize) -> Result<Option<FlutedType>, ResourceCap> {
        self.tick()?;
        if self.violates(t, known) {
            return Ok(None);
        }
        if pos == self.order.len() {
            return Ok(Some(t));
        }
        let a = self.order[pos];
        for v in [false, true] {
            if let Some(r) = self.complete(t.with(a, v), known | 1 << a, pos + 1)? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }
}

/// Builds the system for `nf` with default options.
pub fn encode_psi(nf: &NormalForm) -> Result<Encoding, Sat2Error> {
    encode_psi_with(nf, EncodeOptions::default())
}

pub fn encode_psi_with(nf: &NormalForm, options: EncodeOptions) -> Result<Encoding, Sat2Error> {
    check_input(nf)?;
    let sig = nf.signature.clone();
    let b1 = atom_basis(&sig, 1);
    let b2 = atom_basis(&sig, 2);
    let conjuncts = compile_all(nf, &b1, &b2)?;
    let restriction = Restriction::new(&b2, &b1);
    let eq_idx = b2.equality_index().expect("depth 2 basis has equality");
    let all_one = enumerate_types(&b1)?;

    // which conjuncts apply to which one-type, and whether they are structural
    let applies = |pi: FlutedType, c: &Compiled| c.guard.eval(pi);
    let structural = |c: &Compiled| options.prune && options.grouping == Grouping::Cells && c.is_forbid();

    let mut relevant = Vec::new();
    let mut raw_cells: Vec<Vec<(Key, FlutedType)>> = Vec::new();
    match options.grouping {
        Grouping::PerType => {
            let all_two = enumerate_types(&b2)?;
            for &pi in &all_one {
                relevant.push((0..conjuncts.len()).filter(|&k| applies(pi, &conjuncts[k])).collect());
                raw_cells.push(
                    all_two
                        .iter()
                        .map(|&t| {
                            let key = Key {
                                endpoint: restriction.apply(t),
                                eq: t.get(eq_idx),
                                bodies: Vec::new(),
                                exact: Some(t),
                            };
                            (key, t)
                        })
                        .collect(),
                );
            }
        }
        Grouping::Cells => {
            let setup = |pi: FlutedType| {
                let rel: Vec<usize> = (0..conjuncts.len())
                    .filter(|&k| applies(pi, &conjuncts[k]) && !structural(&conjuncts[k]))
                    .collect();
                let forbids: Vec<&CompiledQf> = conjuncts
                    .iter()
                    .filter(|c| applies(pi, c) && structural(c))
                    .map(|c| &c.body)
                    .collect();
                let keys: Vec<&CompiledQf> = rel.iter().map(|&k| &conjuncts[k].body).collect();
                let mut key_atoms = 0u128;
                keys.iter().for_each(|k| k.atoms(&mut key_atoms));
                let mut forbid_atoms = 0u128;
                forbids.iter().for_each(|k| k.atoms(&mut forbid_atoms));
                let mut order: Vec<usize> = restriction.map().to_vec();
                order.push(eq_idx);
                for i in 0..b2.len() {
                    if key_atoms >> i & 1 == 1 && !order.contains(&i) {
                        order.push(i);
                    }
                }
                let key_len = order.len();
                for i in 0..b2.len() {
                    if forbid_atoms >> i & 1 == 1 && !order.contains(&i) {
                        order.push(i);
                    }
                }
                let search = CellSearch {
                    order,
                    key_len,
                    keys,
                    forbids,
                    ep_idx: restriction.map(),
                    eq_idx,
                    pi,
                    alive: None,
                    seen: HashSet::new(),
                    found: Vec::new(),
                    nodes: 0,
                };
                (rel, search)
            };
            // a one-type is realisable only if its own equality two-type is
            let mut alive = HashSet::new();
            let mut total_nodes = 0u64;
            for &pi in &all_one {
                let (_, mut search) = setup(pi);
                let mut t = FlutedType(0);
                let mut known = 1u128 << eq_idx;
                t = t.with(eq_idx, true);
                for (j, &i) in restriction.map().iter().enumerate() {
                    t = t.with(i, pi.get(j));
                    known |= 1 << i;
                }
                if search.complete(t, known, restriction.map().len() + 1)?.is_some() {
                    alive.insert(pi);
                }
                total_nodes += search.nodes;
            }
            let mut total_cells = 0usize;
            for &pi in &all_one {
                let (rel, mut search) = setup(pi);
                if alive.contains(&pi) {
                    search.alive = Some(&alive);
                    search.run(FlutedType(0), 0, 0)?;
                }
                total_nodes += search.nodes;
                total_cells += search.found.len();
                if total_nodes > TOTAL_CELL_NODE_CAP || total_cells > TOTAL_CELL_CAP {
                    return Err(ResourceCap(format!(
                        "cell enumeration limit ({total_cells} cells after {total_nodes} nodes)"
                    ))
                    .into());
                }
                relevant.push(rel);
                raw_cells.push(search.found);
            }
        }
    }

    // one-types kept: all of them per type; in cell mode those with an equality cell
    let kept: Vec<usize> = match options.grouping {
        Grouping::PerType => (0..all_one.len()).collect(),
        Grouping::Cells => (0..all_one.len()).filter(|&p| raw_cells[p].iter().any(|(k, _)| k.eq)).collect(),
    };
    let index_of: HashMap<FlutedType, usize> = kept.iter().enumerate().map(|(i, &p)| (all_one[p], i)).collect();

    let mut sys = System::new();
    let one_types: Vec<FlutedType> = kept.iter().map(|&p| all_one[p]).collect();
    let x: Vec<Var> = one_types.iter().map(|t| sys.add_var(format!("x_{}", t.0), false)).collect();
    let mut cells: Vec<Vec<Cell>> = Vec::new();
    let mut lookup: Vec<HashMap<Key, usize>> = Vec::new();
    let mut kept_relevant = Vec::new();
    for (pi_idx, &p) in kept.iter().enumerate() {
        let mut list = Vec::new();
        let mut map = HashMap::new();
        for (key, rep) in &raw_cells[p] {
            let Some(&endpoint) = index_of.get(&key.endpoint) else { continue };
            let name = match options.grouping {
                Grouping::PerType => format!("y_{}_{}", one_types[pi_idx].0, rep.0),
                Grouping::Cells => format!("y_{}_c{}", one_types[pi_idx].0, list.len()),
            };
            let var = sys.add_var(name, false);
            map.insert(key.clone(), list.len());
            list.push(Cell { rep: *rep, endpoint, eq: key.eq, var });
        }
        cells.push(list);
        lookup.push(map);
        kept_relevant.push(relevant[p].clone());
    }

    // Psi1: non-empty domain
    sys.add(Comparison::new(LinExpr::sum(x.iter().copied()), Cmp::Ge, LinExpr::constant(1u64)));
    let unused = |v: Var| Comparison::new(LinExpr::var(v), Cmp::Eq, LinExpr::zero());
    let mut counters = BTreeMap::new();
    for (pi, list) in cells.iter().enumerate() {
        // Psi2: every element is seen once per element of each type
        for (pj, &xj) in x.iter().enumerate() {
            let sum = LinExpr::sum(list.iter().filter(|c| c.endpoint == pj).map(|c| c.var));
            sys.add_clause(Clause(vec![unused(x[pi]), Comparison::new(sum, Cmp::Eq, LinExpr::var(xj))]));
        }
        // Psi5: exactly one equality type, and it points back to the own type
        for c in list.iter().filter(|c| c.eq && c.endpoint != pi) {
            sys.add(unused(c.var));
        }
        let eqs = LinExpr::sum(list.iter().filter(|c| c.eq && c.endpoint == pi).map(|c| c.var));
        sys.add_clause(Clause(vec![unused(x[pi]), Comparison::new(eqs, Cmp::Eq, LinExpr::constant(1u64))]));
        // pruning in per-type mode: zero the forbidden types
        if options.prune && options.grouping == Grouping::PerType {
            for c in list {
                if kept_relevant[pi].iter().any(|&k| conjuncts[k].is_forbid() && conjuncts[k].body.eval(c.rep)) {
                    sys.add(unused(c.var));
                }
            }
        }
        // Psi3 / Psi4
        for &k in &kept_relevant[pi] {
            let cj = &conjuncts[k];
            let sum = LinExpr::sum(list.iter().filter(|c| cj.body.eval(c.rep)).map(|c| c.var));
            let mut disj = vec![unused(x[pi])];
            let CountSpec { base, period, admits_infinite } = cj.count;
            let tag = if cj.positive { "i" } else { "j" };
            let counter = if period > 0 && !(cj.positive && period == 1 && admits_infinite) && !(!cj.positive && period == 1)
            {
                let v = sys.add_var(format!("{tag}_{}_{}", one_types[pi].0, cj.index), true);
                counters.insert((pi, cj.positive, cj.index), v);
                Some(v)
            } else {
                None
            };
            if cj.positive {
                match counter {
                    None if period == 0 => disj.push(Comparison::new(sum.clone(), Cmp::Eq, LinExpr::constant(base))),
                    // threshold: infinitely many witnesses also qualify
                    None => disj.push(Comparison::new(sum.clone(), Cmp::Ge, LinExpr::constant(base))),
                    Some(v) => {
                        let rhs = LinExpr::constant(base).with_term(v, period);
                        disj.push(Comparison::new(sum.clone(), Cmp::Eq, rhs));
                    }
                }
                if admits_infinite && !(counter.is_none() && period == 1) {
                    disj.push(Comparison::new(sum.clone(), Cmp::Eq, LinExpr::constant(ExtNat::Inf)));
                }
            } else {
                if base > 0 {
                    disj.push(Comparison::new(sum.clone(), Cmp::Lt, LinExpr::constant(base)));
                }
                if !admits_infinite {
                    disj.push(Comparison::new(sum.clone(), Cmp::Eq, LinExpr::constant(ExtNat::Inf)));
                }
                if period == 0 {
                    disj.push(Comparison::new(sum.clone(), Cmp::Gt, LinExpr::constant(base)));
                } else if let Some(v) = counter {
                    // strictly between base + j p and base + (j + 1) p
                    for off in 1..period {
                        let rhs = LinExpr::constant(base + off).with_term(v, period);
                        disj.push(Comparison::new(sum.clone(), Cmp::Eq, rhs));
                    }
                }
            }
            sys.add_clause(Clause(disj));
        }
    }
    let stats = EncodingStats {
        one_type_basis: b1.len(),
        two_type_basis: b2.len(),
        one_types: one_types.len(),
        cells: cells.iter().map(Vec::len).sum(),
        variables: sys.num_vars(),
        clauses: sys.clauses.len(),
    };
    Ok(Encoding {
        system: sys,
        options,
        signature: sig,
        basis1: b1,
        basis2: b2,
        one_types,
        x,
        cells,
        stats,
        conjuncts,
        restriction,
        relevant: kept_relevant,
        lookup,
        counters,
    })
}

impl Encoding {
    fn one_type_index(&self, t: FlutedType) -> Option<usize> {
        self.one_types.iter().position(|&u| u == t)
    }

    /// The group of two-type `t` emitted by an element of one-type index `pi`.
    fn cell_of(&self, pi: usize, t: FlutedType) -> Option<usize> {
        let eq_idx = self.basis2.equality_index().expect("depth 2 basis has equality");
        let key = match self.options.grouping {
            Grouping::PerType => {
                Key { endpoint: self.restriction.apply(t), eq: t.get(eq_idx), bodies: Vec::new(), exact: Some(t) }
            }
            Grouping::Cells => {
                let forbidden = self.conjuncts.iter().any(|c| {
                    self.options.prune && c.is_forbid() && c.guard.eval(self.one_types[pi]) && c.body.eval(t)
                });
                if forbidden {
                    return None;
                }
                Key {
                    endpoint: self.restriction.apply(t),
                    eq: t.get(eq_idx),
                    bodies: self.relevant[pi].iter().map(|&k| self.conjuncts[k].body.eval(t)).collect(),
                    exact: None,
                }
            }
        };
        self.lookup[pi].get(&key).copied()
    }
}

/// Cardinalities and shared profiles of a globally homogeneous model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractModel {
    pub sizes: BTreeMap<FlutedType, ExtNat>,
    pub profiles: BTreeMap<FlutedType, Profile>,
    pub basis1: AtomBasis,
    pub basis2: AtomBasis,
}

impl AbstractModel {
    pub fn to_json(&self) -> serde_json::Value {
        let types: Vec<serde_json::Value> = self
            .sizes
            .iter()
            .map(|(t, k)| {
                let profile: Vec<serde_json::Value> = self.profiles[t]
                    .0
                    .iter()
                    .map(|(u, m)| serde_json::json!({"two_type": self.basis2.describe(*u), "count": m}))
                    .collect();
                serde_json::json!({"one_type": self.basis1.describe(*t), "size": k, "profile": profile})
            })
            .collect();
        serde_json::json!({"abstract": true, "types": types})
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    Finite(Structure),
    Abstract(AbstractModel),
}

#[derive(Clone, Debug)]
pub struct Decision2 {
    pub encoding: Encoding,
    pub assignment: Option<Assignment>,
    pub stats: SolveStats,
}

impl Decision2 {
    pub fn is_sat(&self) -> bool {
        self.assignment.is_some()
    }
}

/// Decides (finite, if `finite`) satisfiability of a width-2 normal form.
pub fn decide2(nf: &NormalForm, finite: bool) -> Result<Decision2, Sat2Error> {
    decide2_with(nf, finite, EncodeOptions::default(), &SolverConfig::default())
}

pub fn decide2_with(
    nf: &NormalForm,
    finite: bool,
    options: EncodeOptions,
    cfg: &SolverConfig,
) -> Result<Decision2, Sat2Error> {
    let encoding = encode_psi_with(nf, options)?;
    let mode = if finite { SolveMode::OverN } else { SolveMode::OverNStar };
    let out = solve_with(&encoding.system, mode, cfg)?;
    Ok(Decision2 { encoding, assignment: out.assignment, stats: out.stats })
}

/// Builds a finite globally homogeneous structure when
/// all counts are finite, an abstract model otherwise.
pub fn build_model(enc: &Encoding, sol: &Assignment) -> Result<Witness, Sat2Error> {
    if !enc.system.check(sol) {
        return Err(Sat2Error::Verification("assignment violates the system".into()));
    }
    let used: Vec<usize> = (0..enc.one_types.len()).filter(|&p| !sol.get(enc.x[p]).is_zero()).collect();
    let infinite = used.iter().any(|&p| {
        !sol.get(enc.x[p]).is_finite() || enc.cells[p].iter().any(|c| !sol.get(c.var).is_finite())
    });
    if infinite {
        let mut sizes = BTreeMap::new();
        let mut profiles = BTreeMap::new();
        for &p in &used {
            sizes.insert(enc.one_types[p], sol.get(enc.x[p]));
            let mut prof = BTreeMap::new();
            for c in &enc.cells[p] {
                let k = sol.get(c.var);
                if !k.is_zero() {
                    prof.insert(c.rep, k);
                }
            }
            profiles.insert(enc.one_types[p], Profile(prof));
        }
        return Ok(Witness::Abstract(AbstractModel {
            sizes,
            profiles,
            basis1: enc.basis1.clone(),
            basis2: enc.basis2.clone(),
        }));
    }
    let fin = |v: Var| sol.get(v).finite().expect("finite") as usize;
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); enc.one_types.len()];
    let mut n = 0;
    for &p in &used {
        blocks[p] = (n..n + fin(enc.x[p])).collect();
        n += fin(enc.x[p]);
    }
    let mut s = Structure::new(n, &enc.signature);
    for &p in &used {
        for (j, atom) in enc.basis1.atoms().iter().enumerate() {
            if let BasisAtom::Pred { name, .. } = atom {
                if enc.one_types[p].get(j) {
                    for &a in &blocks[p] {
                        s.set(name, &[a], true);
                    }
                }
            }
        }
    }
    let binary: Vec<(usize, &str)> = enc
        .basis2
        .atoms()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a {
            BasisAtom::Pred { name, arity: 2 } => Some((i, name.as_str())),
            _ => None,
        })
        .collect();
    let emit = |s: &mut Structure, a: usize, c: usize, t: FlutedType| {
        for &(i, name) in &binary {
            if t.get(i) {
                s.set(name, &[a, c], true);
            }
        }
    };
    for &p in &used {
        for &a in &blocks[p] {
            for &q in &used {
                let targets: Vec<usize> = blocks[q].iter().copied().filter(|&c| c != a).collect();
                let mut next = 0;
                for c in enc.cells[p].iter().filter(|c| c.endpoint == q) {
                    let k = fin(c.var);
                    if c.eq {
                        if k > 0 {
                            emit(&mut s, a, a, c.rep);
                        }
                        continue;
                    }
                    for _ in 0..k {
                        let target = *targets
                            .get(next)
                            .ok_or_else(|| Sat2Error::Verification("two-type counts exceed block size".into()))?;
                        emit(&mut s, a, target, c.rep);
                        next += 1;
                    }
                }
            }
        }
    }
    Ok(Witness::Finite(s))
}

/// Reads off counts from a globally homogeneous model of the normal form.
pub fn assignment_from_model(enc: &Encoding, s: &Structure) -> Result<Assignment, Sat2Error> {
    if !is_globally_homogeneous(s) {
        return Err(Sat2Error::Verification("structure is not globally homogeneous".into()));
    }
    let mut a = Assignment::zeros(enc.system.num_vars());
    let mut exemplar: BTreeMap<usize, usize> = BTreeMap::new();
    for e in 0..s.size() {
        let t = compute_ftp(s, &enc.basis1, &[e]);
        let p = enc
            .one_type_index(t)
            .ok_or_else(|| Sat2Error::Verification(format!("element {e} has a one-type ruled out by the encoding")))?;
        exemplar.entry(p).or_insert(e);
        a.set(enc.x[p], a.get(enc.x[p]) + ExtNat::ONE);
    }
    for (&p, &e) in &exemplar {
        let rho = compute_profile(s, &enc.basis2, &[e]);
        for (t, k) in &rho.0 {
            let c = enc.cell_of(p, *t).ok_or_else(|| {
                Sat2Error::Verification(format!("element {e} emits a two-type excluded by the encoding"))
            })?;
            let v = enc.cells[p][c].var;
            a.set(v, a.get(v) + *k);
        }
        for &k in &enc.relevant[p] {
            let cj = &enc.conjuncts[k];
            let Some(&v) = enc.counters.get(&(p, cj.positive, cj.index)) else { continue };
            let total: u64 = rho.0.iter().filter(|(t, _)| cj.body.eval(**t)).map(|(_, k)| k.finite().unwrap()).sum();
            let CountSpec { base, period, .. } = cj.count;
            if total >= base && period > 0 {
                a.set(v, ExtNat::Fin((total - base) / period));
            }
        }
    }
    Ok(a)
}

fn two_basis(s: &Structure) -> (AtomBasis, AtomBasis) {
    let sig = s.signature();
    (atom_basis(&sig, 1), atom_basis(&sig, 2))
}

/// Whether all elements of the same one-type have the same profile.
pub fn is_globally_homogeneous(s: &Structure) -> bool {
    let (b1, b2) = two_basis(s);
    let mut seen: HashMap<FlutedType, Profile> = HashMap::new();
    for e in 0..s.size() {
        let t = compute_ftp(s, &b1, &[e]);
        let rho = compute_profile(s, &b2, &[e]);
        match seen.get(&t) {
            Some(r) if *r != rho => return false,
            Some(_) => {}
            None => {
                seen.insert(t, rho);
            }
        }
    }
    true
}

/// Rewires binary relations so that every element copies the behaviour of
/// the least element of its one-type.
pub fn globally_homogenize(s: &Structure) -> Structure {
    let (b1, _) = two_basis(s);
    let mut out = s.clone();
    let binary: Vec<String> = s.predicates().filter(|(_, r)| r.arity == 2).map(|(n, _)| n.to_string()).collect();
    let mut exemplar: HashMap<FlutedType, usize> = HashMap::new();
    for b in 0..s.size() {
        let t = compute_ftp(s, &b1, &[b]);
        let a = *exemplar.entry(t).or_insert(b);
        if a == b {
            continue;
        }
        for c in 0..s.size() {
            let src = if c == b {
                a
            } else if c == a {
                b
            } else {
                c
            };
            for r in &binary {
                out.set(r, &[b, c], s.holds(r, &[a, src]));
            }
        }
    }
    out
}
