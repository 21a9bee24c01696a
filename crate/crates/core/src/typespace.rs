//! Fluted atom bases, fluted types and profiles.
//!
//! At depth `d` the basis consists of every atom `r(x_{d-a+1}, ..., x_d)`
//! for a predicate `r` of arity `1 <= a <= d`, followed by the equality atom
//! `x_{d-1} = x_d` when `d >= 2`. A type assigns a truth value to each
//! basis atom and is stored as a bitmask (bit `i` for atom `i`).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ext::ExtNat;
use crate::modeltools::Structure;
use crate::normalform::Qf;
use crate::syntax::{CountSpec, Signature};

/// Largest basis [`enumerate_types`] accepts unless told otherwise.
pub const DEFAULT_TYPE_CAP: usize = 24;
/// Hard limit imposed by the bitmask representation.
pub const MAX_BASIS: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("atom basis has {size} atoms, over the limit of {cap}")]
    BasisTooLarge { size: usize, cap: usize },
    #[error("atom `{0}` is not in the basis at depth {1}")]
    NotInBasis(String, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisAtom {
    Pred { name: String, arity: usize },
    Equality,
}

impl BasisAtom {
    pub fn arity(&self) -> usize {
        match self {
            BasisAtom::Pred { arity, .. } => *arity,
            BasisAtom::Equality => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomBasis {
    depth: usize,
    atoms: Vec<BasisAtom>,
}

/// A truth assignment over some basis; bit `i` is the value of atom `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlutedType(pub u128);

impl FlutedType {
    pub fn get(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize, v: bool) -> FlutedType {
        if v {
            FlutedType(self.0 | 1 << i)
        } else {
            FlutedType(self.0 & !(1 << i))
        }
    }
}

/// The basis of suffix atoms at `depth`. Nullary predicates are excluded.
pub fn atom_basis(sig: &Signature, depth: usize) -> AtomBasis {
    let mut atoms: Vec<BasisAtom> = sig
        .iter()
        .filter(|&(_, a)| a >= 1 && a <= depth)
        .map(|(n, a)| BasisAtom::Pred { name: n.to_string(), arity: a })
        .collect();
    if depth >= 2 {
        atoms.push(BasisAtom::Equality);
    }
    AtomBasis { depth, atoms }
}

impl AtomBasis {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[BasisAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of_pred(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| matches!(a, BasisAtom::Pred { name: n, .. } if n == name))
    }

    pub fn equality_index(&self) -> Option<usize> {
        self.atoms.iter().position(|a| *a == BasisAtom::Equality)
    }

    /// Atoms of full arity (`depth`), i.e. those dropped by restriction.
    pub fn top_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.atoms.len()).filter(|&i| self.atoms[i].arity() == self.depth)
    }

    /// Compiles `phi` to basis indices.
    pub fn compile(&self, phi: &Qf) -> Result<CompiledQf, TypeError> {
        Ok(match phi {
            Qf::True => CompiledQf::Const(true),
            Qf::False => CompiledQf::Const(false),
            Qf::Pred(name, arity) => {
                let i = self
                    .index_of_pred(name)
                    .filter(|&i| self.atoms[i].arity() == *arity)
                    .ok_or_else(|| TypeError::NotInBasis(name.clone(), self.depth))?;
                CompiledQf::Atom(i)
            }
            Qf::Eq => CompiledQf::Atom(self.equality_index().ok_or_else(|| TypeError::NotInBasis("=".into(), self.depth))?),
            Qf::Not(g) => CompiledQf::Not(Box::new(self.compile(g)?)),
            Qf::And(gs) => CompiledQf::And(gs.iter().map(|g| self.compile(g)).collect::<Result<_, _>>()?),
            Qf::Or(gs) => CompiledQf::Or(gs.iter().map(|g| self.compile(g)).collect::<Result<_, _>>()?),
            Qf::Iff(a, b) => CompiledQf::Iff(Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
        })
    }

    /// The conjunction of literals describing `t`.
    pub fn type_formula(&self, t: FlutedType) -> Qf {
        Qf::and(
            self.atoms
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let atom = match a {
                        BasisAtom::Pred { name, arity } => Qf::Pred(name.clone(), *arity),
                        BasisAtom::Equality => Qf::Eq,
                    };
                    if t.get(i) {
                        atom
                    } else {
                        Qf::not(atom)
                    }
                })
                .collect(),
        )
    }

    /// Human-readable listing such as `{p(x2):T, r(x1,x2):F, x1=x2:F}`.
    pub fn describe(&self, t: FlutedType) -> String {
        let d = self.depth;
        let parts: Vec<String> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let text = match a {
                    BasisAtom::Pred { name, arity } => {
                        let args: Vec<String> = (d + 1 - arity..=d).map(|j| format!("x{j}")).collect();
                        format!("{name}({})", args.join(","))
                    }
                    BasisAtom::Equality => format!("x{}=x{}", d - 1, d),
                };
                format!("{text}:{}", if t.get(i) { "T" } else { "F" })
            })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A quantifier-free formula over basis indices.
#[derive(Clone, Debug)]
pub enum CompiledQf {
    Const(bool),
    Atom(usize),
    Not(Box<CompiledQf>),
    And(Vec<CompiledQf>),
    Or(Vec<CompiledQf>),
    Iff(Box<CompiledQf>, Box<CompiledQf>),
}

impl CompiledQf {
    pub fn eval(&self, t: FlutedType) -> bool {
        match self {
            CompiledQf::Const(b) => *b,
            CompiledQf::Atom(i) => t.get(*i),
            CompiledQf::Not(g) => !g.eval(t),
            CompiledQf::And(gs) => gs.iter().all(|g| g.eval(t)),
            CompiledQf::Or(gs) => gs.iter().any(|g| g.eval(t)),
            CompiledQf::Iff(a, b) => a.eval(t) == b.eval(t),
        }
    }

    /// Three-valued evaluation under a partial assignment (`known` marks fixed bits).
    pub fn eval_partial(&self, t: FlutedType, known: u128) -> Option<bool> {
        match self {
            CompiledQf::Const(b) => Some(*b),
            CompiledQf::Atom(i) => (known >> i & 1 == 1).then(|| t.get(*i)),
            CompiledQf::Not(g) => g.eval_partial(t, known).map(|b| !b),
            CompiledQf::And(gs) => {
                let mut open = false;
                for g in gs {
                    match g.eval_partial(t, known) {
                        Some(false) => return Some(false),
                        None => open = true,
                        Some(true) => {}
                    }
                }
                (!open).then_some(true)
            }
            CompiledQf::Or(gs) => {
                let mut open = false;
                for g in gs {
                    match g.eval_partial(t, known) {
                        Some(true) => return Some(true),
                        None => open = true,
                        Some(false) => {}
                    }
                }
                (!open).then_some(false)
            }
            CompiledQf::Iff(a, b) => Some(a.eval_partial(t, known)? == b.eval_partial(t, known)?),
        }
    }

    /// Basis indices mentioned by the formula.
    pub fn atoms(&self, out: &mut u128) {
        match self {
            CompiledQf::Const(_) => {}
            CompiledQf::Atom(i) => *out |= 1 << i,
            CompiledQf::Not(g) => g.atoms(out),
            CompiledQf::And(gs) | CompiledQf::Or(gs) => gs.iter().for_each(|g| g.atoms(out)),
            CompiledQf::Iff(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }
}

/// All `2^|basis|` types in ascending bitmask order.
pub fn enumerate_types(basis: &AtomBasis) -> Result<Vec<FlutedType>, TypeError> {
    enumerate_types_capped(basis, DEFAULT_TYPE_CAP)
}

pub fn enumerate_types_capped(basis: &AtomBasis, cap: usize) -> Result<Vec<FlutedType>, TypeError> {
    if basis.len() > cap.min(63) {
        return Err(TypeError::BasisTooLarge { size: basis.len(), cap: cap.min(63) });
    }
    Ok((0..1u128 << basis.len()).map(FlutedType).collect())
}

/// Maps a type at depth `hi.depth()` to its restriction at depth `lo.depth() = hi.depth() - 1`:
/// full-arity atoms are dropped and the others reindexed.
pub fn restrict_type(t: FlutedType, hi: &AtomBasis, lo: &AtomBasis) -> FlutedType {
    debug_assert_eq!(hi.depth, lo.depth + 1);
    let mut out = FlutedType(0);
    for (j, a) in lo.atoms.iter().enumerate() {
        let i = hi.atoms.iter().position(|b| b == a).expect("lower basis atom present in the upper basis");
        out = out.with(j, t.get(i));
    }
    out
}

/// Precomputed index map for repeated restriction.
#[derive(Clone, Debug)]
pub struct Restriction {
    map: Vec<usize>,
}

impl Restriction {
    pub fn new(hi: &AtomBasis, lo: &AtomBasis) -> Self {
        let map = lo
            .atoms
            .iter()
            .map(|a| hi.atoms.iter().position(|b| b == a).expect("lower basis atom present in the upper basis"))
            .collect();
        Restriction { map }
    }

    pub fn apply(&self, t: FlutedType) -> FlutedType {
        let mut out = 0u128;
        for (j, &i) in self.map.iter().enumerate() {
            out |= ((t.0 >> i) & 1) << j;
        }
        FlutedType(out)
    }

    /// Upper-basis indices of the lower-basis atoms, in lower-basis order.
    pub fn map(&self) -> &[usize] {
        &self.map
    }
}

/// Whether `t` satisfies `phi`; every atom of `phi` must lie in the basis.
pub fn type_satisfies(basis: &AtomBasis, t: FlutedType, phi: &Qf) -> Result<bool, TypeError> {
    Ok(basis.compile(phi)?.eval(t))
}

/// The fluted type realised by `tuple` (whose length is the basis depth).
pub fn compute_ftp(s: &Structure, basis: &AtomBasis, tuple: &[usize]) -> FlutedType {
    assert_eq!(tuple.len(), basis.depth, "tuple length must equal the basis depth");
    let d = tuple.len();
    let mut t = FlutedType(0);
    for (i, a) in basis.atoms.iter().enumerate() {
        let v = match a {
            BasisAtom::Pred { name, arity } => s.holds(name, &tuple[d - arity..]),
            BasisAtom::Equality => tuple[d - 2] == tuple[d - 1],
        };
        t = t.with(i, v);
    }
    t
}

/// Multiplicities of the types emitted by a tuple; absent keys are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Profile(pub BTreeMap<FlutedType, ExtNat>);

impl Profile {
    pub fn get(&self, t: FlutedType) -> ExtNat {
        self.0.get(&t).copied().unwrap_or(ExtNat::ZERO)
    }

    pub fn total(&self) -> ExtNat {
        self.0.values().copied().sum()
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(t, k)| format!("{:#x}:{k}", t.0)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Counts, per type of the basis at depth `tuple.len() + 1`, the elements `c`
/// such that `tuple · c` realises it.
pub fn compute_profile(s: &Structure, basis: &AtomBasis, tuple: &[usize]) -> Profile {
    assert_eq!(tuple.len() + 1, basis.depth, "profile basis must be one deeper than the tuple");
    let mut ext = tuple.to_vec();
    ext.push(0);
    let mut p = BTreeMap::new();
    for c in 0..s.size() {
        *ext.last_mut().unwrap() = c;
        let t = compute_ftp(s, basis, &ext);
        let e = p.entry(t).or_insert(ExtNat::ZERO);
        *e = *e + ExtNat::ONE;
    }
    Profile(p)
}

/// Whether the number of emitted types satisfying `phi` lies in `count`.
pub fn profile_satisfies(basis: &AtomBasis, rho: &Profile, count: CountSpec, phi: &Qf) -> Result<bool, TypeError> {
    let c = basis.compile(phi)?;
    let total: ExtNat = rho.0.iter().filter(|(t, _)| c.eval(**t)).map(|(_, k)| *k).sum();
    Ok(count.contains_ext(total))
}
