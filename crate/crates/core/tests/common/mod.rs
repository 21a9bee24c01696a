//! Random sentences and normal forms shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use flpc::diophantine::{Assignment, Clause, Cmp, Comparison, LinExpr, System};
use flpc::ext::Inf;
use flpc::normalform::{var_name, Conjunct, NormalForm, Qf};
use flpc::{CountSpec, ExtNat, Formula, Signature};
use rand::rngs::StdRng;
use rand::Rng;

/// `periodic(n, p)` with `n, p <= 3`, sometimes plain `exists`.
pub fn random_count(rng: &mut StdRng) -> CountSpec {
    if rng.gen_bool(0.15) {
        CountSpec::some()
    } else {
        CountSpec::periodic(rng.gen_range(0..=3), rng.gen_range(0..=3))
    }
}

/// A small boolean combination of literals over `atoms`.
pub fn random_qf(rng: &mut StdRng, atoms: &[Qf]) -> Qf {
    let lit = |rng: &mut StdRng| {
        let a = atoms[rng.gen_range(0..atoms.len())].clone();
        if rng.gen_bool(0.5) {
            Qf::not(a)
        } else {
            a
        }
    };
    let k = rng.gen_range(1..=3);
    let lits: Vec<Qf> = (0..k).map(|_| lit(rng)).collect();
    if rng.gen_bool(0.6) {
        Qf::and(lits)
    } else {
        Qf::or(lits)
    }
}

fn random_guard(rng: &mut StdRng, atoms: &[Qf]) -> Qf {
    if atoms.is_empty() || rng.gen_bool(0.4) {
        Qf::True
    } else {
        random_qf(rng, atoms)
    }
}

/// A normal form of `width` with guards over `guard_atoms` (depth `width-1`)
/// and bodies over `body_atoms` (depth `width`).
pub fn random_nf(
    rng: &mut StdRng,
    width: usize,
    sig: &Signature,
    guard_atoms: &[Qf],
    body_atoms: &[Qf],
    conjuncts: std::ops::RangeInclusive<usize>,
) -> NormalForm {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for _ in 0..rng.gen_range(conjuncts) {
        let c = Conjunct::new(random_guard(rng, guard_atoms), random_count(rng), random_qf(rng, body_atoms));
        if rng.gen_bool(0.6) {
            positive.push(c);
        } else {
            negative.push(c);
        }
    }
    NormalForm {
        width,
        positive,
        negative,
        signature: sig.clone(),
        fresh: BTreeMap::new(),
        residue: Qf::True,
        nullary: BTreeMap::new(),
    }
}

pub fn sig_pr() -> Signature {
    Signature::from_pairs([("p", 1), ("r", 2)]).unwrap()
}

/// Width 2 over `{p/1, r/2}`.
pub fn width2_nf(rng: &mut StdRng) -> NormalForm {
    let p = Qf::pred("p", 1);
    random_nf(rng, 2, &sig_pr(), std::slice::from_ref(&p), &[p.clone(), Qf::pred("r", 2), Qf::Eq], 1..=4)
}

/// Width 3 over `{t/3}`, or `{p/1, t/3}` when `with_p`.
pub fn width3_nf(rng: &mut StdRng, with_p: bool) -> NormalForm {
    let t = Qf::pred("t", 3);
    let sig = if with_p {
        Signature::from_pairs([("p", 1), ("t", 3)]).unwrap()
    } else {
        Signature::from_pairs([("t", 3)]).unwrap()
    };
    let mut guards = vec![Qf::Eq];
    let mut bodies = vec![t, Qf::Eq];
    if with_p {
        guards.push(Qf::pred("p", 1));
        bodies.push(Qf::pred("p", 1));
    }
    random_nf(rng, 3, &sig, &guards, &bodies, 1..=3)
}

/// A random sentence over `sig` with at most `max_depth` nested quantifiers.
/// With `fluted`, atoms take the suffix of the bound variables; otherwise
/// their arguments are sometimes reversed or shuffled.
pub fn random_sentence(rng: &mut StdRng, sig: &Signature, max_depth: usize, fluted: bool) -> Formula {
    let preds: Vec<(String, usize)> = sig.iter().map(|(n, a)| (n.to_string(), a)).collect();
    let mut budget = 8;
    let q = random_quantified(rng, &preds, 0, max_depth, fluted, &mut budget);
    if rng.gen_bool(0.3) {
        let mut budget = 4;
        Formula::and(vec![q, random_quantified(rng, &preds, 0, max_depth, fluted, &mut budget)])
    } else {
        q
    }
}

fn random_quantified(
    rng: &mut StdRng,
    preds: &[(String, usize)],
    depth: usize,
    max_depth: usize,
    fluted: bool,
    budget: &mut usize,
) -> Formula {
    let v = var_name(depth + 1);
    let body = random_formula(rng, preds, depth + 1, max_depth, fluted, budget);
    if rng.gen_bool(0.35) {
        Formula::forall(&v, body)
    } else {
        Formula::exists(random_count(rng), &v, body)
    }
}

fn random_atom(rng: &mut StdRng, preds: &[(String, usize)], depth: usize, fluted: bool) -> Formula {
    let usable: Vec<&(String, usize)> = preds.iter().filter(|(_, a)| *a <= depth).collect();
    if usable.is_empty() || (depth >= 2 && rng.gen_bool(0.15)) {
        return if depth >= 2 { Formula::eq(&var_name(depth - 1), &var_name(depth)) } else { Formula::True };
    }
    let (name, a) = usable[rng.gen_range(0..usable.len())];
    let mut args: Vec<String> = (depth + 1 - a..=depth).map(var_name).collect();
    if !fluted && *a >= 2 && rng.gen_bool(0.3) {
        args.reverse();
    }
    Formula::Atom { pred: name.clone(), args }
}

fn random_formula(
    rng: &mut StdRng,
    preds: &[(String, usize)],
    depth: usize,
    max_depth: usize,
    fluted: bool,
    budget: &mut usize,
) -> Formula {
    let choice = if *budget == 0 { 0 } else { rng.gen_range(0..7) };
    if *budget > 0 {
        *budget -= 1;
    }
    match choice {
        0 | 1 => random_atom(rng, preds, depth, fluted),
        2 => Formula::not(random_formula(rng, preds, depth, max_depth, fluted, budget)),
        3 => Formula::and(vec![
            random_formula(rng, preds, depth, max_depth, fluted, budget),
            random_formula(rng, preds, depth, max_depth, fluted, budget),
        ]),
        4 => Formula::or(vec![
            random_formula(rng, preds, depth, max_depth, fluted, budget),
            random_formula(rng, preds, depth, max_depth, fluted, budget),
        ]),
        5 => Formula::implies(
            random_formula(rng, preds, depth, max_depth, fluted, budget),
            random_formula(rng, preds, depth, max_depth, fluted, budget),
        ),
        _ if depth < max_depth => random_quantified(rng, preds, depth, max_depth, fluted, budget),
        _ => random_atom(rng, preds, depth, fluted),
    }
}

pub const OPS: [Cmp; 6] = [Cmp::Eq, Cmp::Ne, Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt];

pub fn random_expr(rng: &mut StdRng, n: usize, allow_inf: bool) -> LinExpr {
    let mut e = LinExpr::constant(rng.gen_range(0..=8u64));
    if allow_inf && rng.gen_bool(0.05) {
        e = LinExpr::constant(Inf);
    }
    for _ in 0..rng.gen_range(0..=2) {
        e.add_term(rng.gen_range(0..n), rng.gen_range(1..=3u64));
    }
    e
}

pub fn random_system(rng: &mut StdRng, n: usize, allow_inf: bool) -> System {
    let mut sys = System::new();
    for i in 0..n {
        sys.add_var(format!("v{i}"), allow_inf && rng.gen_bool(0.3));
    }
    for _ in 0..rng.gen_range(1..=5) {
        let k = rng.gen_range(1..=3);
        let c = (0..k)
            .map(|_| {
                Comparison::new(
                    random_expr(rng, n, allow_inf),
                    OPS[rng.gen_range(0..6)],
                    random_expr(rng, n, allow_inf),
                )
            })
            .collect();
        sys.add_clause(Clause(c));
    }
    sys
}

/// Exhaustive search over `values^n`.
pub fn enumerate(sys: &System, values: &[ExtNat]) -> Option<Assignment> {
    let n = sys.num_vars();
    let mut idx = vec![0usize; n];
    loop {
        let a = Assignment::from_values(idx.iter().map(|&i| values[i]).collect());
        if sys.check(&a) {
            return Some(a);
        }
        let mut k = 0;
        loop {
            if k == n {
                return None;
            }
            idx[k] += 1;
            if idx[k] < values.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
