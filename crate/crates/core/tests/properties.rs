mod common;

use std::collections::BTreeMap;

use common::*;
use flpc::corpus::{encode_hilbert, hilbert_model, DiophEq, DiophSystem};
use flpc::modeltools::{brute_force_search, evaluate, search_normal_form, Structure};
use flpc::normalform::{branch_nullary, to_normal_form, to_normal_form_with, NormalForm, NormalFormOptions};
use flpc::reducer::{decide, decide_normal_form, DecideConfig, ReduceOptions, ReductionMode};
use flpc::sat2::{decide2_with, EncodeOptions, Grouping};
use flpc::syntax::{classify_fragment, parse_formula, print_formula};
use flpc::typespace::{atom_basis, enumerate_types, restrict_type};
use flpc::diophantine::SolverConfig;
use flpc::Signature;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn sig_mixed() -> Signature {
    Signature::from_pairs([("c", 0), ("p", 1), ("r", 2), ("t", 3)]).unwrap()
}

fn random_structure(rng: &mut StdRng, sig: &Signature, n: usize) -> Structure {
    let mut s = Structure::new(n, sig);
    for (name, a) in sig.iter() {
        for t in flpc::modeltools::all_tuples(n, a) {
            s.set(name, &t, rng.gen_bool(0.4));
        }
    }
    s
}

/// Whether some branch of the normal form has a model of size at most `max`.
fn nf_has_model(nf: &NormalForm, max: usize) -> bool {
    branch_nullary(nf).iter().any(|b| search_normal_form(b, max).unwrap().is_some())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), fluted in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sig = sig_mixed();
        let f = random_sentence(&mut rng, &sig, 3, fluted);
        let text = print_formula(&f);
        let back = parse_formula(&text, &sig).unwrap();
        prop_assert_eq!(back, f, "{}", text);
    }

    #[test]
    fn fluted_implies_fluted_rev(seed in any::<u64>(), fluted in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let f = random_sentence(&mut rng, &sig_mixed(), 3, fluted);
        let r = classify_fragment(&f);
        prop_assert!(!r.is_fluted || r.is_fluted_rev);
        if fluted {
            prop_assert!(r.is_fluted);
        }
    }

    #[test]
    fn normal_form_shape_and_size(seed in any::<u64>(), literal in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let f = random_sentence(&mut rng, &sig_mixed(), 3, true);
        let nf = to_normal_form_with(&f, NormalFormOptions { recognize_guarded: !literal }).unwrap();
        for b in branch_nullary(&nf) {
            let lo = atom_basis(&b.signature, b.width - 1);
            let hi = atom_basis(&b.signature, b.width);
            for c in b.positive.iter().chain(&b.negative) {
                prop_assert!(lo.compile(&c.guard).is_ok(), "guard {} above depth {}", c.guard, b.width - 1);
                prop_assert!(hi.compile(&c.body).is_ok(), "body {} above depth {}", c.body, b.width);
            }
        }
        prop_assert!(nf.size() <= 16 * f.size(), "{} vs {}", nf.size(), f.size());
    }

    #[test]
    fn padding_preserves_truth(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let narrow = width2_nf(&mut rng);
        let mut wide = narrow.clone();
        wide.width = 3;
        for n_extra in [3usize, 4] {
            let mut deeper = narrow.clone();
            deeper.width = n_extra;
            let s = random_structure(&mut rng, &sig_pr(), n);
            prop_assert_eq!(evaluate(&s, &narrow.to_formula(), &[]), evaluate(&s, &deeper.to_formula(), &[]));
        }
        let s = random_structure(&mut rng, &sig_pr(), n);
        prop_assert_eq!(evaluate(&s, &narrow.to_formula(), &[]), evaluate(&s, &wide.to_formula(), &[]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn normal_form_equisatisfiable_small(seed in any::<u64>(), literal in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sig = Signature::from_pairs([("c", 0), ("p", 1), ("r", 2)]).unwrap();
        let f = random_sentence(&mut rng, &sig, 2, true);
        let nf = to_normal_form_with(&f, NormalFormOptions { recognize_guarded: !literal }).unwrap();
        let direct = brute_force_search(&f, &sig, 3).unwrap();
        prop_assert_eq!(direct.is_some(), nf_has_model(&nf, 3), "{}", f);
        if let Some(m) = direct {
            // expanding a model of the input gives a model of the normal form
            prop_assert!(evaluate(&nf.expand_fresh(&m), &nf.to_formula(), &[]));
        }
    }

    #[test]
    fn reduction_modes_agree(seed in any::<u64>(), with_p in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let nf = width3_nf(&mut rng, with_p);
        let mut verdicts = Vec::new();
        for mode in [ReductionMode::Types, ReductionMode::Classes] {
            for prune in [false, true] {
                let cfg = DecideConfig { deterministic: true, reduce: ReduceOptions { mode, prune }, ..Default::default() };
                let (sat, w) = decide_normal_form(&nf, &cfg).unwrap();
                if let Some(flpc::sat2::Witness::Finite(m)) = w {
                    prop_assert!(evaluate(&m, &nf.to_formula(), &[]));
                }
                verdicts.push(sat);
            }
        }
        prop_assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "{:?}\n{}", verdicts, nf);
    }

    #[test]
    fn encodings_agree(seed in any::<u64>(), finite in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let nf = width2_nf(&mut rng);
        let mut verdicts = Vec::new();
        for grouping in [Grouping::PerType, Grouping::Cells] {
            for prune in [false, true] {
                let d = decide2_with(&nf, finite, EncodeOptions { grouping, prune }, &SolverConfig::default()).unwrap();
                verdicts.push(d.assignment.is_some());
            }
        }
        prop_assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "{:?}\n{}", verdicts, nf);
    }

    #[test]
    fn parallel_and_sequential_verdicts_match(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sig = Signature::from_pairs([("c", 0), ("d", 0), ("p", 1), ("r", 2)]).unwrap();
        let f = random_sentence(&mut rng, &sig, 2, true);
        let seq = decide(&f, &DecideConfig { deterministic: true, ..Default::default() }).unwrap();
        let par = decide(&f, &DecideConfig { deterministic: false, ..Default::default() }).unwrap();
        prop_assert_eq!(seq.satisfiable, par.satisfiable);
    }

    #[test]
    fn hilbert_models_verify(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let names = ["a", "b", "c", "d", "e"];
        let sol: BTreeMap<String, u64> = names.iter().map(|n| (n.to_string(), rng.gen_range(0..=2))).collect();
        let mut eqs = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let mut pick = names.to_vec();
            let mut take = |rng: &mut StdRng| pick.remove(rng.gen_range(0..pick.len())).to_string();
            let (u, v) = (take(&mut rng), take(&mut rng));
            let e = match rng.gen_range(0..3) {
                0 if sol[&u] == 1 => DiophEq::One(u),
                1 => {
                    let w = take(&mut rng);
                    DiophEq::Sum(u, v, w)
                }
                _ => {
                    let w = take(&mut rng);
                    DiophEq::Product(u, v, w)
                }
            };
            eqs.push(e);
        }
        // adjust the right-hand sides so that `sol` is a solution
        let mut sol = sol;
        for e in &eqs {
            match e {
                DiophEq::Sum(u, v, w) => { let k = sol[u] + sol[v]; sol.insert(w.clone(), k); }
                DiophEq::Product(u, v, w) => { let k = sol[u] * sol[v]; sol.insert(w.clone(), k); }
                DiophEq::One(_) => {}
            }
        }
        let sys = DiophSystem::new(eqs).unwrap();
        prop_assume!(sys.check(&sol).is_ok());
        let f = encode_hilbert(&sys);
        let r = classify_fragment(&f);
        prop_assert!(r.variable_width <= 3 && r.is_fluted_rev);
        let sig = flpc::corpus::hilbert_signature(&sys);
        prop_assert_eq!(parse_formula(&print_formula(&f), &sig).unwrap(), f.clone());
        let m = hilbert_model(&sys, &sol).unwrap();
        prop_assert!(evaluate(&m, &f, &[]));
    }
}

#[test]
fn restriction_is_uniform() {
    let sig = Signature::from_pairs([("p", 1), ("r", 2), ("t", 3)]).unwrap();
    for l in 1..=2 {
        let lo = atom_basis(&sig, l);
        let hi = atom_basis(&sig, l + 1);
        let top = hi.top_atoms().count();
        let mut counts: BTreeMap<_, usize> = BTreeMap::new();
        for t in enumerate_types(&hi).unwrap() {
            *counts.entry(restrict_type(t, &hi, &lo)).or_default() += 1;
        }
        assert_eq!(counts.len(), 1 << lo.len());
        assert!(counts.values().all(|&k| k == 1 << top));
    }
}

#[test]
fn brute_force_is_sound_and_deterministic() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..40 {
        let f = random_sentence(&mut rng, &sig_pr(), 2, true);
        let a = brute_force_search(&f, &sig_pr(), 3).unwrap();
        let b = brute_force_search(&f, &sig_pr(), 3).unwrap();
        assert_eq!(a, b);
        if let Some(m) = a {
            assert!(evaluate(&m, &f, &[]));
        }
    }
}

#[test]
fn literal_normal_form_keeps_models() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..40 {
        let f = random_sentence(&mut rng, &sig_pr(), 2, true);
        let nf = to_normal_form(&f).unwrap();
        if let Some(m) = brute_force_search(&f, &sig_pr(), 2).unwrap() {
            assert!(evaluate(&nf.expand_fresh(&m), &nf.to_formula(), &[]), "{f}");
        }
    }
}
