//! Exit-gate checks. Prints one PASS/FAIL line per criterion and fails the
//! target if any criterion is red.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::*;
use flpc::corpus::{
    encode_grid_axioms, encode_hilbert, grid_axiom, hilbert_model, hilbert_signature, truncated_grid_expansion,
    DiophSystem,
};
use flpc::diophantine::{solve, solve_with, SolveMode, SolverConfig};
use flpc::ext::{Fin, Inf};
use flpc::modeltools::{brute_force_search_with, evaluate, search_normal_form, Structure};
use flpc::normalform::NormalForm;
use flpc::reducer::{
    decide, decide_normal_form, expand_reduction, is_locally_homogeneous, lift_model, locally_homogenize,
    reduce_once, DecideConfig, ReduceOptions, ReductionMode,
};
use flpc::sat2::{
    assignment_from_model, build_model, decide2, encode_psi, globally_homogenize, is_globally_homogeneous, Witness,
};
use flpc::syntax::{classify_fragment, parse_formula_infer};
use flpc::ExtNat;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const AXIOM_OF_INFINITY_LIMIT: Duration = Duration::from_secs(1);
const WIDTH2_SUITE_LIMIT: Duration = Duration::from_secs(10 * 60);
const WIDTH3_SUITE_LIMIT: Duration = Duration::from_secs(30 * 60);
const ENVELOPE_LIMIT: Duration = Duration::from_secs(60);

const WIDTH2_CASES: u64 = 500;
const HOMOGENIZE_MODELS: usize = 100;
const T3_CASES: u64 = 200;
const PT3_CASES: u64 = 100;
const WIDTH3_MODELS: usize = 60;
/// Brute force bound under which a model must be found by the procedure.
const SMALL: usize = 4;
const SMALL3: usize = 3;
/// Brute force bound used to confirm negative verdicts.
const CONFIRM: usize = 6;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn finite_witness(w: Option<Witness>) -> Result<Structure, String> {
    match w {
        Some(Witness::Finite(m)) => Ok(m),
        Some(Witness::Abstract(_)) => Err("abstract witness for a finite question".into()),
        None => Err("no witness".into()),
    }
}

fn axiom_of_infinity() -> Outcome {
    let start = Instant::now();
    let (f, _) = parse_formula_infer("!exists[0+1] x (true)").map_err(|e| e.to_string())?;
    let cfg = |finite| DecideConfig { finite, ..Default::default() };
    let fin = decide(&f, &cfg(true)).map_err(|e| e.to_string())?;
    let inf = decide(&f, &cfg(false)).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(!fin.satisfiable, || "finsat reported SAT".into())?;
    ensure(inf.satisfiable, || "sat reported UNSAT".into())?;
    ensure(took < AXIOM_OF_INFINITY_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("finsat UNSAT, sat SAT in {took:?}"))
}

fn width2_agreement() -> Outcome {
    let start = Instant::now();
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..WIDTH2_CASES {
        let nf = width2_nf(&mut StdRng::seed_from_u64(seed));
        let small = search_normal_form(&nf, SMALL).map_err(|e| e.to_string())?;
        let d = decide2(&nf, true).map_err(|e| format!("seed {seed}: {e}"))?;
        match &d.assignment {
            Some(a) => {
                sat += 1;
                let w = build_model(&d.encoding, a).map_err(|e| format!("seed {seed}: {e}"))?;
                let m = finite_witness(Some(w))?;
                ensure(evaluate(&m, &nf.to_formula(), &[]), || format!("seed {seed}: witness fails\n{nf}"))?;
            }
            None => {
                unsat += 1;
                ensure(small.is_none(), || format!("seed {seed}: UNSAT but brute force found a model\n{nf}"))?;
                let big = search_normal_form(&nf, CONFIRM).map_err(|e| e.to_string())?;
                ensure(big.is_none(), || format!("seed {seed}: UNSAT but a model of size <= {CONFIRM} exists\n{nf}"))?;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < WIDTH2_SUITE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{WIDTH2_CASES} sentences, {sat} SAT / {unsat} UNSAT, 0 violations in {took:?}"))
}

fn homogenize_loop() -> Outcome {
    let mut models = 0;
    let mut seed = 0u64;
    while models < HOMOGENIZE_MODELS {
        seed += 1;
        let nf = width2_nf(&mut StdRng::seed_from_u64(10_000 + seed));
        let Some(m) = search_normal_form(&nf, SMALL).map_err(|e| e.to_string())? else {
            continue;
        };
        models += 1;
        let f = nf.to_formula();
        let h = globally_homogenize(&m);
        ensure(evaluate(&h, &f, &[]), || format!("seed {seed}: homogenization broke the model\n{nf}"))?;
        ensure(is_globally_homogeneous(&h), || format!("seed {seed}: not globally homogeneous"))?;
        let enc = encode_psi(&nf).map_err(|e| e.to_string())?;
        let a = assignment_from_model(&enc, &h).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(enc.system.check(&a), || format!("seed {seed}: read-off counts violate the system\n{nf}"))?;
        let sol = solve(&enc.system, SolveMode::OverN)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("seed {seed}: solver UNSAT on a satisfiable system"))?;
        let built = finite_witness(Some(build_model(&enc, &sol).map_err(|e| e.to_string())?))?;
        ensure(evaluate(&built, &f, &[]), || format!("seed {seed}: built model fails\n{nf}"))?;
    }
    Ok(format!("{models} models, 0 violations"))
}

fn width3_cases(with_p: bool, cases: u64, salt: u64) -> Result<(usize, usize), String> {
    let cfg = DecideConfig {
        finite: true,
        deterministic: true,
        reduce: ReduceOptions { mode: ReductionMode::Classes, prune: with_p },
        ..Default::default()
    };
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..cases {
        let nf = width3_nf(&mut StdRng::seed_from_u64(salt + seed), with_p);
        let small = search_normal_form(&nf, SMALL3).map_err(|e| e.to_string())?;
        let (verdict, w) = decide_normal_form(&nf, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        if verdict {
            sat += 1;
            let m = finite_witness(w)?;
            ensure(evaluate(&m, &nf.to_formula(), &[]), || format!("seed {seed}: witness fails\n{nf}"))?;
            ensure(is_locally_homogeneous(&m, 2), || format!("seed {seed}: witness not locally homogeneous"))?;
        } else {
            unsat += 1;
            ensure(small.is_none(), || format!("seed {seed}: UNSAT but brute force found a model\n{nf}"))?;
            let big = search_normal_form(&nf, CONFIRM).map_err(|e| e.to_string())?;
            ensure(big.is_none(), || format!("seed {seed}: UNSAT but a model of size <= {CONFIRM} exists\n{nf}"))?;
        }
    }
    Ok((sat, unsat))
}

fn width3_pipeline() -> Outcome {
    let start = Instant::now();
    let (s1, u1) = width3_cases(false, T3_CASES, 20_000)?;
    let (s2, u2) = width3_cases(true, PT3_CASES, 30_000)?;
    let took = start.elapsed();
    ensure(took < WIDTH3_SUITE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{{t}}: {s1} SAT / {u1} UNSAT, {{p,t}} pruned: {s2} SAT / {u2} UNSAT, 0 violations in {took:?}"))
}

fn lift_checks(nf: &NormalForm, m: &Structure, mode: ReductionMode, tag: &str) -> Result<(), String> {
    let (reduced, step) = reduce_once(nf, ReduceOptions { mode, prune: false }).map_err(|e| e.to_string())?;
    let rf = reduced.to_formula();
    let expanded = expand_reduction(m, &step);
    ensure(evaluate(&expanded, &rf, &[]), || format!("{tag} {mode:?}: expansion fails the reduced sentence\n{nf}"))?;
    let back = lift_model(&expanded, &step).map_err(|e| e.to_string())?;
    ensure(evaluate(&back, &nf.to_formula(), &[]), || format!("{tag} {mode:?}: lifted expansion fails\n{nf}"))?;
    let d = decide2(&reduced, true).map_err(|e| e.to_string())?;
    let a = d.assignment.ok_or_else(|| format!("{tag} {mode:?}: reduced sentence reported UNSAT"))?;
    let r = finite_witness(Some(build_model(&d.encoding, &a).map_err(|e| e.to_string())?))?;
    let lifted = lift_model(&r, &step).map_err(|e| e.to_string())?;
    ensure(evaluate(&lifted, &nf.to_formula(), &[]), || format!("{tag} {mode:?}: lifted witness fails\n{nf}"))?;
    Ok(())
}

fn local_homogeneity_loop() -> Outcome {
    let mut models = 0;
    let mut seed = 0u64;
    while models < WIDTH3_MODELS {
        seed += 1;
        let with_p = seed.is_multiple_of(2);
        let nf = width3_nf(&mut StdRng::seed_from_u64(40_000 + seed), with_p);
        let Some(m) = search_normal_form(&nf, SMALL3).map_err(|e| e.to_string())? else {
            continue;
        };
        models += 1;
        let tag = format!("seed {seed}");
        let h = locally_homogenize(&m, 2);
        ensure(evaluate(&h, &nf.to_formula(), &[]), || format!("{tag}: local homogenization broke the model\n{nf}"))?;
        ensure(is_locally_homogeneous(&h, 2), || format!("{tag}: not locally homogeneous"))?;
        lift_checks(&nf, &h, ReductionMode::Classes, &tag)?;
        if !with_p {
            lift_checks(&nf, &h, ReductionMode::Types, &tag)?;
        }
    }
    Ok(format!("{models} models, both reduction modes, 0 violations"))
}

fn diophantine_solver() -> Outcome {
    // the extended-naturals arithmetic rules
    let ns: Vec<ExtNat> = (0..=5).map(Fin).chain([Inf]).collect();
    ensure(Fin(0) * Inf == Fin(0) && Inf * Fin(0) == Fin(0), || "0 * inf".into())?;
    for &n in &ns {
        ensure(n + Inf == Inf && Inf + n == Inf, || format!("{n:?} + inf"))?;
        if n != Fin(0) {
            ensure(n * Inf == Inf && Inf * n == Inf, || format!("{n:?} * inf"))?;
        }
        ensure(n <= Inf, || format!("{n:?} above inf"))?;
    }
    let finite: Vec<ExtNat> = (0..=12).map(Fin).collect();
    let mut extended = finite.clone();
    extended.push(Inf);
    let mut rng = StdRng::seed_from_u64(50_000);
    let (mut sat, mut unsat) = (0, 0);
    for mode in [SolveMode::OverN, SolveMode::OverNStar] {
        for _ in 0..300 {
            let n = rng.gen_range(1..=6);
            let sys = random_system(&mut rng, n, mode == SolveMode::OverNStar);
            let got = solve_with(&sys, mode, &SolverConfig::default()).map_err(|e| e.to_string())?.assignment;
            match got {
                Some(a) => {
                    sat += 1;
                    ensure(sys.check(&a), || format!("witness fails\n{sys}"))?;
                }
                None => {
                    unsat += 1;
                    let values = if mode == SolveMode::OverN { &finite } else { &extended };
                    ensure(enumerate(&sys, values).is_none(), || format!("UNSAT refuted by enumeration\n{sys}"))?;
                }
            }
        }
    }
    Ok(format!("arithmetic rules hold; {sat} SAT re-verified, {unsat} UNSAT confirmed by enumeration"))
}

fn corpus() -> Outcome {
    let e = DiophSystem::parse("u = 1\nv = 1\nu + v = w").map_err(|e| e.to_string())?;
    let sol: BTreeMap<String, u64> = [("u", 1), ("v", 1), ("w", 2)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let m = hilbert_model(&e, &sol).map_err(|e| e.to_string())?;
    ensure(evaluate(&m, &encode_hilbert(&e), &[]), || "Hilbert model fails".into())?;
    let bad = DiophSystem::parse("u = 1\nv = 1\nu + v = w\nw = 1").map_err(|e| e.to_string())?;
    let found = brute_force_search_with(&encode_hilbert(&bad), &hilbert_signature(&bad), 4, 32)
        .map_err(|e| e.to_string())?;
    ensure(found.is_none(), || "unsolvable system has a small model".into())?;
    let r = classify_fragment(&encode_grid_axioms(false));
    ensure(r.variable_width == 4 && r.uses_counting, || format!("grid axioms classify as {r:?}"))?;
    for n in 1..=3 {
        let g = truncated_grid_expansion(n);
        for i in [1, 2, 3, 7, 8, 13] {
            ensure(evaluate(&g, &grid_axiom(i), &[]), || format!("axiom {i} fails at side {n}"))?;
        }
        if n >= 2 {
            ensure(!evaluate(&g, &grid_axiom(4), &[]), || format!("axiom 4 holds at side {n}"))?;
        }
    }
    Ok("Hilbert encoding, unsolvable system, grid classification and truncations".into())
}

const ENVELOPE: &str = "forall x1 (p(x1) -> exists[1+2] x2 (r(x1, x2) & q(x2))) \
    & forall x1 (q(x1) -> !exists[=2] x2 (s(x1, x2) & u(x2))) \
    & forall x1 (u(x1) | p(x1) -> exists[0+3] x2 (r(x1, x2) & !s(x1, x2))) \
    & forall x1 (exists[>=2] x2 (s(x1, x2) & !(x1 = x2))) \
    & exists x1 (p(x1) & q(x1) & !u(x1))";

fn envelope() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("envelope.fl");
    std::fs::write(&path, ENVELOPE).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["flpc", "--deterministic", "finsat", path.to_str().unwrap()];
    let code = flpc::cli::run_with(args.map(Into::into), None, &mut out, &mut err);
    let took = start.elapsed();
    let text = String::from_utf8_lossy(&out).trim().to_string();
    ensure(code <= 1, || format!("exit code {code}: {}", String::from_utf8_lossy(&err)))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let enc = &v["stats"]["encodings"][0];
    ensure(!enc.is_null() && !v["stats"]["elapsed_ms"].is_null(), || format!("no metrics in {text}"))?;
    ensure(took < ENVELOPE_LIMIT, || format!("took {took:?}"))?;
    println!("  verdict: {text}");
    Ok(format!("satisfiable={} in {took:?}", v["satisfiable"]))
}

const ORCHESTRA: &str = "forall x1 (orch(x1) -> exists[0+2] x2 (pers(x2) & \
    exists x3 (first_viol(x3) & hires_to_play(x1, x2, x3))))";

/// Forces at least one player per orchestra, so the even count must reach 2.
const ORCHESTRA_NONEMPTY: &str = "exists x1 (orch(x1)) & forall x1 (orch(x1) -> exists x2 (pers(x2) & \
    exists x3 (first_viol(x3) & hires_to_play(x1, x2, x3))))";

fn orchestra() -> Outcome {
    let (plain, _) = parse_formula_infer(ORCHESTRA).map_err(|e| e.to_string())?;
    let (extra, _) = parse_formula_infer(ORCHESTRA_NONEMPTY).map_err(|e| e.to_string())?;
    let forced = flpc::Formula::and(vec![plain.clone(), extra]);
    let mut kinds = Vec::new();
    for (f, label) in [(&plain, "plain"), (&forced, "nonempty")] {
        for finite in [false, true] {
            let v = decide(f, &DecideConfig { finite, ..Default::default() }).map_err(|e| e.to_string())?;
            ensure(v.satisfiable, || format!("{label} finite={finite}: UNSAT"))?;
            let m = finite_witness(v.witness)?;
            ensure(evaluate(&m, f, &[]), || format!("{label} finite={finite}: witness fails"))?;
            let n = m.size();
            let mut least = usize::MAX;
            for a in (0..n).filter(|&a| m.holds("orch", &[a])) {
                let players = (0..n)
                    .filter(|&b| {
                        m.holds("pers", &[b])
                            && (0..n).any(|c| m.holds("first_viol", &[c]) && m.holds("hires_to_play", &[a, b, c]))
                    })
                    .count();
                ensure(players % 2 == 0, || format!("{label}: orch element {a} has {players} first violinists"))?;
                least = least.min(players);
            }
            if label == "nonempty" {
                ensure(least >= 2 && least != usize::MAX, || format!("nonempty: least count {least}"))?;
            }
            kinds.push(format!("{label} {} on {n}", if finite { "FINSAT" } else { "SAT" }));
        }
    }
    Ok(format!("{}, even counts hold", kinds.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("axiom of infinity", axiom_of_infinity),
        ("width-2 oracle agreement", width2_agreement),
        ("global homogeneity loop", homogenize_loop),
        ("width-3 pipeline", width3_pipeline),
        ("local homogeneity and lifting", local_homogeneity_loop),
        ("Diophantine solver", diophantine_solver),
        ("corpus", corpus),
        ("performance envelope", envelope),
        ("orchestra end to end", orchestra),
    ];
    let mut red = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("criterion {} PASS: {name}: {detail}", i + 1),
            Err(why) => {
                red += 1;
                println!("criterion {} FAIL: {name}: {why}", i + 1);
            }
        }
        eprintln!("  ({:?})", start.elapsed());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - red, criteria.len());
    if red > 0 {
        std::process::exit(1);
    }
}
