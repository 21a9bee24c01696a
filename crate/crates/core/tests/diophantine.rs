mod common;

use common::{enumerate, random_system};
use flpc::diophantine::{solve, solve_with, Cmp, Comparison, LinExpr, SolveMode, SolverConfig, System};
use flpc::ext::{Fin, Inf};
use flpc::ExtNat;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn small_sum_with_lower_bound() {
    let mut sys = System::new();
    let x = sys.add_var("x", false);
    let y = sys.add_var("y", false);
    sys.add(Comparison::new(LinExpr::sum([x, y]), Cmp::Eq, LinExpr::constant(3u64)));
    sys.add(Comparison::new(LinExpr::var(x), Cmp::Ge, LinExpr::constant(2u64)));
    let a = solve(&sys, SolveMode::OverN).unwrap().unwrap();
    assert!(sys.check(&a));
    assert!(enumerate(&sys, &(0..=3).map(Fin).collect::<Vec<_>>()).is_some());
}

fn bounded_completeness(seed: u64, cases: usize, mode: SolveMode) {
    let mut rng = StdRng::seed_from_u64(seed);
    let finite: Vec<ExtNat> = (0..=12).map(Fin).collect();
    let mut extended = finite.clone();
    extended.push(Inf);
    for case in 0..cases {
        let n = rng.gen_range(1..=if case % 10 == 0 { 6 } else { 4 });
        let sys = random_system(&mut rng, n, mode == SolveMode::OverNStar);
        let got = solve_with(&sys, mode, &SolverConfig::default()).unwrap().assignment;
        match &got {
            Some(a) => assert!(sys.check(a)),
            None => {
                let values = if mode == SolveMode::OverN { &finite } else { &extended };
                if let Some(w) = enumerate(&sys, values) {
                    panic!("solver said UNSAT but {:?} satisfies\n{}", w, sys);
                }
            }
        }
        if mode == SolveMode::OverNStar {
            // a solution over the naturals is one over the extended naturals
            if let Some(a) = solve(&sys, SolveMode::OverN).unwrap() {
                assert!(sys.check(&a));
                assert!(got.is_some(), "over N SAT but over N* UNSAT\n{sys}");
            }
        }
    }
}

#[test]
fn bounded_completeness_over_naturals() {
    bounded_completeness(1, 400, SolveMode::OverN);
}

#[test]
fn bounded_completeness_with_infinity() {
    bounded_completeness(2, 400, SolveMode::OverNStar);
}
