//! Integer feasibility over the naturals by branch-and-bound.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::lp::{as_integer, solve_lp, LpResult, LpRow};
use super::Budget;
use crate::ResourceCap;

/// Floating-point phase-one residuals below this are re-checked exactly.
const CONFIRM_BELOW: f64 = 1e-3;
const INTEGRALITY: f64 = 1e-6;

#[derive(Debug, PartialEq, Eq)]
pub enum LpStatus {
    Feasible,
    Infeasible,
}

fn rows_hold(rows: &[LpRow], x: &[i128]) -> bool {
    rows.iter().all(|r| {
        let lhs: i128 = r.coeffs.iter().map(|&(v, c)| c * x[v]).sum();
        if r.eq {
            lhs == r.rhs
        } else {
            lhs <= r.rhs
        }
    })
}

/// Divides each row by the gcd of its coefficients. Returns false when an
/// equality row has no integer solution for that reason alone.
pub fn normalise_rows(rows: &mut Vec<LpRow>) -> bool {
    for r in rows.iter_mut() {
        r.coeffs.retain(|&(_, c)| c != 0);
        let g = r.coeffs.iter().fold(0i128, |g, &(_, c)| g.gcd(&c));
        if g == 0 {
            let ok = if r.eq { r.rhs == 0 } else { r.rhs >= 0 };
            if !ok {
                return false;
            }
            continue;
        }
        if r.eq {
            if r.rhs % g != 0 {
                return false;
            }
            r.rhs /= g;
        } else {
            r.rhs = Integer::div_floor(&r.rhs, &g);
        }
        for (_, c) in r.coeffs.iter_mut() {
            *c /= g;
        }
    }
    rows.retain(|r| !r.coeffs.is_empty());
    true
}

fn exact_lp(nvars: usize, rows: &[LpRow], budget: &mut Budget) -> Result<Option<Vec<BigRational>>, ResourceCap> {
    budget.tick_lp()?;
    match solve_lp::<BigRational>(nvars, rows, budget.max_pivots) {
        LpResult::Feasible(x) => Ok(Some(x)),
        LpResult::Infeasible { .. } => Ok(None),
        LpResult::PivotLimit => Err(ResourceCap("simplex pivot limit".into())),
    }
}

/// Relaxation check used for pruning. Floating point decides clear cases;
/// borderline infeasibility claims are confirmed in exact arithmetic.
pub fn lp_feasible(nvars: usize, rows: &[LpRow], budget: &mut Budget) -> Result<LpStatus, ResourceCap> {
    budget.tick_lp()?;
    match solve_lp::<f64>(nvars, rows, budget.max_pivots) {
        LpResult::Feasible(_) => Ok(LpStatus::Feasible),
        LpResult::Infeasible { residual } if residual >= CONFIRM_BELOW => Ok(LpStatus::Infeasible),
        _ => Ok(if exact_lp(nvars, rows, budget)?.is_some() { LpStatus::Feasible } else { LpStatus::Infeasible }),
    }
}

/// Whether the equality rows have a solution over the integers, ignoring
/// signs. Column operations bring each row to a single pivot; every pivot
/// value must then be integral.
pub fn lattice_feasible(nvars: usize, rows: &[LpRow]) -> bool {
    let eqs: Vec<&LpRow> = rows.iter().filter(|r| r.eq).collect();
    let mut a: Vec<Vec<BigInt>> = eqs
        .iter()
        .map(|r| {
            let mut v = vec![BigInt::zero(); nvars];
            for &(c, k) in &r.coeffs {
                v[c] += k;
            }
            v
        })
        .collect();
    let mut y: Vec<BigInt> = Vec::new();
    for (r, row) in eqs.iter().enumerate() {
        let k = y.len();
        // Euclid on the columns k.. of row r
        loop {
            let nz: Vec<usize> = (k..nvars).filter(|&c| !a[r][c].is_zero()).collect();
            if nz.len() <= 1 {
                if let Some(&c) = nz.first() {
                    if c != k {
                        a.iter_mut().for_each(|row| row.swap(c, k));
                    }
                }
                break;
            }
            let piv = *nz.iter().min_by_key(|&&c| a[r][c].abs()).unwrap();
            for &c in &nz {
                if c != piv {
                    let q = &a[r][c] / &a[r][piv];
                    for row in a.iter_mut() {
                        let d = &row[piv] * &q;
                        row[c] -= d;
                    }
                }
            }
        }
        let mut rest = BigInt::from(row.rhs);
        for (c, v) in y.iter().enumerate() {
            rest -= &a[r][c] * v;
        }
        if k < nvars && !a[r][k].is_zero() {
            if !(&rest % &a[r][k]).is_zero() {
                return false;
            }
            y.push(&rest / &a[r][k]);
        } else if !rest.is_zero() {
            return false;
        }
    }
    true
}

enum Relaxation {
    Infeasible,
    Integral(Vec<i128>),
    /// Branch on `var` with fractional value whose floor is `floor`.
    Fractional { var: usize, floor: i128 },
}

fn relax(nvars: usize, rows: &[LpRow], budget: &mut Budget) -> Result<Relaxation, ResourceCap> {
    budget.tick_lp()?;
    let approx = match solve_lp::<f64>(nvars, rows, budget.max_pivots) {
        LpResult::Feasible(x) => Some(x),
        LpResult::Infeasible { residual } if residual >= CONFIRM_BELOW => return Ok(Relaxation::Infeasible),
        _ => None,
    };
    if let Some(x) = approx {
        let rounded: Vec<i128> = x.iter().map(|v| v.round().max(0.0) as i128).collect();
        if rows_hold(rows, &rounded) {
            return Ok(Relaxation::Integral(rounded));
        }
        let frac = x
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - v.round()).abs(), v.floor()))
            .filter(|(_, d, _)| *d > INTEGRALITY)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((var, _, floor)) = frac {
            return Ok(Relaxation::Fractional { var, floor: floor as i128 });
        }
    }
    let Some(x) = exact_lp(nvars, rows, budget)? else {
        return Ok(Relaxation::Infeasible);
    };
    let ints: Vec<Option<i128>> = x.iter().map(as_integer).collect();
    if let Some(pos) = ints.iter().position(Option::is_none) {
        let floor = x[pos].floor().to_integer();
        let floor = i128::try_from(floor).map_err(|_| ResourceCap("integer overflow in relaxation".into()))?;
        return Ok(Relaxation::Fractional { var: pos, floor });
    }
    let ints: Vec<i128> = ints.into_iter().map(Option::unwrap).collect();
    debug_assert!(rows_hold(rows, &ints));
    Ok(Relaxation::Integral(ints))
}

/// Finds a non-negative integer solution of `rows`, or proves there is none
/// (up to the node budget).
pub fn solve_ilp(nvars: usize, rows: &[LpRow], budget: &mut Budget) -> Result<Option<Vec<i128>>, ResourceCap> {
    let mut base = rows.to_vec();
    if !normalise_rows(&mut base) || !lattice_feasible(nvars, &base) {
        return Ok(None);
    }
    let mut stack: Vec<Vec<LpRow>> = vec![Vec::new()];
    while let Some(extra) = stack.pop() {
        budget.tick_ilp()?;
        let mut all = base.clone();
        all.extend(extra.iter().cloned());
        match relax(nvars, &all, budget)? {
            Relaxation::Infeasible => {}
            Relaxation::Integral(x) => return Ok(Some(x)),
            Relaxation::Fractional { var, floor } => {
                let mut up = extra.clone();
                up.push(LpRow { coeffs: vec![(var, -1)], rhs: -(floor + 1), eq: false });
                let mut down = extra;
                down.push(LpRow { coeffs: vec![(var, 1)], rhs: floor, eq: false });
                // explore the lower branch first
                stack.push(up);
                stack.push(down);
            }
        }
    }
    Ok(None)
}
