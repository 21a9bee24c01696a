//! Dense two-phase simplex over non-negative variables.
//!
//! The tableau is generic over the scalar field so the same code runs in
//! floating point (fast pruning) and in exact rationals (confirmation).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub trait Scalar: Clone + Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i128(v: i128) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn less(&self, o: &Self) -> bool;
    fn to_f64(&self) -> f64;
}

const EPS: f64 = 1e-9;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i128(v: i128) -> Self {
        v as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        self.abs() <= EPS
    }
    fn is_pos(&self) -> bool {
        *self > EPS
    }
    fn is_neg(&self) -> bool {
        *self < -EPS
    }
    fn less(&self, o: &Self) -> bool {
        *self < *o - EPS
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_i128(v: i128) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// `sum coeffs * x <= rhs`, or `= rhs` when `eq` is set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LpRow {
    pub coeffs: Vec<(usize, i128)>,
    pub rhs: i128,
    pub eq: bool,
}

#[derive(Clone, Debug)]
pub enum LpResult<S> {
    /// Phase one ended with a positive infeasibility measure.
    Infeasible { residual: S },
    /// A vertex minimising the sum of the variables.
    Feasible(Vec<S>),
    PivotLimit,
}

struct Tableau<S> {
    t: Vec<Vec<S>>,
    basis: Vec<usize>,
    /// Columns that may never enter the basis (artificials).
    first_artificial: usize,
    rhs: usize,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col].clone();
        let nz: Vec<usize> = (0..=self.rhs).filter(|&j| !self.t[row][j].is_zero()).collect();
        for &j in &nz {
            self.t[row][j] = self.t[row][j].div(&p);
        }
        let pivot_row: Vec<(usize, S)> = nz.iter().map(|&j| (j, self.t[row][j].clone())).collect();
        for i in 0..self.t.len() {
            if i == row || self.t[i][col].is_zero() {
                continue;
            }
            let f = self.t[i][col].clone();
            for (j, v) in &pivot_row {
                let nv = self.t[i][*j].sub(&f.mul(v));
                self.t[i][*j] = nv;
            }
            // keep the pivot column exactly clean in floating point
            self.t[i][col] = S::zero();
        }
        self.basis[row] = col;
    }

    /// Runs Bland's rule on the objective stored in the last row.
    /// Returns false if the pivot budget ran out.
    fn optimise(&mut self, budget: &mut usize) -> bool {
        let m = self.basis.len();
        loop {
            let obj = &self.t[m];
            let Some(col) = (0..self.first_artificial).find(|&j| obj[j].is_neg()) else {
                return true;
            };
            let mut best: Option<(usize, S)> = None;
            for i in 0..m {
                let a = &self.t[i][col];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.t[i][self.rhs].div(a);
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio.less(&br) || (!br.less(&ratio) && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((row, _)) = best else {
                // unbounded; cannot happen for the non-negative objectives used here
                return true;
            };
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            self.pivot(row, col);
        }
    }
}

/// Feasibility of `rows` over `x >= 0` in `nvars` variables.
pub fn solve_lp<S: Scalar>(nvars: usize, rows: &[LpRow], max_pivots: usize) -> LpResult<S> {
    let m = rows.len();
    let nslack = rows.iter().filter(|r| !r.eq).count();
    let first_artificial = nvars + nslack;
    let ncols = first_artificial + m;
    let rhs = ncols;
    let mut t = vec![vec![S::zero(); ncols + 1]; m + 1];
    let mut basis = vec![0; m];
    let mut slack = nvars;
    for (i, r) in rows.iter().enumerate() {
        let sign: i128 = if r.rhs < 0 { -1 } else { 1 };
        for &(v, c) in &r.coeffs {
            t[i][v] = t[i][v].add(&S::from_i128(sign * c));
        }
        if !r.eq {
            t[i][slack] = S::from_i128(sign);
            slack += 1;
        }
        t[i][first_artificial + i] = S::one();
        t[i][rhs] = S::from_i128(sign * r.rhs);
        basis[i] = first_artificial + i;
    }
    for j in (0..first_artificial).chain(std::iter::once(rhs)) {
        let mut s = S::zero();
        for row in t.iter().take(m) {
            s = s.sub(&row[j]);
        }
        t[m][j] = s;
    }
    let mut tab = Tableau { t, basis, first_artificial, rhs };
    let mut budget = max_pivots;
    if !tab.optimise(&mut budget) {
        return LpResult::PivotLimit;
    }
    let residual = S::zero().sub(&tab.t[m][rhs]);
    if residual.is_pos() {
        return LpResult::Infeasible { residual };
    }
    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] >= first_artificial {
            if let Some(j) = (0..first_artificial).find(|&j| !tab.t[i][j].is_zero()) {
                tab.pivot(i, j);
            }
        }
    }
    // phase two: minimise the sum of the structural variables
    for j in 0..=rhs {
        let cost = if j < nvars { S::one() } else { S::zero() };
        let mut z = S::zero();
        for i in 0..m {
            if tab.basis[i] < nvars {
                z = z.add(&tab.t[i][j]);
            }
        }
        tab.t[m][j] = if j == rhs { S::zero().sub(&z) } else { cost.sub(&z) };
    }
    if !tab.optimise(&mut budget) {
        return LpResult::PivotLimit;
    }
    let mut x = vec![S::zero(); nvars];
    for i in 0..m {
        if tab.basis[i] < nvars {
            x[tab.basis[i]] = tab.t[i][rhs].clone();
        }
    }
    LpResult::Feasible(x)
}

/// Exact rational value as an integer, if it is one.
pub fn as_integer(v: &BigRational) -> Option<i128> {
    if v.is_integer() {
        v.to_integer().to_i128()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, i128)], rhs: i128, eq: bool) -> LpRow {
        LpRow { coeffs: coeffs.to_vec(), rhs, eq }
    }

    #[test]
    fn feasible_minimises_sum() {
        // x + y = 3, x >= 2  (as -x <= -2)
        let rows = [row(&[(0, 1), (1, 1)], 3, true), row(&[(0, -1)], -2, false)];
        match solve_lp::<BigRational>(2, &rows, 1000) {
            LpResult::Feasible(x) => {
                let x: Vec<i128> = x.iter().map(|v| as_integer(v).unwrap()).collect();
                assert_eq!(x[0] + x[1], 3);
                assert!(x[0] >= 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_detected_in_both_fields() {
        let rows = [row(&[(0, 1)], 1, false), row(&[(0, -1)], -2, false)];
        assert!(matches!(solve_lp::<f64>(1, &rows, 1000), LpResult::Infeasible { .. }));
        assert!(matches!(solve_lp::<BigRational>(1, &rows, 1000), LpResult::Infeasible { .. }));
    }

    #[test]
    fn fractional_vertex() {
        // 2x = 1
        let rows = [row(&[(0, 2)], 1, true)];
        match solve_lp::<BigRational>(1, &rows, 100) {
            LpResult::Feasible(x) => assert_eq!(x[0], BigRational::new(1.into(), 2.into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_equalities() {
        let rows = [row(&[(0, 1), (1, 1)], 2, true), row(&[(0, 2), (1, 2)], 4, true)];
        assert!(matches!(solve_lp::<f64>(2, &rows, 100), LpResult::Feasible(_)));
    }
}
