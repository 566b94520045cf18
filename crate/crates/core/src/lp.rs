//! Dense two-phase simplex over a generic ordered field.
//!
//! Used with `BigRational` for exact feasibility decisions and witnesses,
//! and with `f64` for cheap screening. Bland's rule is used for both
//! entering and leaving choices so degenerate problems terminate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub trait LpScalar: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

const F64_TOL: f64 = 1e-9;

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
}

pub fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coefficients: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `maximize objective·x` subject to the constraints and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![T::zero(); n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn minimize(&mut self, costs: Vec<T>) {
        self.objective = costs.iter().map(LpScalar::neg).collect();
    }

    pub fn add(&mut self, coefficients: Vec<T>, relation: Relation, rhs: T) {
        debug_assert_eq!(coefficients.len(), self.n_vars);
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> LpOutcome<T> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    n_cols: usize,
    first_artificial: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let m = lp.constraints.len();
        let n = lp.n_vars;
        // Columns: originals, one slack per inequality, one artificial per row
        // needing it.
        let mut slack_of = vec![None; m];
        let mut next = n;
        for (i, c) in lp.constraints.iter().enumerate() {
            if c.relation != Relation::Eq {
                slack_of[i] = Some(next);
                next += 1;
            }
        }
        let first_artificial = next;
        let mut needs_artificial = vec![false; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            // After orienting every row to a nonnegative right-hand side, a
            // row can start from its slack only if the slack enters with +1.
            let flipped = c.rhs.is_neg();
            let slack_sign_positive = match c.relation {
                Relation::Le => !flipped,
                Relation::Ge => flipped,
                Relation::Eq => false,
            };
            if !slack_sign_positive {
                needs_artificial[i] = true;
                next += 1;
            }
        }
        let n_cols = next;
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art = first_artificial;
        for (i, c) in lp.constraints.iter().enumerate() {
            let flipped = c.rhs.is_neg();
            let mut row = vec![T::zero(); n_cols];
            for (j, a) in c.coefficients.iter().enumerate() {
                row[j] = if flipped { a.neg() } else { a.clone() };
            }
            if let Some(s) = slack_of[i] {
                let base = if c.relation == Relation::Le {
                    T::one()
                } else {
                    T::one().neg()
                };
                row[s] = if flipped { base.neg() } else { base };
            }
            if needs_artificial[i] {
                row[art] = T::one();
                basis.push(art);
                art += 1;
            } else {
                basis.push(slack_of[i].unwrap());
            }
            rows.push(row);
            rhs.push(if flipped { c.rhs.neg() } else { c.rhs.clone() });
        }
        Tableau {
            rows,
            rhs,
            basis,
            n_cols,
            first_artificial,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.div(&p);
        }
        self.rhs[r] = self.rhs[r].div(&p);
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.sub(&f.mul(pv));
                }
            }
            self.rhs[i] = self.rhs[i].sub(&f.mul(&pivot_rhs));
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost·x` over columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, cost: &[T], limit: usize) -> bool {
        loop {
            // reduced cost d_j = c_j - c_B · column_j
            let mut entering = None;
            for j in 0..limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    let a = &self.rows[i][j];
                    if !a.is_zero() && !cost[b].is_zero() {
                        d = d.sub(&cost[b].mul(a));
                    }
                }
                if d.is_pos() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leaving: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs[i].div(a);
                let better = match &leaving {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr
                            || (!(ratio > *lr) && !(ratio < *lr) && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            match leaving {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<T>) -> LpOutcome<T> {
        if self.first_artificial < self.n_cols {
            let mut phase1 = vec![T::zero(); self.n_cols];
            for v in phase1.iter_mut().skip(self.first_artificial) {
                *v = T::one().neg();
            }
            self.optimize(&phase1, self.n_cols);
            for (i, &b) in self.basis.iter().enumerate() {
                if b >= self.first_artificial && self.rhs[i].is_pos() {
                    return LpOutcome::Infeasible;
                }
            }
            // Drive zero-level artificials out of the basis.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero());
                    match col {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.rows.remove(i);
                            self.rhs.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let mut cost = vec![T::zero(); self.n_cols];
        cost[..lp.n_vars].clone_from_slice(&lp.objective);
        if !self.optimize(&cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![T::zero(); lp.n_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < lp.n_vars {
                x[b] = self.rhs[i].clone();
            }
        }
        let mut value = T::zero();
        for (c, v) in lp.objective.iter().zip(&x) {
            value = value.add(&c.mul(v));
        }
        LpOutcome::Optimal { x, value }
    }
}
