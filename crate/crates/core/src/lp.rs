//! Exact rational linear programming: dense two-phase simplex with Bland's rule.

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// Variables are nonnegative unless marked free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    free: Vec<bool>,
    objective: Vec<Rational>,
    sense: Sense,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<Rational>,
    pub objective: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            free: vec![false; num_vars],
            objective: vec![Rational::zero(); num_vars],
            sense,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn set_objective(&mut self, coeffs: Vec<Rational>) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.objective = coeffs;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Column of the positive part of each original variable, and of the
    /// negative part for free variables.
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
    first_artificial: usize,
    cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut pos_col = Vec::with_capacity(lp.num_vars);
        let mut neg_col = Vec::with_capacity(lp.num_vars);
        let mut next = 0;
        for i in 0..lp.num_vars {
            pos_col.push(next);
            next += 1;
            if lp.free[i] {
                neg_col.push(Some(next));
                next += 1;
            } else {
                neg_col.push(None);
            }
        }
        let structural = next;
        let normalized: Vec<(Vec<Rational>, Relation, Rational)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let flipped = match c.relation {
                        Relation::LessEq => Relation::GreaterEq,
                        Relation::GreaterEq => Relation::LessEq,
                        Relation::Equal => Relation::Equal,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), flipped, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let slacks = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Equal)
            .count();
        let artificials = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::LessEq)
            .count();
        let first_artificial = structural + slacks;
        let cols = first_artificial + artificials;
        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut slack, mut art) = (structural, first_artificial);
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![Rational::zero(); cols + 1];
            for (i, a) in coeffs.iter().enumerate() {
                row[pos_col[i]] = a.clone();
                if let Some(nc) = neg_col[i] {
                    row[nc] = -a;
                }
            }
            match rel {
                Relation::LessEq => {
                    row[slack] = Rational::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::GreaterEq => {
                    row[slack] = -Rational::one();
                    slack += 1;
                    row[art] = Rational::one();
                    basis.push(art);
                    art += 1;
                }
                Relation::Equal => {
                    row[art] = Rational::one();
                    basis.push(art);
                    art += 1;
                }
            }
            row[cols] = rhs;
            rows.push(row);
        }
        Self {
            rows,
            basis,
            pos_col,
            neg_col,
            first_artificial,
            cols,
        }
    }

    fn pivot(&mut self, cost: &mut [Rational], r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = self.rows[r].clone();
        let nz: Vec<usize> = (0..=self.cols).filter(|&k| !pivot_row[k].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &k in &nz {
                let d = &f * &pivot_row[k];
                row[k] -= d;
            }
        }
        if !cost[c].is_zero() {
            let f = cost[c].clone();
            for &k in &nz {
                let d = &f * &pivot_row[k];
                cost[k] -= d;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes with reduced costs `cost` (last entry holds minus the
    /// objective value). Returns false when unbounded.
    fn optimize(&mut self, cost: &mut [Rational], allowed: usize) -> bool {
        loop {
            let Some(enter) = (0..allowed).find(|&j| cost[j].is_negative()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[enter].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(cost, r, enter);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let cols = self.cols;
        if self.first_artificial < cols {
            let mut cost = vec![Rational::zero(); cols + 1];
            for (i, &b) in self.basis.iter().enumerate() {
                if b >= self.first_artificial {
                    for k in 0..=cols {
                        if k < self.first_artificial || k == cols {
                            cost[k] -= &self.rows[i][k];
                        }
                    }
                }
            }
            self.optimize(&mut cost, self.first_artificial);
            if !cost[cols].is_zero() {
                return LpOutcome::Infeasible;
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] < self.first_artificial {
                    i += 1;
                    continue;
                }
                match (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                    Some(j) => {
                        self.pivot(&mut cost, i, j);
                        i += 1;
                    }
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            }
        }
        let sign = match lp.sense {
            Sense::Minimize => Rational::one(),
            Sense::Maximize => -Rational::one(),
        };
        let mut c = vec![Rational::zero(); cols + 1];
        for i in 0..lp.num_vars {
            c[self.pos_col[i]] = &lp.objective[i] * &sign;
            if let Some(nc) = self.neg_col[i] {
                c[nc] = -&c[self.pos_col[i]];
            }
        }
        let mut cost = c.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for k in 0..=cols {
                if !self.rows[i][k].is_zero() {
                    let d = &c[b] * &self.rows[i][k];
                    cost[k] -= d;
                }
            }
        }
        if !self.optimize(&mut cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut col_value = vec![Rational::zero(); cols];
        for (i, &b) in self.basis.iter().enumerate() {
            col_value[b] = self.rows[i][cols].clone();
        }
        let x: Vec<Rational> = (0..lp.num_vars)
            .map(|i| {
                let p = col_value[self.pos_col[i]].clone();
                match self.neg_col[i] {
                    Some(nc) => p - &col_value[nc],
                    None => p,
                }
            })
            .collect();
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal(LpSolution { x, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn textbook_maximization() {
        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective(v(&[2, 3]));
        lp.add_constraint(v(&[2, 1]), Relation::LessEq, int(18));
        lp.add_constraint(v(&[6, 5]), Relation::LessEq, int(60));
        lp.add_constraint(v(&[2, 5]), Relation::LessEq, int(40));
        let s = lp.solve().optimal().unwrap();
        assert_eq!(s.objective, int(28));
        assert_eq!(s.x, v(&[5, 6]));
    }

    #[test]
    fn equalities_free_variables_and_negative_rhs() {
        // min x - y, x + y = 1, y ≤ 3/2, x free.
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.set_free(0);
        lp.set_objective(v(&[1, -1]));
        lp.add_constraint(v(&[1, 1]), Relation::Equal, int(1));
        lp.add_constraint(v(&[0, 1]), Relation::LessEq, rat(3, 2));
        let s = lp.solve().optimal().unwrap();
        assert_eq!(s.x, vec![rat(-1, 2), rat(3, 2)]);
        assert_eq!(s.objective, int(-2));

        let mut lp = LinearProgram::new(1, Sense::Minimize);
        lp.set_objective(v(&[1]));
        lp.add_constraint(v(&[-1]), Relation::LessEq, int(-2));
        assert_eq!(lp.solve().optimal().unwrap().x, v(&[2]));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1, Sense::Minimize);
        lp.add_constraint(v(&[1]), Relation::GreaterEq, int(2));
        lp.add_constraint(v(&[1]), Relation::LessEq, int(1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective(v(&[1, 0]));
        lp.add_constraint(v(&[1, -1]), Relation::LessEq, int(1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.set_objective(v(&[1, 2]));
        lp.add_constraint(v(&[1, 1]), Relation::Equal, int(1));
        lp.add_constraint(v(&[2, 2]), Relation::Equal, int(2));
        let s = lp.solve().optimal().unwrap();
        assert_eq!(s.objective, int(1));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule; Bland's rule terminates.
        let mut lp = LinearProgram::new(4, Sense::Minimize);
        lp.set_objective(vec![rat(-3, 4), int(150), rat(-1, 50), int(6)]);
        lp.add_constraint(vec![rat(1, 4), int(-60), rat(-1, 25), int(9)], Relation::LessEq, int(0));
        lp.add_constraint(vec![rat(1, 2), int(-90), rat(-1, 50), int(3)], Relation::LessEq, int(0));
        lp.add_constraint(vec![int(0), int(0), int(1), int(0)], Relation::LessEq, int(1));
        let s = lp.solve().optimal().unwrap();
        assert_eq!(s.objective, rat(-1, 20));
    }
}
