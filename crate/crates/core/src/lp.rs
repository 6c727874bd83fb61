//! Exact rational linear programming.
//!
//! A dense two-phase simplex over [`Rat`] with Bland's anti-cycling pivot
//! rule. The obedience polytopes this crate solves over are highly
//! degenerate (many zero-probability feedback rules), so guaranteed
//! termination matters more than speed; instances are desk-scale.
//!
//! Strict inequalities are never modeled here. Callers that need a strict
//! answer (`> 0`) maximize a slack and compare the exact optimum to zero,
//! which is decidable because the arithmetic is exact.

use crate::rational::{format_rat, Rat};
use num::{One, Signed, Zero};
use thiserror::Error;

/// A linear program in the form used across the crate:
/// maximize `objective · x` subject to
/// `row · x = rhs` (equalities), `row · x ≥ rhs` (inequalities),
/// and `x ≥ 0` when `nonneg` is set.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub equalities: Vec<(Vec<Rat>, Rat)>,
    pub inequalities: Vec<(Vec<Rat>, Rat)>,
    pub nonneg: bool,
    pub objective: Vec<Rat>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            nonneg: true,
            objective: vec![Rat::zero(); num_vars],
        }
    }

    pub fn eq(&mut self, row: Vec<Rat>, rhs: Rat) -> &mut Self {
        self.equalities.push((row, rhs));
        self
    }

    pub fn ge(&mut self, row: Vec<Rat>, rhs: Rat) -> &mut Self {
        self.inequalities.push((row, rhs));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// A basic feasible solution (vertex) when optimal.
    pub solution: Option<Vec<Rat>>,
    /// Objective value recomputed from the solution when optimal.
    pub value: Option<Rat>,
    /// On infeasibility: one multiplier per original row (equalities first,
    /// then inequalities, in input order) certifying the contradiction.
    pub farkas: Option<Vec<Rat>>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row has {got} coefficients, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Maximizes the objective. Returns an exact optimum, or a certified
/// infeasibility/unboundedness status.
pub fn solve(lp: &LinearProgram) -> Result<LpResult, LpError> {
    Tableau::build(lp)?.run(lp)
}

/// Phase-one only: a feasible point or an infeasibility certificate.
pub fn feasible_point(lp: &LinearProgram) -> Result<LpResult, LpError> {
    let mut relaxed = lp.clone();
    relaxed.objective = vec![Rat::zero(); lp.num_vars];
    solve(&relaxed)
}

/// Plain-text tableau dump: one constraint per line, rationals as num/den.
pub fn dump(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let row_str = |row: &[Rat]| {
        row.iter()
            .map(format_rat)
            .collect::<Vec<_>>()
            .join(" ")
    };
    out.push_str(&format!("vars {} nonneg {}\n", lp.num_vars, lp.nonneg));
    out.push_str(&format!("max  {}\n", row_str(&lp.objective)));
    for (row, rhs) in &lp.equalities {
        out.push_str(&format!("eq   {} = {}\n", row_str(row), format_rat(rhs)));
    }
    for (row, rhs) in &lp.inequalities {
        out.push_str(&format!("ge   {} >= {}\n", row_str(row), format_rat(rhs)));
    }
    out
}

/// Dense simplex tableau in standard equality form `A x = b, x ≥ 0`.
struct Tableau {
    /// `rows[i]` has `total_cols` coefficient entries plus rhs at the end.
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    /// Count of structural columns (split vars + slacks), before artificials.
    structural: usize,
    /// Column count including artificials.
    total: usize,
    /// Sign applied to original row `i` to make its rhs nonnegative.
    row_sign: Vec<bool>,
    /// Number of split variable columns (2×num_vars when free, else num_vars).
    var_cols: usize,
    split: bool,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Tableau, LpError> {
        for (row, _) in lp.equalities.iter().chain(lp.inequalities.iter()) {
            if row.len() != lp.num_vars {
                return Err(LpError::Dimension {
                    expected: lp.num_vars,
                    got: row.len(),
                });
            }
        }
        if lp.objective.len() != lp.num_vars {
            return Err(LpError::Dimension {
                expected: lp.num_vars,
                got: lp.objective.len(),
            });
        }

        let split = !lp.nonneg;
        let var_cols = if split { 2 * lp.num_vars } else { lp.num_vars };
        let n_eq = lp.equalities.len();
        let n_ge = lp.inequalities.len();
        let m = n_eq + n_ge;
        let structural = var_cols + n_ge;
        let total = structural + m;

        let mut rows = Vec::with_capacity(m);
        let mut row_sign = vec![false; m];

        // Row order: equalities in input order, then inequalities. Each
        // inequality row·x ≥ rhs becomes row·x - s = rhs with slack s ≥ 0.
        for i in 0..m {
            let (orig, rhs, slack) = if i < n_eq {
                (&lp.equalities[i].0, &lp.equalities[i].1, None)
            } else {
                let k = i - n_eq;
                (&lp.inequalities[k].0, &lp.inequalities[k].1, Some(k))
            };
            let mut coeffs = vec![Rat::zero(); structural];
            for (j, c) in orig.iter().enumerate() {
                coeffs[j] = c.clone();
                if split {
                    coeffs[lp.num_vars + j] = -c.clone();
                }
            }
            if let Some(k) = slack {
                coeffs[var_cols + k] = -Rat::one();
            }
            let mut rhs_v = rhs.clone();
            if rhs_v.is_negative() {
                for c in coeffs.iter_mut() {
                    *c = -c.clone();
                }
                rhs_v = -rhs_v;
                row_sign[i] = true;
            }
            let mut full = vec![Rat::zero(); total + 1];
            full[..structural].clone_from_slice(&coeffs);
            full[structural + i] = Rat::one();
            full[total] = rhs_v;
            rows.push(full);
        }

        let basis = (0..m).map(|i| structural + i).collect();
        Ok(Tableau {
            rows,
            basis,
            structural,
            total,
            row_sign,
            var_cols,
            split,
        })
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpResult, LpError> {
        // Phase 1: maximize -sum of artificials.
        let mut cost = vec![Rat::zero(); self.total];
        for j in self.structural..self.total {
            cost[j] = -Rat::one();
        }
        let mut obj = self.reduced_costs(&cost);
        loop {
            match self.pivot_step(&mut obj, self.total) {
                Step::Done => break,
                Step::Unbounded => unreachable!("phase-1 objective is bounded"),
                Step::Pivoted => {}
            }
        }
        let phase1_value = self.objective_value(&cost);
        if phase1_value.is_negative() {
            let farkas = self.extract_farkas(&obj, lp);
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                solution: None,
                value: None,
                farkas: Some(farkas),
            });
        }
        self.evict_artificials();

        // Phase 2 over structural columns only.
        let mut cost = vec![Rat::zero(); self.total];
        let n = lp.num_vars;
        for j in 0..n {
            cost[j] = lp.objective[j].clone();
        }
        if self.split {
            for j in 0..n {
                cost[n + j] = -lp.objective[j].clone();
            }
        }
        let mut obj = self.reduced_costs(&cost);
        loop {
            match self.pivot_step(&mut obj, self.structural) {
                Step::Done => break,
                Step::Pivoted => {}
                Step::Unbounded => {
                    return Ok(LpResult {
                        status: LpStatus::Unbounded,
                        solution: None,
                        value: None,
                        farkas: None,
                    })
                }
            }
        }

        let solution = self.extract_solution(lp);
        // Exactness self-check: the value from the final basis must agree
        // with the objective recomputed from the extracted point.
        let value: Rat = lp
            .objective
            .iter()
            .zip(&solution)
            .map(|(c, x)| c * x)
            .fold(Rat::zero(), |a, v| a + v);
        debug_assert_eq!(value, self.objective_value(&cost));
        Ok(LpResult {
            status: LpStatus::Optimal,
            solution: Some(solution),
            value: Some(value),
            farkas: None,
        })
    }

    /// Reduced-cost row `c_j - c_B B^{-1} A_j` for the current basis.
    fn reduced_costs(&self, cost: &[Rat]) -> Vec<Rat> {
        let mut obj = vec![Rat::zero(); self.total + 1];
        obj[..self.total].clone_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            let scale = cost[b].clone();
            for j in 0..=self.total {
                let delta = &scale * &self.rows[i][j];
                obj[j] = obj[j].clone() - delta;
            }
        }
        obj
    }

    fn objective_value(&self, cost: &[Rat]) -> Rat {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| &cost[b] * &self.rows[i][self.total])
            .fold(Rat::zero(), |a, v| a + v)
    }

    /// One Bland pivot among columns `< col_limit`.
    fn pivot_step(&mut self, obj: &mut Vec<Rat>, col_limit: usize) -> Step {
        let entering = (0..col_limit).find(|&j| obj[j].is_positive());
        let Some(enter) = entering else {
            return Step::Done;
        };
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..self.rows.len() {
            let coeff = &self.rows[i][enter];
            if !coeff.is_positive() {
                continue;
            }
            let ratio = &self.rows[i][self.total] / coeff;
            match &leave {
                None => leave = Some((i, ratio)),
                Some((best_i, best)) => {
                    if ratio < *best
                        || (ratio == *best && self.basis[i] < self.basis[*best_i])
                    {
                        leave = Some((i, ratio));
                    }
                }
            }
        }
        let Some((leave_row, _)) = leave else {
            return Step::Unbounded;
        };
        self.pivot(leave_row, enter, obj);
        Step::Pivoted
    }

    fn pivot(&mut self, row: usize, col: usize, obj: &mut [Rat]) {
        let pivot = self.rows[row][col].clone();
        if !pivot.is_one() {
            for j in 0..=self.total {
                self.rows[row][j] = &self.rows[row][j] / &pivot;
            }
        }
        for i in 0..self.rows.len() {
            if i == row || self.rows[i][col].is_zero() {
                continue;
            }
            let factor = self.rows[i][col].clone();
            for j in 0..=self.total {
                let delta = &factor * &self.rows[row][j];
                self.rows[i][j] = self.rows[i][j].clone() - delta;
            }
        }
        if !obj[col].is_zero() {
            let factor = obj[col].clone();
            for j in 0..=self.total {
                let delta = &factor * &self.rows[row][j];
                obj[j] = obj[j].clone() - delta;
            }
        }
        self.basis[row] = col;
    }

    /// After a zero-value phase 1, pivot basic artificials out (or drop
    /// redundant rows) so phase 2 runs over structural columns only.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < self.structural {
                i += 1;
                continue;
            }
            let col = (0..self.structural).find(|&j| !self.rows[i][j].is_zero());
            match col {
                Some(j) => {
                    let mut dummy = vec![Rat::zero(); self.total + 1];
                    self.pivot(i, j, &mut dummy);
                    i += 1;
                }
                None => {
                    // Redundant constraint: the whole structural row is zero.
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }

    fn extract_solution(&self, lp: &LinearProgram) -> Vec<Rat> {
        let mut full = vec![Rat::zero(); self.var_cols];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.var_cols {
                full[b] = self.rows[i][self.total].clone();
            }
        }
        if self.split {
            (0..lp.num_vars)
                .map(|j| full[j].clone() - full[lp.num_vars + j].clone())
                .collect()
        } else {
            full
        }
    }

    /// Infeasibility multipliers for the original rows, recovered from the
    /// phase-1 reduced costs over artificial columns.
    fn extract_farkas(&self, obj: &[Rat], lp: &LinearProgram) -> Vec<Rat> {
        let m = lp.equalities.len() + lp.inequalities.len();
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            // reduced cost of artificial i is -1 + y_i
            let mut yi = obj[self.structural + i].clone() + Rat::one();
            if self.row_sign[i] {
                yi = -yi;
            }
            y.push(yi);
        }
        y
    }
}

enum Step {
    Done,
    Pivoted,
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn lp1() -> LinearProgram {
        // maximize x s.t. x <= 1 (i.e. -x >= -1), x >= 0
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![rat(1)];
        lp.ge(vec![rat(-1)], rat(-1));
        lp
    }

    #[test]
    fn maximizes_bounded_problem() {
        let res = solve(&lp1()).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.value.unwrap(), rat(1));
        assert_eq!(res.solution.unwrap(), vec![rat(1)]);
    }

    #[test]
    fn detects_infeasibility() {
        // x >= 1 and x <= 0
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![rat(1)];
        lp.ge(vec![rat(1)], rat(1));
        lp.ge(vec![rat(-1)], rat(0));
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Infeasible);
        assert!(res.farkas.is_some());
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![rat(1)];
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Unbounded);
    }

    #[test]
    fn feasible_point_on_simplex_is_vertex() {
        // x >= 0, sum x = 1 in dimension 3
        let mut lp = LinearProgram::new(3);
        lp.eq(vec![rat(1), rat(1), rat(1)], rat(1));
        let res = feasible_point(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        let x = res.solution.unwrap();
        assert_eq!(x.iter().fold(rat(0), |a, v| a + v), rat(1));
        assert_eq!(x.iter().filter(|v| !v.is_zero()).count(), 1);
    }

    #[test]
    fn empty_constraints_give_origin() {
        let lp = LinearProgram::new(1);
        let res = feasible_point(&lp).unwrap();
        assert_eq!(res.solution.unwrap(), vec![rat(0)]);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.eq(vec![rat(1), rat(1)], rat(1));
        lp.eq(vec![rat(1), rat(1)], rat(2));
        let res = feasible_point(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Infeasible);
    }

    #[test]
    fn free_variables_solve_exactly() {
        // maximize -x with x >= -3/2, x free
        let mut lp = LinearProgram::new(1);
        lp.nonneg = false;
        lp.objective = vec![rat(-1)];
        lp.ge(vec![rat(1)], crate::rational::ratio(-3, 2));
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.value.unwrap(), crate::rational::ratio(3, 2));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Highly degenerate: many redundant rows through the same vertex.
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![rat(1), rat(1), rat(1)];
        lp.eq(vec![rat(1), rat(1), rat(1)], rat(1));
        for _ in 0..4 {
            lp.ge(vec![rat(-1), rat(-1), rat(0)], rat(-1));
            lp.ge(vec![rat(0), rat(-1), rat(-1)], rat(-1));
        }
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.value.unwrap(), rat(1));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut lp = LinearProgram::new(2);
        lp.ge(vec![rat(1)], rat(0));
        assert!(matches!(solve(&lp), Err(LpError::Dimension { .. })));
    }

    #[test]
    fn dump_is_plain_text() {
        let text = dump(&lp1());
        assert!(text.contains("max  1"));
        assert!(text.contains(">= -1"));
    }
}
