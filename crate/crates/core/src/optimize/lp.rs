//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems here have a handful of variables, so a full tableau is fine.

/// `maximize c'x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-11;

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost' x` over the current basis; `allowed` masks columns.
    /// Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        let rhs = self.cols;
        for _ in 0..10_000 {
            // Reduced costs: c_j - c_B' B^-1 a_j.
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    rc -= cost[b] * self.t[i][j];
                }
                if rc < -PIVOT_EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, c);
        }
        true
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram { objective, eq: Vec::new(), le: Vec::new() }
    }

    pub fn solve(&self) -> LpSolution {
        let n = self.objective.len();
        let n_le = self.le.len();
        let m = self.eq.len() + n_le;
        let cols = n + n_le + m;
        let rhs = cols;
        let mut t = vec![vec![0.0; cols + 1]; m];
        let mut scale = 1.0f64;
        for (i, (a, b)) in self.eq.iter().chain(&self.le).enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i][j] = sign * a[j];
            }
            if i >= self.eq.len() {
                t[i][n + i - self.eq.len()] = sign;
            }
            t[i][n + n_le + i] = 1.0;
            t[i][rhs] = sign * b;
            scale = scale.max(b.abs());
        }
        let mut tab = Tableau { t, basis: (0..m).map(|i| n + n_le + i).collect(), cols };

        // Phase 1: minimize the sum of artificials.
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(n + n_le) {
            *c = 1.0;
        }
        let all = vec![true; cols];
        tab.optimize(&cost1, &all);
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= n + n_le)
            .map(|(i, _)| tab.t[i][rhs])
            .sum();
        if infeas > 1e-9 * scale {
            return LpSolution::Infeasible;
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n + n_le {
                let col = (0..n + n_le).find(|&j| tab.t[r][j].abs() > 1e-9);
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        // Phase 2.
        let mut cost2 = vec![0.0; cols];
        for j in 0..n {
            cost2[j] = -self.objective[j];
        }
        let mut allowed = vec![true; cols];
        for a in allowed.iter_mut().skip(n + n_le) {
            *a = false;
        }
        if !tab.optimize(&cost2, &allowed) {
            return LpSolution::Unbounded;
        }
        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.t[i][rhs].max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpSolution::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![3.0, 5.0]);
        lp.le.push((vec![1.0, 0.0], 4.0));
        lp.le.push((vec![0.0, 2.0], 12.0));
        lp.le.push((vec![3.0, 2.0], 18.0));
        match lp.solve() {
            LpSolution::Optimal { x, value } => {
                assert!((value - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.eq.push((vec![1.0], 2.0));
        lp.le.push((vec![1.0], 1.0));
        assert_eq!(lp.solve(), LpSolution::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.le.push((vec![0.0, 1.0], 1.0));
        assert_eq!(lp.solve(), LpSolution::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // x + y = 1 twice, -x <= -0.25  ->  max y = 0.75
        let mut lp = LinearProgram::new(vec![0.0, 1.0]);
        lp.eq.push((vec![1.0, 1.0], 1.0));
        lp.eq.push((vec![2.0, 2.0], 2.0));
        lp.le.push((vec![-1.0, 0.0], -0.25));
        match lp.solve() {
            LpSolution::Optimal { value, .. } => assert!((value - 0.75).abs() < 1e-12),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale); Bland's rule must terminate.
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.le.push((vec![0.25, -60.0, -0.04, 9.0], 0.0));
        lp.le.push((vec![0.5, -90.0, -0.02, 3.0], 0.0));
        lp.le.push((vec![0.0, 0.0, 1.0, 0.0], 1.0));
        match lp.solve() {
            LpSolution::Optimal { value, .. } => assert!((value - 0.05).abs() < 1e-9),
            s => panic!("{s:?}"),
        }
    }
}
