//! Dense two-phase simplex for the small LPs arising in the S-Lemma layer
//! (support feasibility probes, epigraph duals). Bland's rule throughout, so
//! no cycling; problem sizes here are tens of variables.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Number of decision variables, all constrained x ≥ 0.
    pub n: usize,
    /// Coefficients of the objective to maximize.
    pub objective: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, Rel, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

struct Tableau {
    m: usize,
    cols: usize, // total columns excluding RHS
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        for j in 0..self.cols {
            self.a[row][j] /= piv;
        }
        self.rhs[row] /= piv;
        for i in 0..self.m {
            if i != row {
                let f = self.a[i][col];
                if f != 0.0 {
                    for j in 0..self.cols {
                        self.a[i][j] -= f * self.a[row][j];
                    }
                    self.rhs[i] -= f * self.rhs[row];
                }
            }
        }
        self.basis[row] = col;
    }

    /// Bland: entering = lowest-index column with positive reduced profit;
    /// leaving = min ratio, ties broken by lowest basis index.
    fn simplex_max(&mut self, cost: &mut Vec<f64>, allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            // reduced costs: cost already kept reduced w.r.t. basis by pivoting below
            let mut enter = None;
            for j in 0..self.cols {
                if allowed(j) && cost[j] > PIVOT_TOL && !self.basis.contains(&j) {
                    enter = Some(j);
                    break;
                }
            }
            let Some(col) = enter else { return true };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..self.m {
                if self.a[i][col] > PIVOT_TOL {
                    let ratio = self.rhs[i] / self.a[i][col];
                    if ratio < best - PIVOT_TOL
                        || ((ratio - best).abs() <= PIVOT_TOL
                            && leave.map_or(true, |l| self.basis[i] < self.basis[l]))
                    {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(row) = leave else { return false }; // unbounded
            self.pivot(row, col);
            let f = cost[col];
            for j in 0..self.cols {
                cost[j] -= f * self.a[row][j];
            }
        }
    }
}

pub fn solve(problem: &LpProblem) -> LpOutcome {
    let n = problem.n;
    let m = problem.constraints.len();
    assert_eq!(problem.objective.len(), n, "objective length mismatch");

    // Normalize to b >= 0 and count auxiliary columns.
    let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::with_capacity(m);
    for (coeffs, rel, b) in &problem.constraints {
        assert_eq!(coeffs.len(), n, "constraint length mismatch");
        if *b < 0.0 {
            let flipped = match rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
            rows.push((coeffs.iter().map(|c| -c).collect(), flipped, -b));
        } else {
            rows.push((coeffs.clone(), *rel, *b));
        }
    }
    let n_slack = rows.iter().filter(|(_, r, _)| *r != Rel::Eq).count();
    let n_art = rows.iter().filter(|(_, r, _)| *r != Rel::Le).count();
    let cols = n + n_slack + n_art;

    let mut a = vec![vec![0.0; cols]; m];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let art_start = n + n_slack;
    for (i, (coeffs, rel, b)) in rows.iter().enumerate() {
        a[i][..n].copy_from_slice(coeffs);
        rhs[i] = *b;
        match rel {
            Rel::Le => {
                a[i][slack_at] = 1.0;
                basis[i] = slack_at;
                slack_at += 1;
            }
            Rel::Ge => {
                a[i][slack_at] = -1.0;
                slack_at += 1;
                a[i][art_at] = 1.0;
                basis[i] = art_at;
                art_at += 1;
            }
            Rel::Eq => {
                a[i][art_at] = 1.0;
                basis[i] = art_at;
                art_at += 1;
            }
        }
    }
    let mut t = Tableau { m, cols, a, rhs, basis };

    // Phase 1: maximize -(sum of artificials).
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for j in art_start..cols {
            cost[j] = -1.0;
        }
        // reduce cost over the initial artificial basis
        for i in 0..m {
            if t.basis[i] >= art_start {
                for j in 0..cols {
                    cost[j] += t.a[i][j];
                }
            }
        }
        // phase-1 objective value tracked through the reduced costs: recompute at end
        t.simplex_max(&mut cost, &|_| true);
        let infeas: f64 = (0..m)
            .filter(|&i| t.basis[i] >= art_start)
            .map(|i| t.rhs[i].max(0.0))
            .sum();
        if infeas > FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        // Drive any residual basic artificials out on a nonzero pivot.
        for i in 0..m {
            if t.basis[i] >= art_start {
                if let Some(col) = (0..art_start).find(|&j| t.a[i][j].abs() > PIVOT_TOL) {
                    t.pivot(i, col);
                }
                // else: redundant row, harmless with rhs ~ 0
            }
        }
    }

    // Phase 2 on the original objective, artificials barred.
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&problem.objective);
    for i in 0..t.m {
        let b = t.basis[i];
        let f = cost[b];
        if f != 0.0 {
            for j in 0..t.cols {
                cost[j] -= f * t.a[i][j];
            }
        }
    }
    if !t.simplex_max(&mut cost, &|j| j < art_start) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for i in 0..t.m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs[i];
        }
    }
    let value = x.iter().zip(&problem.objective).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, value }
}

/// Convenience: minimize instead of maximize.
pub fn solve_min(problem: &LpProblem) -> LpOutcome {
    let negated = LpProblem {
        n: problem.n,
        objective: problem.objective.iter().map(|c| -c).collect(),
        constraints: problem.constraints.clone(),
    };
    match solve(&negated) {
        LpOutcome::Optimal { x, value } => LpOutcome::Optimal { x, value: -value },
        other => other,
    }
}
