//! Dense two-phase primal simplex for `maximize c'x  s.t.  Ax = b, x >= 0`.
//!
//! Bland's rule throughout, so every solve is deterministic in the input
//! ordering and terminates despite degeneracy. Redundant equality rows are
//! absorbed by phase-1 artificials: a basic artificial stuck at zero is either
//! pivoted out or its row dropped. Sized for the state-action polytopes in
//! this crate (at most a few thousand variables, a few hundred rows).

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    pub is_vertex: bool,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m x (ncols + 1), last column is the rhs
    cost: Vec<f64>,      // reduced-cost row, same width
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, pr: usize, pc: usize) {
        let piv = self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[pr].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pr {
                continue;
            }
            let factor = row[pc];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[pc] = 0.0;
            }
        }
        let factor = self.cost[pc];
        if factor != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland: entering = lowest eligible column, leaving = min ratio with ties
    /// broken by lowest basic-variable index. Returns false on unboundedness.
    fn run(&mut self, allowed_cols: usize) -> bool {
        loop {
            let entering = (0..allowed_cols).find(|&j| self.cost[j] > PIVOT_TOL);
            let Some(pc) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][pc];
                if a > PIVOT_TOL {
                    let ratio = self.rows[i][self.ncols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_TOL
                                || (ratio < br + PIVOT_TOL && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return false;
            };
            self.pivot(pr, pc);
        }
    }
}

/// Solve the LP to a basic feasible optimum.
pub fn solve_max(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.eq_matrix.len();
    debug_assert!(lp.eq_matrix.iter().all(|r| r.len() == n));
    debug_assert_eq!(lp.eq_rhs.len(), m);

    let ncols = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, row) in lp.eq_matrix.iter().enumerate() {
        let flip = lp.eq_rhs[i] < 0.0;
        let mut r = vec![0.0; ncols + 1];
        for (j, &a) in row.iter().enumerate() {
            r[j] = if flip { -a } else { a };
        }
        r[n + i] = 1.0;
        r[ncols] = lp.eq_rhs[i].abs();
        rows.push(r);
    }

    // Phase 1: maximize -sum(artificials); reduced costs start as column sums.
    let mut cost = vec![0.0; ncols + 1];
    for j in 0..n {
        cost[j] = rows.iter().map(|r| r[j]).sum();
    }
    cost[ncols] = rows.iter().map(|r| r[ncols]).sum();

    let mut tab = Tableau { rows, cost, basis: (n..ncols).collect(), ncols };
    if !tab.run(n) {
        // Phase-1 objective is bounded by construction.
        unreachable!("phase 1 cannot be unbounded");
    }
    if tab.cost[ncols].abs() > FEAS_TOL {
        return LpSolution {
            x: vec![0.0; n],
            objective_value: f64::NEG_INFINITY,
            status: LpStatus::Infeasible,
            is_vertex: false,
        };
    }

    // Drive leftover artificials out of the basis; an all-zero row (over the
    // structural columns) is a redundant constraint and is dropped.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                tab.pivot(i, j);
            } else {
                tab.rows.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }

    // Phase 2 with the true objective; artificial columns are retired.
    let mut cost = vec![0.0; ncols + 1];
    cost[..n].copy_from_slice(&lp.objective);
    for (i, &b) in tab.basis.iter().enumerate() {
        let cb = cost[b];
        if cb != 0.0 {
            let row = tab.rows[i].clone();
            for (v, r) in cost.iter_mut().zip(&row) {
                *v -= cb * r;
            }
        }
    }
    tab.cost = cost;
    if !tab.run(n) {
        return LpSolution {
            x: vec![0.0; n],
            objective_value: f64::INFINITY,
            status: LpStatus::Unbounded,
            is_vertex: false,
        };
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[i][tab.ncols];
        }
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    debug_assert!(primal_residual(lp, &x) <= FEAS_TOL);
    LpSolution { x, objective_value, status: LpStatus::Optimal, is_vertex: true }
}

pub fn primal_residual(lp: &LinearProgram, x: &[f64]) -> f64 {
    lp.eq_matrix
        .iter()
        .zip(&lp.eq_rhs)
        .map(|(row, &b)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
        .fold(0.0, f64::max)
}

/// Distinct vertices by pairwise L-infinity distance, first occurrence wins.
pub fn dedupe_vertices(solutions: &[LpSolution], tol: f64) -> Vec<LpSolution> {
    let mut kept: Vec<LpSolution> = Vec::new();
    for sol in solutions {
        let dup = kept.iter().any(|k| {
            k.x.len() == sol.x.len()
                && k.x.iter().zip(&sol.x).all(|(a, b)| (a - b).abs() <= tol)
        });
        if !dup {
            kept.push(sol.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::mdp;

    fn simple(objective: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> LinearProgram {
        LinearProgram { objective, eq_matrix: a, eq_rhs: b }
    }

    #[test]
    fn trivial_simplex_case() {
        let lp = simple(vec![1.0, 0.0], vec![vec![1.0, 1.0]], vec![1.0]);
        let sol = solve_max(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
        assert!(sol.is_vertex);
    }

    #[test]
    fn infeasible_and_unbounded_flagged() {
        let lp = simple(
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 2.0],
        );
        assert_eq!(solve_max(&lp).status, LpStatus::Infeasible);

        let lp = simple(vec![1.0, 0.0], vec![vec![0.0, 1.0]], vec![1.0]);
        assert_eq!(solve_max(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        let lp = simple(vec![0.0, 1.0], vec![vec![-1.0, -1.0]], vec![-1.0]);
        let sol = solve_max(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    fn polytope_lp(eps: f64, weights: [f64; 2], drop_redundant: bool) -> LinearProgram {
        let params = ChannelParams::symmetric(eps).unwrap();
        let poly = mdp::build_polytope(&params, 2).unwrap();
        let objective = poly.weighted_rate_objective(&weights);
        let mut eq_matrix = poly.rows.clone();
        let mut eq_rhs = poly.rhs.clone();
        if drop_redundant {
            eq_matrix.remove(poly.redundant_row);
            eq_rhs.remove(poly.redundant_row);
        }
        LinearProgram { objective, eq_matrix, eq_rhs }
    }

    #[test]
    fn polytope_lp_observation_value() {
        let sol = solve_max(&polytope_lp(0.25, [0.5, 0.5], false));
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 0.3125).abs() < 1e-10);
        assert!(primal_residual(&polytope_lp(0.25, [0.5, 0.5], false), &sol.x) <= FEAS_TOL);
    }

    #[test]
    fn redundant_row_does_not_change_optimum() {
        let with = solve_max(&polytope_lp(0.25, [0.3, 0.7], false));
        let without = solve_max(&polytope_lp(0.25, [0.3, 0.7], true));
        assert!((with.objective_value - without.objective_value).abs() < 1e-10);
    }

    #[test]
    fn vertex_support_bounded_by_row_count() {
        let lp = polytope_lp(0.4, [0.8, 0.2], false);
        let sol = solve_max(&lp);
        let positives = sol.x.iter().filter(|&&v| v > PIVOT_TOL).count();
        assert!(positives <= lp.eq_matrix.len());
    }

    #[test]
    fn weak_duality_against_feasible_point() {
        // Uniform mixture over both always-stay corners is feasible.
        let params = ChannelParams::symmetric(0.25).unwrap();
        let poly = mdp::build_polytope(&params, 2).unwrap();
        let weights = [0.6, 0.4];
        let lp = polytope_lp(0.25, weights, false);
        let opt = solve_max(&lp);

        for m0 in [1usize, 2] {
            let table = mdp::DeterministicPolicyTable {
                n: 2,
                action: vec![mdp::ActionId::to(m0); 8],
            };
            let pi = crate::oracle::stationary_distribution_cesaro(
                &table.transition_matrix(&params),
                0,
            );
            let mut x = vec![0.0; 16];
            for (si, w) in pi.iter().enumerate() {
                x[mdp::var_index(si, m0, 2)] = *w;
            }
            let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            assert!(value <= opt.objective_value + 1e-9);
        }
        let r = poly.rates_unchecked(&opt.x);
        assert!(r.iter().all(|&v| (0.0..=0.51).contains(&v)));
    }

    #[test]
    fn objective_invariant_under_permutation_and_scaling() {
        let base = polytope_lp(0.3, [0.45, 0.55], false);
        let reference = solve_max(&base).objective_value;

        let mut rows_rev = base.clone();
        rows_rev.eq_matrix.reverse();
        rows_rev.eq_rhs.reverse();
        assert!((solve_max(&rows_rev).objective_value - reference).abs() < 1e-10);

        // rotate variables by 3
        let n = base.num_vars();
        let perm: Vec<usize> = (0..n).map(|j| (j + 3) % n).collect();
        let mut permuted = base.clone();
        for (j, &pj) in perm.iter().enumerate() {
            permuted.objective[pj] = base.objective[j];
            for (ri, row) in base.eq_matrix.iter().enumerate() {
                permuted.eq_matrix[ri][pj] = row[j];
            }
        }
        assert!((solve_max(&permuted).objective_value - reference).abs() < 1e-10);

        let mut scaled = base.clone();
        for c in scaled.objective.iter_mut() {
            *c *= 3.7;
        }
        assert!((solve_max(&scaled).objective_value - 3.7 * reference).abs() < 1e-10);
    }

    #[test]
    fn dedupe_keeps_first_occurrence() {
        let mk = |x: Vec<f64>| LpSolution {
            x,
            objective_value: 0.0,
            status: LpStatus::Optimal,
            is_vertex: true,
        };
        let sols = vec![
            mk(vec![1.0, 0.0]),
            mk(vec![1.0 + 5e-11, 0.0]),
            mk(vec![0.0, 1.0]),
        ];
        let distinct = dedupe_vertices(&sols, 1e-10);
        assert_eq!(distinct.len(), 2);
        assert_eq!(distinct[0].x, vec![1.0, 0.0]);
        assert!(dedupe_vertices(&[], 1e-10).is_empty());
    }
}
