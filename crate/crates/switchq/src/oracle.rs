//! Brute-force verification layer: enumerate stationary-deterministic
//! policies for small N, compute exact stationary rates by linear algebra,
//! build the two-queue rate hull, and run the weighted departure-rate ratio
//! (Psi) analysis of the one- and k-lookahead myopic policies.

use crate::channel::ChannelParams;
use crate::mdp::{self, ActionId, DeterministicPolicyTable};
use crate::policies::{self, CornerPattern, PolicyError};
use crate::region::convex_hull_2d;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exact chain analysis supported for N <= {max}, got {got}")]
    TooManyQueues { max: usize, got: usize },
    #[error("occupation-measure iteration did not converge within {0} sweeps")]
    NonConvergence(usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mdp(#[from] mdp::MdpError),
}

/// Chain sizes beyond 24 states are out of enumeration scope.
pub const MAX_ORACLE_QUEUES: usize = 3;

const MAX_SWEEPS: usize = 1_000_000;
const CESARO_TOL: f64 = 1e-13;

/// Number of stationary-deterministic policies, N^(N 2^N).
pub fn num_policies(n: usize) -> u64 {
    (n as u64).pow(mdp::num_states(n) as u32)
}

/// Decode a policy index into one action per state (base-N digits in
/// canonical state order).
pub fn policy_table_from_index(index: u64, n: usize) -> DeterministicPolicyTable {
    let ns = mdp::num_states(n);
    let mut action = Vec::with_capacity(ns);
    let mut rem = index;
    for _ in 0..ns {
        action.push(ActionId::to((rem % n as u64) as usize + 1));
        rem /= n as u64;
    }
    DeterministicPolicyTable { n, action }
}

/// Cesaro-limit occupation measure from an initial distribution, via power
/// iteration on the lazy kernel (P + I)/2. The lazy chain is aperiodic and
/// shares both the invariant measures and the absorption probabilities of P,
/// so its limit equals the Cesaro limit of P.
pub fn cesaro_occupation(p: &[Vec<f64>], init: &[f64]) -> Result<Vec<f64>, OracleError> {
    let ns = p.len();
    let mut v = init.to_vec();
    let mut next = vec![0.0; ns];
    for _ in 0..MAX_SWEEPS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (j, &pij) in p[i].iter().enumerate() {
                    next[j] += vi * pij;
                }
            }
        }
        let mut delta: f64 = 0.0;
        for j in 0..ns {
            let w = 0.5 * (v[j] + next[j]);
            delta = delta.max((w - v[j]).abs());
            v[j] = w;
        }
        if delta < CESARO_TOL {
            return Ok(v);
        }
    }
    Err(OracleError::NonConvergence(MAX_SWEEPS))
}

/// Point-mass convenience wrapper around [`cesaro_occupation`].
pub fn stationary_distribution_cesaro(p: &[Vec<f64>], start: usize) -> Vec<f64> {
    let mut init = vec![0.0; p.len()];
    init[start] = 1.0;
    cesaro_occupation(p, &init).expect("tiny chains converge")
}

/// Unique stationary distribution of a unichain transition matrix by direct
/// Gaussian elimination on pi P = pi, sum pi = 1. `None` when the system is
/// singular (multiple recurrent classes).
pub fn stationary_distribution_linsolve(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    let ns = p.len();
    let mut a = vec![vec![0.0; ns + 1]; ns];
    for j in 0..ns {
        for i in 0..ns {
            a[j][i] = p[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[ns - 1] = vec![1.0; ns + 1]; // replace one dependent row with normalization
    a[ns - 1][ns] = 1.0;

    for col in 0..ns {
        let pivot = (col..ns)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        let base = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != col && row[col] != 0.0 {
                let f = row[col];
                for (v, b) in row.iter_mut().zip(&base) {
                    *v -= f * b;
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..ns).map(|i| a[i][ns].max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let resid: f64 = (0..ns)
        .map(|j| {
            ((0..ns).map(|i| pi[i] * p[i][j]).sum::<f64>() - pi[j]).abs()
        })
        .fold(0.0, f64::max);
    (resid < 1e-9).then_some(pi)
}

/// Initial distribution used by the rate oracle: server at `m0`, channels at
/// steady state.
pub fn initial_distribution(params: &ChannelParams, n: usize, m0: usize) -> Vec<f64> {
    let states = mdp::enumerate_states(n).expect("guarded n");
    let pi1 = params.steady_state_on();
    states
        .iter()
        .map(|s| {
            if s.m != m0 {
                return 0.0;
            }
            s.c.iter().map(|&c| if c == 1 { pi1 } else { 1.0 - pi1 }).product()
        })
        .collect()
}

/// Exact per-queue rates of a stationary-deterministic policy from the
/// Cesaro occupation measure started at server position `m0`.
pub fn stationary_rates_from(
    params: &ChannelParams,
    table: &DeterministicPolicyTable,
    m0: usize,
) -> Result<Vec<f64>, OracleError> {
    let n = table.n;
    if n > MAX_ORACLE_QUEUES {
        return Err(OracleError::TooManyQueues { max: MAX_ORACLE_QUEUES, got: n });
    }
    let occ = cesaro_occupation(&table.transition_matrix(params), &initial_distribution(params, n, m0))?;
    let states = mdp::enumerate_states(n)?;
    let mut rates = vec![0.0; n];
    for (si, s) in states.iter().enumerate() {
        for i in 1..=n {
            rates[i - 1] += occ[si] * mdp::reward(s, table.action[si], i);
        }
    }
    Ok(rates)
}

/// Rates from the canonical start m(0) = 1.
pub fn stationary_rates(
    params: &ChannelParams,
    table: &DeterministicPolicyTable,
) -> Result<Vec<f64>, OracleError> {
    stationary_rates_from(params, table, 1)
}

/// Rates of all 256 two-queue stationary-deterministic policies (evaluated
/// from every server start, which resolves the multichain all-stay family),
/// reduced to the convex-hull corner set with origin closure. Sorted by r1.
pub fn enumerate_hull(params: &ChannelParams) -> Result<Vec<[f64; 2]>, OracleError> {
    let mut points: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for index in 0..num_policies(2) {
        let table = policy_table_from_index(index, 2);
        for m0 in 1..=2 {
            let r = stationary_rates_from(params, &table, m0)?;
            points.push([r[0], r[1]]);
        }
    }
    let mut hull = convex_hull_2d(&points, 1e-9);
    hull.sort_by(|a, b| {
        a[0].partial_cmp(&b[0]).expect("finite").then(a[1].partial_cmp(&b[1]).expect("finite"))
    });
    Ok(hull)
}

/// All 512 evaluated rate points (every policy from every start); test fodder
/// for hull-containment checks.
pub fn enumerate_rate_points(params: &ChannelParams) -> Result<Vec<[f64; 2]>, OracleError> {
    let mut points = Vec::with_capacity(512);
    for index in 0..num_policies(2) {
        let table = policy_table_from_index(index, 2);
        for m0 in 1..=2 {
            let r = stationary_rates_from(params, &table, m0)?;
            points.push([r[0], r[1]]);
        }
    }
    Ok(points)
}

/// Epsilon sub-case of the discrepancy analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PsiCase {
    BelowEpsilonT,
    BetweenTAndC,
    AboveEpsilonC,
}

pub fn psi_case(eps: f64) -> PsiCase {
    if eps < policies::epsilon_t() {
        PsiCase::BelowEpsilonT
    } else if eps < policies::epsilon_c() {
        PsiCase::BetweenTAndC
    } else {
        PsiCase::AboveEpsilonC
    }
}

/// Minimum of Psi over one discrepant region, with the witness point.
#[derive(Debug, Clone)]
pub struct PsiRegionMin {
    pub case: PsiCase,
    pub olm: CornerPattern,
    pub fbdc: CornerPattern,
    pub min_psi: f64,
    pub witness_eps: f64,
    pub witness_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct PsiReport {
    pub k: u32,
    pub global_min: f64,
    pub witness_eps: f64,
    pub witness_ratio: f64,
    pub regions: Vec<PsiRegionMin>,
}

/// Weighted departure-rate ratio of the k-lookahead myopic policy against
/// the FBDC corner choice, minimized over every discrepant queue-ratio
/// interval for each epsilon in the grid. Corner rates are the closed forms;
/// ratios are sampled log-spaced plus both interval endpoints (the ratio of
/// two linear functions is monotone between breakpoints, so endpoints carry
/// the minimum).
pub fn psi_scan(
    k: u32,
    eps_grid: &[f64],
    ratio_samples: usize,
) -> Result<PsiReport, OracleError> {
    let mut regions: HashMap<(PsiCase, CornerPattern, CornerPattern), PsiRegionMin> =
        HashMap::new();
    let mut global: Option<(f64, f64, f64)> = None;

    for &eps in eps_grid {
        let params = ChannelParams::symmetric(eps).expect("grid eps in (0, 0.5]");
        let case = psi_case(eps);
        let fbdc = policies::fbdc_thresholds(&params);
        let olm_bp = policies::olm_pattern_breakpoints(&params, k)?;

        let mut cuts: Vec<f64> = fbdc.thresholds[1..].to_vec();
        cuts.extend(olm_bp.iter().skip(1).map(|&(lo, _)| lo));
        cuts.retain(|c| c.is_finite());
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut lower = 0.0f64;
        for &cut in cuts.iter().chain(std::iter::once(&f64::INFINITY)) {
            let hi = cut;
            let mid = if hi.is_finite() { 0.5 * (lower + hi) } else { lower * 2.0 + 1.0 };
            let olm_pattern = olm_bp
                .iter()
                .rev()
                .find(|&&(lo, _)| mid >= lo)
                .map(|&(_, p)| p)
                .expect("breakpoints start at 0");
            let fbdc_pattern = fbdc.lookup(mid).pattern(&params);
            if olm_pattern != fbdc_pattern {
                let r_hat = olm_pattern.rate(&params);
                let r_star = fbdc_pattern.rate(&params);
                let psi = |ratio: f64| {
                    (r_hat[0] + ratio * r_hat[1]) / (r_star[0] + ratio * r_star[1])
                };
                let hi_s = if hi.is_finite() { hi - 1e-9 } else { lower.max(1.0) * 1e6 };
                let lo_s = (lower + 1e-9).min(hi_s);
                let mut best = (psi(lo_s), lo_s);
                let upd = |best: &mut (f64, f64), v: f64, r: f64| {
                    if v < best.0 {
                        *best = (v, r);
                    }
                };
                upd(&mut best, psi(hi_s), hi_s);
                for i in 1..ratio_samples {
                    let r = lo_s * (hi_s / lo_s).powf(i as f64 / ratio_samples as f64);
                    upd(&mut best, psi(r), r);
                }
                let (min_psi, witness_ratio) = best;
                regions
                    .entry((case, olm_pattern, fbdc_pattern))
                    .and_modify(|e| {
                        if min_psi < e.min_psi {
                            e.min_psi = min_psi;
                            e.witness_eps = eps;
                            e.witness_ratio = witness_ratio;
                        }
                    })
                    .or_insert(PsiRegionMin {
                        case,
                        olm: olm_pattern,
                        fbdc: fbdc_pattern,
                        min_psi,
                        witness_eps: eps,
                        witness_ratio,
                    });
                if global.map_or(true, |(g, _, _)| min_psi < g) {
                    global = Some((min_psi, eps, witness_ratio));
                }
            }
            lower = hi;
        }
    }

    let (global_min, witness_eps, witness_ratio) = global.unwrap_or((1.0, 0.0, 1.0));
    let mut regions: Vec<PsiRegionMin> = regions.into_values().collect();
    regions.sort_by(|a, b| {
        (a.case, a.olm as usize, a.fbdc as usize)
            .cmp(&(b.case, b.olm as usize, b.fbdc as usize))
    });
    Ok(PsiReport { k, global_min, witness_eps, witness_ratio, regions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(eps: f64) -> ChannelParams {
        ChannelParams::symmetric(eps).unwrap()
    }

    #[test]
    fn all_stay_and_corner_rate_examples() {
        let p = sym(0.25);
        let all_stay = DeterministicPolicyTable::all_stay(2);
        let r = stationary_rates(&p, &all_stay).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-10 && r[1].abs() < 1e-12);

        let q = sym(0.4);
        let b0 = CornerPattern::P0.policy();
        let r = stationary_rates(&q, &b0).unwrap();
        assert!(r[0].abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_linear_solve() {
        let params = ChannelParams::new(0.3, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 20 {
            let index = rng.gen_range(0..num_policies(2));
            let table = policy_table_from_index(index, 2);
            let p = table.transition_matrix(&params);
            let Some(pi) = stationary_distribution_linsolve(&p) else {
                continue; // multichain (all-stay family)
            };
            let occ = stationary_distribution_cesaro(&p, 0);
            // unichain: occupation from any start equals the stationary law
            for (a, b) in occ.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-9);
            }
            checked += 1;
        }
    }

    #[test]
    fn pattern_rates_agree_with_chain_oracle() {
        for params in [sym(0.25), sym(0.4), ChannelParams::new(0.2, 0.1).unwrap()] {
            for pattern in CornerPattern::ALL {
                let closed = pattern.rate(&params);
                let start = match pattern {
                    CornerPattern::P0 => 2,
                    _ => 1,
                };
                let chain = stationary_rates_from(&params, &pattern.policy(), start).unwrap();
                assert!(
                    (closed[0] - chain[0]).abs() < 1e-9 && (closed[1] - chain[1]).abs() < 1e-9,
                    "{pattern:?} {closed:?} vs {chain:?}"
                );
            }
        }
    }

    #[test]
    fn hull_matches_closed_form_at_quarter() {
        let params = sym(0.25);
        let hull = enumerate_hull(&params).unwrap();
        let closed = crate::region::closed_form_two_queue(&params);
        assert_eq!(hull.len(), closed.corners.len());
        for (h, c) in hull.iter().zip(&closed.corners) {
            assert!((h[0] - c[0]).abs() < 1e-9 && (h[1] - c[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn memoryless_hull_is_the_triangle() {
        let hull = enumerate_hull(&sym(0.5)).unwrap();
        assert_eq!(hull.len(), 3);
        assert!((hull[0][0]).abs() < 1e-12 && (hull[0][1]).abs() < 1e-12);
        assert!((hull[1][1] - 0.5).abs() < 1e-9);
        assert!((hull[2][0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hull_contains_all_policy_points_and_mixtures() {
        let params = sym(0.3);
        let points = enumerate_rate_points(&params).unwrap();
        // ccw polygon edges give the containment test
        let ccw = convex_hull_2d(
            &points.iter().copied().chain([[0.0, 0.0]]).collect::<Vec<_>>(),
            1e-9,
        );
        let slack_ccw = |p: [f64; 2]| {
            (0..ccw.len()).all(|i| {
                let a = ccw[i];
                let b = ccw[(i + 1) % ccw.len()];
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-9
            })
        };
        for p in &points {
            assert!(slack_ccw(*p), "point {p:?} escapes hull");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = points[rng.gen_range(0..points.len())];
            let b = points[rng.gen_range(0..points.len())];
            let w: f64 = rng.gen();
            let mix = [w * a[0] + (1.0 - w) * b[0], w * a[1] + (1.0 - w) * b[1]];
            assert!(slack_ccw(mix));
        }
    }

    #[test]
    fn lp_optimum_equals_enumeration_maximum() {
        for params in [sym(0.25), sym(0.4)] {
            let poly = mdp::build_polytope(&params, 2).unwrap();
            let points = enumerate_rate_points(&params).unwrap();
            for alpha in [[1.0, 0.0], [0.7, 0.3], [0.5, 0.5], [0.2, 0.8]] {
                let lp = crate::lp::LinearProgram {
                    objective: poly.weighted_rate_objective(&alpha),
                    eq_matrix: poly.rows.clone(),
                    eq_rhs: poly.rhs.clone(),
                };
                let opt = crate::lp::solve_max(&lp).objective_value;
                let best = points
                    .iter()
                    .map(|p| alpha[0] * p[0] + alpha[1] * p[1])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((opt - best).abs() < 1e-9, "alpha={alpha:?} opt={opt} best={best}");
            }
        }
    }

    #[test]
    fn psi_examples() {
        // discrepant region (olm b1, fbdc b0) at eps = 0.20: min is 1 - eps^2/2
        let report = psi_scan(1, &[0.20], 2000).unwrap();
        let region = report
            .regions
            .iter()
            .find(|r| r.olm == CornerPattern::P1 && r.fbdc == CornerPattern::P0)
            .expect("region present below epsilon_t");
        assert!((region.min_psi - 0.98).abs() < 1e-6, "got {}", region.min_psi);

        let report = psi_scan(1, &[0.40], 2000).unwrap();
        assert!(report.global_min >= 0.914);

        let grid: Vec<f64> = (1..=49).map(|i| i as f64 / 100.0).collect();
        let report = psi_scan(1, &grid, 400).unwrap();
        assert!(report.global_min >= 0.90, "global={}", report.global_min);
    }

    #[test]
    fn psi_min_stable_under_sample_refinement() {
        let grid = [0.15, 0.27, 0.35];
        let coarse = psi_scan(1, &grid, 1000).unwrap();
        let fine = psi_scan(1, &grid, 2000).unwrap();
        assert!((coarse.global_min - fine.global_min).abs() < 1e-6);
    }
}
