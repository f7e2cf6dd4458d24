//! Rate/stability region computation: LP-sweep corner enumeration, closed-form
//! two-queue regions, i.i.d. regions, the sum-rate upper bound and the outer
//! bound, membership and delta-stripping queries, and the frame-length delay
//! bound calculator.

use crate::channel::ChannelParams;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::mdp::{self, Polytope};
use crate::policies;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("operation requires a two-queue system, got N={0}")]
    NotTwoQueue(usize),
    #[error("per-queue ON probability {0} outside (0, 1]")]
    BadOnProbability(f64),
    #[error("weight grid too coarse: need at least {need}, got {got}")]
    GridTooCoarse { need: usize, got: usize },
    #[error("boundary distance must be positive, got xi={0}")]
    BadBoundaryDistance(f64),
    #[error("frame length must be >= 1, got {0}")]
    BadFrameLength(f64),
    #[error("internal LP failed: {0:?}")]
    LpFailure(LpStatus),
    #[error(transparent)]
    Mdp(#[from] mdp::MdpError),
}

/// Half-space `normal . r <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Facet {
    pub fn slack(&self, r: &[f64]) -> f64 {
        self.offset - self.normal.iter().zip(r).map(|(a, v)| a * v).sum::<f64>()
    }
}

/// Corner points plus facet inequalities of a rate region. Sweep-built regions
/// for N >= 3 carry corners only; exact membership then goes through
/// [`member_saturated`].
#[derive(Debug, Clone)]
pub struct RateRegion {
    pub n: usize,
    /// Extreme points including axis corners and the origin, sorted
    /// lexicographically.
    pub corners: Vec<Vec<f64>>,
    pub facets: Vec<Facet>,
}

const CONTAIN_TOL: f64 = 1e-12;

impl RateRegion {
    /// True iff `lam + delta*1` satisfies every facet and nonnegativity.
    pub fn contains(&self, lam: &[f64], delta: f64) -> bool {
        assert!(!self.facets.is_empty(), "facet-free region: use member_saturated");
        assert_eq!(lam.len(), self.n);
        let shifted: Vec<f64> = lam.iter().map(|&v| v + delta).collect();
        shifted.iter().all(|&v| v >= -CONTAIN_TOL)
            && self.facets.iter().all(|f| f.slack(&shifted) >= -CONTAIN_TOL)
    }

    /// Largest xi with `lam + xi*1` still inside, by facet arithmetic.
    /// Negative when `lam` is already outside.
    pub fn distance_to_boundary(&self, lam: &[f64]) -> f64 {
        assert!(!self.facets.is_empty(), "facet-free region: use member_saturated");
        let mut xi = f64::INFINITY;
        for f in &self.facets {
            let along: f64 = f.normal.iter().sum();
            if along > 1e-12 {
                xi = xi.min(f.slack(lam) / along);
            }
        }
        let floor = lam.iter().copied().fold(f64::INFINITY, f64::min);
        if floor < 0.0 {
            xi = xi.min(floor);
        }
        xi
    }

    fn sorted(mut corners: Vec<Vec<f64>>, n: usize, facets: Vec<Facet>) -> Self {
        corners.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        RateRegion { n, corners, facets }
    }
}

/// Counterclockwise convex hull, collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]], tol: f64) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0]).expect("finite").then(a[1].partial_cmp(&b[1]).expect("finite"))
    });
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let chain = |iter: &mut dyn Iterator<Item = [f64; 2]>| {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= tol {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut lower = chain(&mut pts.iter().copied());
    let upper = chain(&mut pts.iter().rev().copied());
    lower.extend(upper);
    lower
}

fn intersect_lines(f1: &Facet, f2: &Facet) -> Option<[f64; 2]> {
    let (a1, b1, c1) = (f1.normal[0], f1.normal[1], f1.offset);
    let (a2, b2, c2) = (f2.normal[0], f2.normal[1], f2.offset);
    let det = a1 * b2 - a2 * b1;
    if det.abs() <= 1e-12 {
        return None; // coincident facets (memoryless degenerate case)
    }
    Some([(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det])
}

/// Maximum achievable sum-rate in the saturated system:
/// `1 - C0 - (p10 (1 - C0) - p01 C0)` with `C0 = (p10/(p10+p01))^N`.
pub fn sum_rate_upper_bound(params: &ChannelParams, n: usize) -> f64 {
    let c0 = (params.p10() / (params.p10() + params.p01())).powi(n as i32);
    1.0 - c0 - (params.p10() * (1.0 - c0) - params.p01() * c0)
}

/// Closed-form two-queue region: the symmetric facet system branching at
/// epsilon_c, or its non-symmetric generalization branching at
/// p01 vs (1-p10)^2/(2-p10). Corners are facet intersections.
pub fn closed_form_two_queue(params: &ChannelParams) -> RateRegion {
    let facets = if params.is_symmetric() {
        symmetric_facets(params.p01())
    } else {
        nonsymmetric_facets(params)
    };
    let pi1 = params.steady_state_on();
    let mut corners: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.0, pi1], vec![pi1, 0.0]];
    for pair in facets.windows(2) {
        if let Some(p) = intersect_lines(&pair[0], &pair[1]) {
            corners.push(vec![p[0], p[1]]);
        }
    }
    RateRegion::sorted(corners, 2, facets)
}

fn symmetric_facets(eps: f64) -> Vec<Facet> {
    let s = 0.75 - eps / 2.0;
    if policies::six_corner_branch(&ChannelParams::symmetric(eps).expect("valid eps")) {
        let sq = (1.0 - eps) * (1.0 - eps);
        let h2 = 1.0 + eps - eps * eps;
        vec![
            Facet { normal: vec![eps, sq], offset: sq / 2.0 },
            Facet { normal: vec![1.0 - eps, h2], offset: s },
            Facet { normal: vec![1.0, 1.0], offset: s },
            Facet { normal: vec![h2, 1.0 - eps], offset: s },
            Facet { normal: vec![sq, eps], offset: sq / 2.0 },
        ]
    } else {
        let g = (1.0 - eps) * (3.0 - 2.0 * eps);
        vec![
            Facet { normal: vec![1.0, g], offset: g / 2.0 },
            Facet { normal: vec![1.0, 1.0], offset: s },
            Facet { normal: vec![g, 1.0], offset: g / 2.0 },
        ]
    }
}

fn nonsymmetric_facets(params: &ChannelParams) -> Vec<Facet> {
    let (p01, p10) = (params.p01(), params.p10());
    let pi1 = params.steady_state_on();
    let s = 1.0 - (p10 / (p10 + p01)).powi(2) - p10 * p01 / (p01 + p10);
    if policies::six_corner_branch(params) {
        let h1 = (1.0 - p01) * (1.0 - p10);
        let h2 = 1.0 + p10 - p10 * p10;
        vec![
            Facet { normal: vec![p01, h1], offset: h1 * pi1 },
            Facet { normal: vec![1.0 - p10, h2], offset: s },
            Facet { normal: vec![1.0, 1.0], offset: s },
            Facet { normal: vec![h2, 1.0 - p10], offset: s },
            Facet { normal: vec![h1, p01], offset: h1 * pi1 },
        ]
    } else {
        let h3 = (1.0 - p10) * (p10 + (p10 + p01) * (1.0 - p10));
        vec![
            Facet { normal: vec![p01, h3], offset: h3 * pi1 },
            Facet { normal: vec![1.0, 1.0], offset: s },
            Facet { normal: vec![h3, p01], offset: h3 * pi1 },
        ]
    }
}

/// N-queue i.i.d. region: the single load facet `sum lambda_i / p_i <= 1`.
pub fn iid_region(p_on: &[f64]) -> Result<RateRegion, RegionError> {
    for &p in p_on {
        if !(p > 0.0 && p <= 1.0) {
            return Err(RegionError::BadOnProbability(p));
        }
    }
    let n = p_on.len();
    let facets =
        vec![Facet { normal: p_on.iter().map(|&p| 1.0 / p).collect(), offset: 1.0 }];
    let mut corners = vec![vec![0.0; n]];
    for (i, &p) in p_on.iter().enumerate() {
        let mut c = vec![0.0; n];
        c[i] = p;
        corners.push(c);
    }
    Ok(RateRegion::sorted(corners, n, facets))
}

/// System load `rho = sum lambda_i / p_i` of an i.i.d. arrival/channel pair.
pub fn iid_load(lam: &[f64], p_on: &[f64]) -> f64 {
    lam.iter().zip(p_on).map(|(l, p)| l / p).sum()
}

/// Outer bound: the sum-rate facet intersected with the per-queue steady-state
/// caps, N+1 facets in total.
pub fn outer_bound(params: &ChannelParams, n: usize) -> RateRegion {
    let s = sum_rate_upper_bound(params, n);
    let cap = params.steady_state_on();
    let mut facets = vec![Facet { normal: vec![1.0; n], offset: s }];
    for i in 0..n {
        let mut normal = vec![0.0; n];
        normal[i] = 1.0;
        facets.push(Facet { normal, offset: cap });
    }
    let mut corners: Vec<Vec<f64>> = Vec::new();
    for bits in 0usize..1 << n {
        let v: Vec<f64> =
            (0..n).map(|i| if bits >> i & 1 == 1 { cap } else { 0.0 }).collect();
        if v.iter().sum::<f64>() <= s + 1e-12 {
            corners.push(v);
        }
        for free in 0..n {
            if bits >> free & 1 == 1 {
                continue;
            }
            let others: f64 = (0..n)
                .filter(|&i| i != free)
                .map(|i| if bits >> i & 1 == 1 { cap } else { 0.0 })
                .sum();
            let rem = s - others;
            if rem > 1e-12 && rem < cap - 1e-12 {
                let mut v: Vec<f64> =
                    (0..n).map(|i| if bits >> i & 1 == 1 { cap } else { 0.0 }).collect();
                v[free] = rem;
                corners.push(v);
            }
        }
    }
    corners.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    corners.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-9));
    RateRegion { n, corners, facets }
}

fn weighted_rate_solution(poly: &Polytope, weights: &[f64]) -> Result<Vec<f64>, RegionError> {
    let lp = LinearProgram {
        objective: poly.weighted_rate_objective(weights),
        eq_matrix: poly.rows.clone(),
        eq_rhs: poly.rhs.clone(),
    };
    let sol = lp::solve_max(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(RegionError::LpFailure(sol.status));
    }
    Ok(poly.rates_unchecked(&sol.x))
}

/// LP-sweep region. For N = 2 the weight grid is `weight_count` angles on
/// [0, pi/2] with local bisection refinement between cells whose corners
/// differ; facets are the hull edges plus the axes. For N >= 3 the grid is a
/// simplex lattice with `weight_count` divisions and only corners are
/// produced.
pub fn corners_via_sweep(
    params: &ChannelParams,
    n: usize,
    weight_count: usize,
) -> Result<RateRegion, RegionError> {
    if weight_count < 2 * n + 1 {
        return Err(RegionError::GridTooCoarse { need: 2 * n + 1, got: weight_count });
    }
    let poly = mdp::build_polytope(params, n)?;
    if n == 2 {
        return sweep_two_queue(&poly, weight_count);
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let d = weight_count;
    let mut comp = vec![0usize; n];
    simplex_lattice(&mut comp, 0, d, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&i| i as f64 / d as f64).collect();
        points.push(w);
    });
    let mut corners: Vec<Vec<f64>> = Vec::new();
    for w in points {
        let r = weighted_rate_solution(&poly, &w)?;
        if !corners.iter().any(|c| linf(c, &r) <= 1e-9) {
            corners.push(r);
        }
    }
    corners.push(vec![0.0; n]);
    Ok(RateRegion::sorted(corners, n, Vec::new()))
}

fn simplex_lattice(comp: &mut Vec<usize>, pos: usize, left: usize, f: &mut impl FnMut(&[usize])) {
    if pos == comp.len() - 1 {
        comp[pos] = left;
        f(comp);
        return;
    }
    for v in 0..=left {
        comp[pos] = v;
        simplex_lattice(comp, pos + 1, left - v, f);
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sweep_two_queue(poly: &Polytope, weight_count: usize) -> Result<RateRegion, RegionError> {
    let solve = |theta: f64| -> Result<[f64; 2], RegionError> {
        let r = weighted_rate_solution(poly, &[theta.cos(), theta.sin()])?;
        Ok([r[0], r[1]])
    };
    let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut prev: Option<(f64, [f64; 2])> = None;
    for i in 0..weight_count {
        let theta = i as f64 * FRAC_PI_2 / (weight_count - 1) as f64;
        let r = solve(theta)?;
        pts.push(r);
        if let Some((t0, r0)) = prev {
            refine(&solve, t0, r0, theta, r, &mut pts, 0)?;
        }
        prev = Some((theta, r));
    }

    let hull = convex_hull_2d(&pts, 1e-9);
    let mut facets = Vec::new();
    let k = hull.len();
    for i in 0..k {
        let p = hull[i];
        let q = hull[(i + 1) % k];
        if (p[0].abs() < 1e-12 && q[0].abs() < 1e-12)
            || (p[1].abs() < 1e-12 && q[1].abs() < 1e-12)
        {
            continue; // axis edge
        }
        let d = [q[0] - p[0], q[1] - p[1]];
        let mut normal = [d[1], -d[0]];
        let scale = normal[0].abs().max(normal[1].abs());
        normal = [normal[0] / scale, normal[1] / scale];
        facets.push(Facet {
            normal: normal.to_vec(),
            offset: normal[0] * p[0] + normal[1] * p[1],
        });
    }
    facets.push(Facet { normal: vec![-1.0, 0.0], offset: 0.0 });
    facets.push(Facet { normal: vec![0.0, -1.0], offset: 0.0 });
    let corners = hull.iter().map(|p| p.to_vec()).collect();
    Ok(RateRegion::sorted(corners, 2, facets))
}

fn refine(
    solve: &dyn Fn(f64) -> Result<[f64; 2], RegionError>,
    t0: f64,
    r0: [f64; 2],
    t1: f64,
    r1: [f64; 2],
    out: &mut Vec<[f64; 2]>,
    depth: u32,
) -> Result<(), RegionError> {
    let diff = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
    if diff(r0, r1) <= 1e-9 || t1 - t0 <= 1e-10 || depth > 48 {
        return Ok(());
    }
    let tm = 0.5 * (t0 + t1);
    let rm = solve(tm)?;
    out.push(rm);
    if diff(rm, r0) > 1e-9 {
        refine(solve, t0, r0, tm, rm, out, depth + 1)?;
    }
    if diff(rm, r1) > 1e-9 {
        refine(solve, tm, rm, t1, r1, out, depth + 1)?;
    }
    Ok(())
}

/// Exact saturated-region membership of `lam + delta*1` for any N: maximize
/// `t` with component-wise `rates(x) >= t * (lam + delta*1)` over the
/// state-action polytope; membership iff `t >= 1`.
pub fn member_saturated(
    params: &ChannelParams,
    n: usize,
    lam: &[f64],
    delta: f64,
) -> Result<bool, RegionError> {
    let target: Vec<f64> = lam.iter().map(|&v| v + delta).collect();
    if target.iter().any(|&v| v < 0.0) {
        return Ok(false);
    }
    if target.iter().all(|&v| v <= 1e-15) {
        return Ok(true);
    }
    let poly = mdp::build_polytope(params, n)?;
    let nv = poly.num_vars;
    let cols = nv + 1 + n; // x, t, slacks
    let mut eq_matrix: Vec<Vec<f64>> = Vec::with_capacity(poly.rows.len() + n);
    let mut eq_rhs = Vec::with_capacity(poly.rows.len() + n);
    for (row, &b) in poly.rows.iter().zip(&poly.rhs) {
        let mut r = vec![0.0; cols];
        r[..nv].copy_from_slice(row);
        eq_matrix.push(r);
        eq_rhs.push(b);
    }
    for i in 0..n {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        let mut r = vec![0.0; cols];
        r[..nv].copy_from_slice(&poly.weighted_rate_objective(&weights));
        r[nv] = -target[i];
        r[nv + 1 + i] = -1.0;
        eq_matrix.push(r);
        eq_rhs.push(0.0);
    }
    let mut objective = vec![0.0; cols];
    objective[nv] = 1.0;
    let sol = lp::solve_max(&LinearProgram { objective, eq_matrix, eq_rhs });
    if sol.status != LpStatus::Optimal {
        return Err(RegionError::LpFailure(sol.status));
    }
    Ok(sol.objective_value >= 1.0 - 1e-9)
}

/// Queue-sum delay bound `(1 + A_max^2 + A_max xi) T / xi`; divide by the
/// total arrival rate for the Little's-law packet delay.
pub fn delay_upper_bound(t_frame: f64, a_max: f64, xi: f64) -> Result<f64, RegionError> {
    if xi <= 0.0 {
        return Err(RegionError::BadBoundaryDistance(xi));
    }
    if t_frame < 1.0 {
        return Err(RegionError::BadFrameLength(t_frame));
    }
    Ok((1.0 + a_max * a_max + a_max * xi) * t_frame / xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::CornerId;

    fn sym(eps: f64) -> ChannelParams {
        ChannelParams::symmetric(eps).unwrap()
    }

    fn has_corner(region: &RateRegion, want: &[f64], tol: f64) {
        assert!(
            region.corners.iter().any(|c| linf(c, want) <= tol),
            "corner {want:?} missing from {:?}",
            region.corners
        );
    }

    #[test]
    fn closed_form_corner_values() {
        let r25 = closed_form_two_queue(&sym(0.25));
        assert_eq!(r25.corners.len(), 7);
        has_corner(&r25, &[0.0, 0.5], 1e-12);
        has_corner(&r25, &[0.140625, 0.4375], 1e-12);
        has_corner(&r25, &[1.875 / 7.0, 2.5 / 7.0], 1e-12);
        has_corner(&r25, &[0.5, 0.0], 1e-12);

        let r40 = closed_form_two_queue(&sym(0.40));
        assert_eq!(r40.corners.len(), 5);
        has_corner(&r40, &[0.20625, 0.34375], 1e-12);
        let b1 = CornerId(1).rate(&sym(0.40));
        assert!((b1[0] + b1[1] - 0.55).abs() < 1e-12);

        let r50 = closed_form_two_queue(&sym(0.5));
        // memoryless: degenerates to the single sum facet at 0.5
        assert!(r50.facets.iter().any(|f| {
            f.normal == vec![1.0, 1.0] && (f.offset - 0.5).abs() < 1e-12
        }));
        for c in &r50.corners {
            assert!(c[0] + c[1] <= 0.5 + 1e-12);
        }
        has_corner(&r50, &[0.0, 0.5], 1e-12);
        has_corner(&r50, &[0.5, 0.0], 1e-12);
    }

    #[test]
    fn closed_form_corners_match_pattern_rates() {
        // facet intersections against the independent corner formulas
        for eps in [0.05, 0.15, 0.25, 0.29, 0.31, 0.4, 0.45] {
            let params = sym(eps);
            let region = closed_form_two_queue(&params);
            let ids = if crate::policies::six_corner_branch(&params) { 6 } else { 4 };
            for i in 0..ids {
                let want = CornerId(i).rate(&params);
                has_corner(&region, &want, 1e-10);
            }
        }
    }

    #[test]
    fn theorem9_reduces_to_theorem3_at_symmetric_params() {
        for eps in [0.1, 0.25, 0.29289, 0.3, 0.4, 0.5] {
            let sym_facets = symmetric_facets(eps);
            let gen_facets =
                nonsymmetric_facets(&ChannelParams::new(eps, eps).unwrap());
            assert_eq!(sym_facets.len(), gen_facets.len(), "eps={eps}");
            for (a, b) in sym_facets.iter().zip(&gen_facets) {
                // same geometry up to scaling: compare after offset-normalizing
                let scale = if b.offset.abs() > 1e-12 { a.offset / b.offset } else { 1.0 };
                for (x, y) in a.normal.iter().zip(&b.normal) {
                    assert!((x - y * scale).abs() < 1e-12, "eps={eps} {a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn nonsymmetric_corner_values() {
        let params = ChannelParams::new(0.2, 0.1).unwrap();
        let region = closed_form_two_queue(&params);
        assert_eq!(region.corners.len(), 7);
        has_corner(&region, &[0.0, 2.0 / 3.0], 1e-12);
        has_corner(&region, &[0.16, 0.56 / 0.9], 1e-10);
        let f = 0.074 / 0.09;
        has_corner(&region, &[0.9 * f / 1.9, f / 1.9], 1e-10);
        // every corner satisfies every facet
        for c in &region.corners {
            for f in &region.facets {
                assert!(f.slack(c) >= -1e-9);
            }
        }
    }

    #[test]
    fn sweep_matches_closed_form_at_quarter() {
        let params = sym(0.25);
        let sweep = corners_via_sweep(&params, 2, 181).unwrap();
        let closed = closed_form_two_queue(&params);
        assert_eq!(sweep.corners.len(), closed.corners.len());
        for (a, b) in sweep.corners.iter().zip(&closed.corners) {
            assert!(linf(a, b) <= 1e-8, "{a:?} vs {b:?}");
        }
        assert!(corners_via_sweep(&params, 2, 3).is_err());
    }

    #[test]
    fn iid_region_examples() {
        let r = iid_region(&[0.5, 0.5]).unwrap();
        assert_eq!(r.facets[0].normal, vec![2.0, 2.0]);
        assert!(r.contains(&[0.2, 0.2], 0.0));
        assert!(!r.contains(&[0.3, 0.3], 0.0));

        let r = iid_region(&[0.5, 0.25]).unwrap();
        assert_eq!(r.facets[0].normal, vec![2.0, 4.0]);
        assert!((iid_load(&[0.2, 0.1], &[0.5, 0.25]) - 0.8).abs() < 1e-15);
        assert!(r.contains(&[0.2, 0.1], 0.0));

        assert!(iid_region(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn sum_rate_bound_examples() {
        assert!((sum_rate_upper_bound(&sym(0.30), 3) - 0.65).abs() < 1e-15);
        for eps in [0.1, 0.25, 0.4, 0.5] {
            assert!((sum_rate_upper_bound(&sym(eps), 2) - (0.75 - eps / 2.0)).abs() < 1e-12);
        }
        let p = ChannelParams::new(0.2, 0.1).unwrap();
        assert!((sum_rate_upper_bound(&p, 1) - p.steady_state_on()).abs() < 1e-12);
    }

    #[test]
    fn outer_bound_shape_and_tightness() {
        let params = sym(0.3);
        let outer = outer_bound(&params, 3);
        assert_eq!(outer.facets.len(), 4);
        assert!((outer.facets[0].offset - 0.65).abs() < 1e-12);
        // hexagon corners: permutations of (0.5, 0.15, 0)
        has_corner(&outer, &[0.5, 0.15, 0.0], 1e-12);
        has_corner(&outer, &[0.0, 0.15, 0.5], 1e-12);

        // N=2: outer sum facet touches the region's sum facet
        let closed = closed_form_two_queue(&sym(0.25));
        let outer2 = outer_bound(&sym(0.25), 2);
        let closed_sum = closed
            .facets
            .iter()
            .find(|f| f.normal == vec![1.0, 1.0])
            .map(|f| f.offset)
            .unwrap();
        assert!((outer2.facets[0].offset - closed_sum).abs() < 1e-12);
    }

    #[test]
    fn contains_and_distance_examples() {
        let region = closed_form_two_queue(&sym(0.25));
        assert!(region.contains(&[0.3, 0.3], 0.0));
        assert!(!region.contains(&[0.32, 0.32], 0.0));
        assert!(region.contains(&[0.0, 0.5], 0.0)); // boundary corner b0
        assert!(!region.contains(&[0.3, 0.3], 0.02));

        let xi = region.distance_to_boundary(&[0.3, 0.3]);
        assert!((xi - 0.0125).abs() < 1e-12);
        let at_corner = region.distance_to_boundary(&[1.875 / 7.0, 2.5 / 7.0]);
        assert!(at_corner.abs() < 1e-12);

        let r40 = closed_form_two_queue(&sym(0.4));
        assert!((r40.distance_to_boundary(&[0.0, 0.0]) - 0.275).abs() < 1e-12);
        assert!(r40.distance_to_boundary(&[0.4, 0.4]) < 0.0);
    }

    #[test]
    fn membership_lp_agrees_with_facets() {
        let params = sym(0.25);
        let region = closed_form_two_queue(&params);
        for lam in [[0.3, 0.3], [0.32, 0.32], [0.1, 0.45], [0.05, 0.52], [0.45, 0.1]] {
            assert_eq!(
                member_saturated(&params, 2, &lam, 0.0).unwrap(),
                region.contains(&lam, 0.0),
                "lam={lam:?}"
            );
        }
        assert!(member_saturated(&params, 2, &[0.0, 0.0], 0.0).unwrap());
    }

    #[test]
    fn region_monotone_in_channel_memory() {
        // smaller epsilon (more memory) gives a larger region
        let pairs = [(0.1, 0.2), (0.2, 0.3), (0.25, 0.4), (0.35, 0.5)];
        for (lo, hi) in pairs {
            let large = closed_form_two_queue(&sym(lo));
            let small = closed_form_two_queue(&sym(hi));
            for c in &small.corners {
                assert!(large.contains(c, 0.0), "eps {lo}<{hi}, corner {c:?}");
            }
        }
    }

    #[test]
    fn low_epsilon_limit_approaches_no_switchover_region() {
        let region = closed_form_two_queue(&sym(1e-4));
        let sum_offset = region
            .facets
            .iter()
            .find(|f| f.normal == vec![1.0, 1.0])
            .map(|f| f.offset)
            .unwrap();
        assert!((0.75 - sum_offset).abs() <= 0.5e-4 + 1e-15);
    }

    #[test]
    fn delay_bound_calculator() {
        let v = delay_upper_bound(25.0, 1.0, 0.1).unwrap();
        assert!((v - 525.0).abs() < 1e-12);
        let v2 = delay_upper_bound(50.0, 1.0, 0.1).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-9);
        assert!(delay_upper_bound(25.0, 1.0, 1e-9).unwrap() > 1e9);
        assert!(delay_upper_bound(25.0, 1.0, 0.0).is_err());
        assert!(delay_upper_bound(0.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn sweep_n3_corners_inside_outer_bound() {
        let params = sym(0.3);
        let sweep = corners_via_sweep(&params, 3, 9).unwrap();
        let outer = outer_bound(&params, 3);
        assert!(!sweep.corners.is_empty());
        for c in &sweep.corners {
            assert!(outer.contains(c, 0.0), "corner {c:?} escapes outer bound");
        }
        // the greedy-optimal sum rate is reached by some sweep point
        let best: f64 =
            sweep.corners.iter().map(|c| c.iter().sum::<f64>()).fold(0.0, f64::max);
        assert!((best - 0.65).abs() < 1e-8);
    }
}
