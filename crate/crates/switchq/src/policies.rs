//! Scheduling policies: FBDC (LP-per-frame and threshold-table variants),
//! k-lookahead myopic, greedy myopic, Max-Weight, and gated/exhaustive.
//!
//! Two-queue corner machinery lives here as well: the six stationary action
//! patterns that arise as LP vertices, their closed-form rate pairs, and the
//! queue-ratio threshold tables that map `Q2/Q1` to a corner for the FBDC and
//! one-lookahead myopic policies.

use crate::channel::ChannelParams;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::mdp::{self, ActionId, DeterministicPolicyTable, SaturatedState, StateActionFrequencies};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("operation requires a two-queue system, got N={0}")]
    NotTwoQueue(usize),
    #[error("lookahead k must be >= 1")]
    ZeroLookahead,
    #[error("k-lookahead threshold derivation requires symmetric parameters for k >= 2")]
    AsymmetricLookahead,
    #[error("internal LP failed: {0:?}")]
    LpFailure(LpStatus),
    #[error(transparent)]
    Mdp(#[from] mdp::MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    FbdcLp,
    FbdcTable,
    Myopic(u32),
    GreedyMyopic,
    MaxWeight,
    Gated,
    Exhaustive,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::FbdcLp => "fbdc_lp",
            PolicyKind::FbdcTable => "fbdc_table",
            PolicyKind::Myopic(_) => "myopic",
            PolicyKind::GreedyMyopic => "greedy_myopic",
            PolicyKind::MaxWeight => "max_weight",
            PolicyKind::Gated => "gated",
            PolicyKind::Exhaustive => "exhaustive",
        }
    }

    pub fn lookahead(&self) -> u32 {
        match self {
            PolicyKind::Myopic(k) => *k,
            _ => 0,
        }
    }

    pub fn parse(kind: &str, k: u32) -> Option<Self> {
        Some(match kind {
            "fbdc_lp" | "fbdc" => PolicyKind::FbdcLp,
            "fbdc_table" => PolicyKind::FbdcTable,
            "myopic" | "olm" => PolicyKind::Myopic(k.max(1)),
            "greedy_myopic" | "gm" => PolicyKind::GreedyMyopic,
            "max_weight" | "mw" => PolicyKind::MaxWeight,
            "gated" => PolicyKind::Gated,
            "exhaustive" => PolicyKind::Exhaustive,
            _ => return None,
        })
    }
}

/// Critical channel correlation where the two-queue region drops from six to
/// four corners.
pub fn epsilon_c() -> f64 {
    1.0 - std::f64::consts::SQRT_2 / 2.0
}

/// Root of (2-e)/(1-e) = (1-e)^2/e below epsilon_c; separates the two
/// sub-cases of the one-lookahead discrepancy analysis.
pub fn epsilon_t() -> f64 {
    let f = |e: f64| e * (2.0 - e) - (1.0 - e).powi(3);
    let (mut lo, mut hi) = (0.1, epsilon_c());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// True when the rate region has six corners (the channel is correlated
/// enough): p01 < (1-p10)^2 / (2-p10). Symmetric parameters reduce this to
/// epsilon < epsilon_c.
pub fn six_corner_branch(params: &ChannelParams) -> bool {
    params.p01() < (1.0 - params.p10()).powi(2) / (2.0 - params.p10())
}

/// The six two-queue stationary action patterns that occur as LP vertices,
/// in the six-corner naming b0..b5 (P0 = always stay at queue 2, P5 = always
/// stay at queue 1). For four-corner parameters only P0, P2, P3, P5 are
/// extreme; the others remain valid stationary policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CornerPattern {
    P0,
    P1,
    P2,
    P3,
    P4,
    P5,
}

/// Stay flags per state in canonical order
/// (1,11),(1,10),(1,01),(1,00),(2,11),(2,10),(2,01),(2,00).
const PATTERN_STAY: [[bool; 8]; 6] = [
    [false, false, false, false, true, true, true, true], // P0
    [false, true, false, false, true, false, true, true], // P1
    [true, true, false, false, true, false, true, true],  // P2
    [true, true, false, true, true, false, true, false],  // P3 = mirror of P2
    [true, true, false, true, false, false, true, false], // P4 = mirror of P1
    [true, true, true, true, false, false, false, false], // P5
];

impl CornerPattern {
    pub const ALL: [CornerPattern; 6] =
        [Self::P0, Self::P1, Self::P2, Self::P3, Self::P4, Self::P5];

    fn idx(self) -> usize {
        match self {
            Self::P0 => 0,
            Self::P1 => 1,
            Self::P2 => 2,
            Self::P3 => 3,
            Self::P4 => 4,
            Self::P5 => 5,
        }
    }

    pub fn stay_flags(self) -> [bool; 8] {
        PATTERN_STAY[self.idx()]
    }

    pub fn policy(self) -> DeterministicPolicyTable {
        let action = self
            .stay_flags()
            .iter()
            .enumerate()
            .map(|(i, &stay)| {
                let m = SaturatedState::from_index(i, 2).m;
                ActionId::to(if stay { m } else { 3 - m })
            })
            .collect();
        DeterministicPolicyTable { n: 2, action }
    }

    /// Closed-form stationary rate pair of the pattern (valid for every
    /// parameter value, whether or not the pattern is a region corner).
    pub fn rate(self, params: &ChannelParams) -> [f64; 2] {
        let (p01, p10) = (params.p01(), params.p10());
        let pi1 = params.steady_state_on();
        let denom = (p01 + p10).powi(2);
        match self {
            Self::P0 => [0.0, pi1],
            Self::P5 => [pi1, 0.0],
            Self::P1 => [
                (1.0 - p01) * (1.0 - p10) * p01 * p10 / denom,
                p01 * (p10 - p10 * p01 + p01) / denom,
            ],
            Self::P4 => {
                let [a, b] = Self::P1.rate(params);
                [b, a]
            }
            Self::P2 => {
                let f = (p01 * p10 + p01 * (1.0 - p10) * (p01 + p10)) / denom;
                [(1.0 - p10) * f / (2.0 - p10), f / (2.0 - p10)]
            }
            Self::P3 => {
                let [a, b] = Self::P2.rate(params);
                [b, a]
            }
        }
    }
}

/// Corner label in the active branch's own numbering: b0..b5 for six-corner
/// parameters, b0..b3 for four-corner ones (b0 is always (0, pi1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CornerId(pub usize);

impl CornerId {
    pub fn pattern(self, params: &ChannelParams) -> CornerPattern {
        if six_corner_branch(params) {
            CornerPattern::ALL[self.0]
        } else {
            [CornerPattern::P0, CornerPattern::P2, CornerPattern::P3, CornerPattern::P5][self.0]
        }
    }

    pub fn rate(self, params: &ChannelParams) -> [f64; 2] {
        self.pattern(params).rate(params)
    }

    pub fn label(self) -> String {
        format!("b{}", self.0)
    }
}

/// Ordered thresholds on Q2/Q1 with the corner applied on each half-open
/// interval `[thresholds[i], thresholds[i+1])`; the last interval is
/// unbounded above.
#[derive(Debug, Clone)]
pub struct CornerThresholdTable {
    pub thresholds: Vec<f64>,
    pub corners: Vec<CornerId>,
}

impl CornerThresholdTable {
    pub fn lookup(&self, ratio: f64) -> CornerId {
        let mut chosen = self.corners[0];
        for (t, c) in self.thresholds.iter().zip(&self.corners) {
            if ratio >= *t {
                chosen = *c;
            }
        }
        chosen
    }
}

/// FBDC queue-ratio thresholds, exactly as printed in the corner-mapping
/// table captions for the active branch.
pub fn fbdc_thresholds(params: &ChannelParams) -> CornerThresholdTable {
    let (p01, p10) = (params.p01(), params.p10());
    if six_corner_branch(params) {
        let t1 = p01 / ((1.0 - p01) * (1.0 - p10));
        let t2 = (1.0 - p10) / (1.0 + p10 - p10 * p10);
        CornerThresholdTable {
            thresholds: vec![0.0, t1, t2, 1.0, 1.0 / t2, 1.0 / t1],
            corners: (0..6).rev().map(CornerId).collect(),
        }
    } else {
        let h3 = (1.0 - p10) * (p10 + (p10 + p01) * (1.0 - p10));
        let t1 = p01 / h3;
        CornerThresholdTable {
            thresholds: vec![0.0, t1, 1.0, 1.0 / t1],
            corners: (0..4).rev().map(CornerId).collect(),
        }
    }
}

/// One-lookahead myopic thresholds, as printed in the table captions.
pub fn olm_thresholds(params: &ChannelParams) -> CornerThresholdTable {
    let (p01, p10) = (params.p01(), params.p10());
    let t1 = p01 / (1.0 - p10);
    if six_corner_branch(params) {
        let t2 = (1.0 - p10) / (2.0 - p01);
        CornerThresholdTable {
            thresholds: vec![0.0, t1, t2, 1.0, 1.0 / t2, 1.0 / t1],
            corners: (0..6).rev().map(CornerId).collect(),
        }
    } else {
        CornerThresholdTable {
            thresholds: vec![0.0, t1, 1.0, 1.0 / t1],
            corners: (0..4).rev().map(CornerId).collect(),
        }
    }
}

/// Queue ratio Q2/Q1 as an extended real; Q1 = 0 maps to +infinity.
pub fn queue_ratio(q1: f64, q2: f64) -> f64 {
    if q1 <= 0.0 {
        f64::INFINITY
    } else {
        q2 / q1
    }
}

/// Table-driven FBDC: the corner interval containing `ratio` and the exact
/// action table printed in that corner's column.
pub fn fbdc_table_lookup(
    params: &ChannelParams,
    ratio: f64,
) -> (CornerId, DeterministicPolicyTable) {
    let id = fbdc_thresholds(params).lookup(ratio);
    (id, id.pattern(params).policy())
}

/// The corner whose deterministic actions the one-lookahead myopic rule
/// reproduces at this frame-queue ratio. Analysis aid, not a control path.
pub fn olm_table_lookup(params: &ChannelParams, ratio: f64) -> CornerId {
    olm_thresholds(params).lookup(ratio)
}

/// Solve the weighted-rate LP with the queue lengths as weights and extract
/// the optimal vertex's deterministic table. Zero queues return all-stay.
pub fn fbdc_plan(
    params: &ChannelParams,
    n: usize,
    queues: &[u64],
) -> Result<DeterministicPolicyTable, PolicyError> {
    fbdc_plan_weighted(params, n, &queues.iter().map(|&q| q as f64).collect::<Vec<_>>())
}

pub fn fbdc_plan_weighted(
    params: &ChannelParams,
    n: usize,
    weights: &[f64],
) -> Result<DeterministicPolicyTable, PolicyError> {
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(DeterministicPolicyTable::all_stay(n));
    }
    let x = fbdc_vertex(params, n, weights)?;
    Ok(mdp::deterministic_from_x(&x))
}

/// The optimal state-action frequency vertex for given queue weights.
pub fn fbdc_vertex(
    params: &ChannelParams,
    n: usize,
    weights: &[f64],
) -> Result<StateActionFrequencies, PolicyError> {
    let poly = mdp::build_polytope(params, n)?;
    let lp = LinearProgram {
        objective: poly.weighted_rate_objective(weights),
        eq_matrix: poly.rows.clone(),
        eq_rhs: poly.rhs.clone(),
    };
    let sol = lp::solve_max(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(PolicyError::LpFailure(sol.status));
    }
    Ok(StateActionFrequencies::new(n, sol.x))
}

/// Sum of k-step ON predictions given the current bit.
fn prediction_sum(params: &ChannelParams, current: u8, k: u32) -> f64 {
    (1..=k).map(|tau| params.predict_on(current, tau).expect("tau >= 1")).sum()
}

/// k-lookahead myopic weights: the current queue counts its observed bit plus
/// k predictions, every other queue only the predictions.
pub fn myopic_weights(
    params: &ChannelParams,
    frame_queues: &[f64],
    s: &SaturatedState,
    k: u32,
) -> Result<Vec<f64>, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroLookahead);
    }
    Ok(frame_queues
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let own = if s.m == i + 1 { s.c[i] as f64 } else { 0.0 };
            q * (own + prediction_sum(params, s.c[i], k))
        })
        .collect())
}

/// Stay when the current queue's weight is maximal (ties favor staying);
/// otherwise switch to the largest-weight other queue, lowest index first.
pub fn myopic_decide(weights: &[f64], m: usize) -> ActionId {
    let w_m = weights[m - 1];
    let mut best: Option<(usize, f64)> = None;
    for (i, &w) in weights.iter().enumerate() {
        if i + 1 == m {
            continue;
        }
        if best.map_or(true, |(_, bw)| w > bw) {
            best = Some((i + 1, w));
        }
    }
    match best {
        Some((target, w)) if w > w_m => ActionId::to(target),
        _ => ActionId::to(m),
    }
}

/// The deterministic table the k-lookahead rule induces when the frame queue
/// ratio is frozen at Q2/Q1 = ratio (two queues).
pub fn olm_induced_table(
    params: &ChannelParams,
    k: u32,
    ratio: f64,
) -> Result<DeterministicPolicyTable, PolicyError> {
    let q = if ratio.is_finite() { [1.0, ratio] } else { [0.0, 1.0] };
    let states = mdp::enumerate_states(2)?;
    let mut action = Vec::with_capacity(8);
    for s in &states {
        let w = myopic_weights(params, &q, s, k)?;
        action.push(myopic_decide(&w, s.m));
    }
    Ok(DeterministicPolicyTable { n: 2, action })
}

/// Classify an induced two-queue table by the rate point its recurrent class
/// achieves. `None` only at exact decision ties between the named patterns.
pub fn classify_two_queue_table(table: &DeterministicPolicyTable) -> Option<CornerPattern> {
    let stay: Vec<bool> =
        table.action.iter().enumerate().map(|(i, a)| a.target() == i / 4 + 1).collect();
    if stay[..4].iter().all(|&b| b) {
        return Some(CornerPattern::P5); // queue 1 absorbs
    }
    if stay[4..].iter().all(|&b| b) {
        return Some(CornerPattern::P0); // queue 2 absorbs
    }
    CornerPattern::ALL
        .iter()
        .copied()
        .find(|p| p.stay_flags().iter().zip(&stay).all(|(a, b)| a == b))
}

/// Breakpoints of the k-lookahead induced-pattern map on Q2/Q1 (symmetric
/// parameters): `[(lower, pattern)]`, last interval unbounded. This is the
/// k >= 2 analogue of the printed one-lookahead tables.
pub fn olm_pattern_breakpoints(
    params: &ChannelParams,
    k: u32,
) -> Result<Vec<(f64, CornerPattern)>, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroLookahead);
    }
    if k >= 2 && !params.is_symmetric() {
        return Err(PolicyError::AsymmetricLookahead);
    }
    let g1 = prediction_sum(params, 1, k);
    let g0 = prediction_sum(params, 0, k);
    let mut cuts = vec![g0 / g1, g1 / (1.0 + g1), 1.0, (1.0 + g1) / g1, g1 / g0];
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut out = Vec::new();
    let mut lower = 0.0;
    for &cut in cuts.iter().chain(std::iter::once(&f64::INFINITY)) {
        let mid = if cut.is_finite() { 0.5 * (lower + cut) } else { lower * 2.0 + 1.0 };
        let table = olm_induced_table(params, k, mid)?;
        let pattern = classify_two_queue_table(&table)
            .expect("interval midpoints avoid decision ties");
        out.push((lower, pattern));
        lower = cut;
    }
    // merge adjacent intervals that map to the same pattern
    out.dedup_by(|next, prev| next.1 == prev.1);
    Ok(out)
}

/// Greedy myopic: serve the current queue if ON, else switch to the first ON
/// queue in cyclic order m+1, ..., N, 1, ..., m-1; stay when everything is OFF.
pub fn greedy_myopic_decide(s: &SaturatedState) -> ActionId {
    let n = s.n();
    if s.c[s.m - 1] == 1 {
        return ActionId::to(s.m);
    }
    for step in 1..n {
        let j = (s.m - 1 + step) % n + 1;
        if s.c[j - 1] == 1 {
            return ActionId::to(j);
        }
    }
    ActionId::to(s.m)
}

/// Max-Weight: argmax_i Q_i * C_i, ties preferring the current queue then the
/// lowest index. A switch decision forfeits the slot.
pub fn max_weight_decide(queues: &[u64], c: &[u8], m: usize) -> ActionId {
    let weight = |i: usize| queues[i - 1] as f64 * c[i - 1] as f64;
    let mut best = m;
    let mut best_w = weight(m);
    for i in 1..=queues.len() {
        let w = weight(i);
        if w > best_w {
            best = i;
            best_w = w;
        } else if w == best_w && best != m && i < best {
            best = i;
        }
    }
    ActionId::to(best)
}

/// Gated: keep the visit alive until the gated packet count has departed,
/// then move cyclically to the next queue.
pub fn gated_decide(gate_remaining: u64, m: usize, n: usize) -> ActionId {
    if gate_remaining > 0 {
        ActionId::to(m)
    } else {
        ActionId::to(m % n + 1)
    }
}

/// Exhaustive: stay until the current queue drains, then move cyclically.
pub fn exhaustive_decide(current_queue: u64, m: usize, n: usize) -> ActionId {
    if current_queue > 0 {
        ActionId::to(m)
    } else {
        ActionId::to(m % n + 1)
    }
}
