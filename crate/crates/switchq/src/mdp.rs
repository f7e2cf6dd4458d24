//! Saturated-system MDP for N parallel queues: state enumeration, transition
//! kernel, per-queue rewards, and the state-action frequency polytope.
//!
//! States are `(m, c)` where `m` is the server position (1-based) and `c` the
//! connectivity bit per queue. The canonical order matches the two-queue
//! enumeration `(1,1,1) = 1 .. (2,0,0) = 8`: within a server position, channel
//! patterns run from all-ON down to all-OFF with `c1` as the most significant
//! bit of the OFF pattern.

use crate::channel::ChannelParams;
use thiserror::Error;

/// Largest supported queue count. Beyond this the LP is untested; fail loudly.
pub const MAX_QUEUES: usize = 6;

pub const SUM_TOL: f64 = 1e-9;
pub const BALANCE_TOL: f64 = 1e-9;
pub const NEG_CLAMP: f64 = -1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("queue count {0} outside supported range 1..={MAX_QUEUES}")]
    BadQueueCount(usize),
    #[error("state/action does not belong to an {0}-queue system")]
    DimensionMismatch(usize),
    #[error("state-action frequencies violate {what}: residual {residual:e}")]
    InvalidFrequencies { what: &'static str, residual: f64 },
}

/// Server position plus one connectivity bit per queue.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SaturatedState {
    pub m: usize,
    pub c: Vec<u8>,
}

impl SaturatedState {
    pub fn new(m: usize, c: Vec<u8>) -> Self {
        debug_assert!(m >= 1 && m <= c.len());
        debug_assert!(c.iter().all(|&b| b <= 1));
        Self { m, c }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Zero-based canonical index; `index + 1` is the paper-style state id.
    pub fn index(&self) -> usize {
        let n = self.c.len();
        let mut off_bits = 0usize;
        for (i, &ci) in self.c.iter().enumerate() {
            off_bits |= ((1 - ci) as usize) << (n - 1 - i);
        }
        (self.m - 1) * (1 << n) + off_bits
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        let block = 1usize << n;
        let m = index / block + 1;
        let off_bits = index % block;
        let c = (0..n).map(|i| 1 - ((off_bits >> (n - 1 - i)) & 1) as u8).collect();
        Self { m, c }
    }
}

/// The queue the server occupies next slot. For N=2, `target == m` is the
/// paper's stay action and `target != m` is switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionId(usize);

impl ActionId {
    pub fn to(target: usize) -> Self {
        debug_assert!(target >= 1);
        Self(target)
    }

    pub fn target(&self) -> usize {
        self.0
    }

    pub fn is_stay(&self, m: usize) -> bool {
        self.0 == m
    }
}

pub fn num_states(n: usize) -> usize {
    n * (1 << n)
}

pub fn num_state_actions(n: usize) -> usize {
    num_states(n) * n
}

/// Column of the state-action pair `(s, a)` in the frequency vector.
pub fn var_index(state_index: usize, target: usize, n: usize) -> usize {
    state_index * n + (target - 1)
}

/// All N*2^N states in canonical order. Guarded at `MAX_QUEUES`.
pub fn enumerate_states(n: usize) -> Result<Vec<SaturatedState>, MdpError> {
    if n == 0 || n > MAX_QUEUES {
        return Err(MdpError::BadQueueCount(n));
    }
    Ok((0..num_states(n)).map(|i| SaturatedState::from_index(i, n)).collect())
}

/// P(s_next | s, a): zero unless the server lands on the action target, else
/// the product of per-channel one-step transition probabilities.
pub fn transition_prob(
    params: &ChannelParams,
    s: &SaturatedState,
    a: ActionId,
    s_next: &SaturatedState,
) -> f64 {
    debug_assert_eq!(s.n(), s_next.n());
    if s_next.m != a.target() {
        return 0.0;
    }
    let mut p = 1.0;
    for (&ci, &ci_next) in s.c.iter().zip(&s_next.c) {
        p *= match (ci, ci_next) {
            (0, 0) => 1.0 - params.p01(),
            (0, 1) => params.p01(),
            (1, 0) => params.p10(),
            _ => 1.0 - params.p10(),
        };
    }
    p
}

/// One packet departs queue `i` exactly when the server is at `i` with an ON
/// channel and decides to stay.
pub fn reward(s: &SaturatedState, a: ActionId, i: usize) -> f64 {
    if s.m == i && s.c[i - 1] == 1 && a.target() == i {
        1.0
    } else {
        0.0
    }
}

/// Equality system of the state-action polytope: one balance row per state,
/// one normalization row, nonnegativity implied on every variable.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub n: usize,
    pub num_vars: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Index of the one balance row that is linearly dependent on the rest;
    /// the LP layer decides whether to drop it.
    pub redundant_row: usize,
    states: Vec<SaturatedState>,
}

pub fn build_polytope(params: &ChannelParams, n: usize) -> Result<Polytope, MdpError> {
    let states = enumerate_states(n)?;
    let ns = states.len();
    let nv = ns * n;
    let mut rows = vec![vec![0.0; nv]; ns + 1];
    let mut rhs = vec![0.0; ns + 1];

    for (si, s) in states.iter().enumerate() {
        for t in 1..=n {
            rows[si][var_index(si, t, n)] += 1.0;
        }
        for (sj, s_prev) in states.iter().enumerate() {
            for t in 1..=n {
                let p = transition_prob(params, s_prev, ActionId::to(t), s);
                if p != 0.0 {
                    rows[si][var_index(sj, t, n)] -= p;
                }
            }
        }
    }
    rows[ns] = vec![1.0; nv];
    rhs[ns] = 1.0;

    Ok(Polytope { n, num_vars: nv, rows, rhs, redundant_row: ns - 1, states })
}

impl Polytope {
    pub fn states(&self) -> &[SaturatedState] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Objective coefficients for maximizing `sum_i weights[i] * r_i(x)`.
    pub fn weighted_rate_objective(&self, weights: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut obj = vec![0.0; self.num_vars];
        for (si, s) in self.states.iter().enumerate() {
            for t in 1..=n {
                let a = ActionId::to(t);
                for (i, w) in weights.iter().enumerate() {
                    obj[var_index(si, t, n)] += w * reward(s, a, i + 1);
                }
            }
        }
        obj
    }

    pub fn residuals(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut balance: f64 = 0.0;
        for (row, &b) in self.rows.iter().zip(&self.rhs).take(self.num_states()) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            balance = balance.max((lhs - b).abs());
        }
        let sum_resid = (x.iter().sum::<f64>() - 1.0).abs();
        let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
        (sum_resid, balance, min_x)
    }

    pub fn validate(&self, x: &[f64]) -> Result<(), MdpError> {
        if x.len() != self.num_vars {
            return Err(MdpError::DimensionMismatch(self.n));
        }
        let (sum_resid, balance, min_x) = self.residuals(x);
        if sum_resid > SUM_TOL {
            return Err(MdpError::InvalidFrequencies { what: "normalization", residual: sum_resid });
        }
        if balance > BALANCE_TOL {
            return Err(MdpError::InvalidFrequencies { what: "balance", residual: balance });
        }
        if min_x < NEG_CLAMP {
            return Err(MdpError::InvalidFrequencies { what: "nonnegativity", residual: min_x });
        }
        Ok(())
    }

    /// Per-queue time-average expected departure rates of a feasible `x`.
    pub fn rates(&self, x: &[f64]) -> Result<Vec<f64>, MdpError> {
        self.validate(x)?;
        Ok(self.rates_unchecked(x))
    }

    pub fn rates_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; n];
        for (si, s) in self.states.iter().enumerate() {
            if s.c[s.m - 1] == 1 {
                r[s.m - 1] += x[var_index(si, s.m, n)].max(0.0);
            }
        }
        r
    }
}

/// State-action frequency vector on the polytope X.
#[derive(Debug, Clone)]
pub struct StateActionFrequencies {
    pub n: usize,
    x: Vec<f64>,
}

impl StateActionFrequencies {
    pub fn new(n: usize, x: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), num_state_actions(n));
        Self { n, x }
    }

    /// Raw vector; negative round-off is visible here.
    pub fn raw(&self) -> &[f64] {
        &self.x
    }

    /// Entry clamped at zero on read.
    pub fn get(&self, state_index: usize, target: usize) -> f64 {
        self.x[var_index(state_index, target, self.n)].max(0.0)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.x.iter().zip(&other.x).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Total map from states to actions; corresponds to an extreme point of X
/// when derived from an LP vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicPolicyTable {
    pub n: usize,
    pub action: Vec<ActionId>,
}

impl DeterministicPolicyTable {
    pub fn all_stay(n: usize) -> Self {
        let states = enumerate_states(n).expect("guarded n");
        Self { n, action: states.iter().map(|s| ActionId::to(s.m)).collect() }
    }

    pub fn action_for(&self, s: &SaturatedState) -> ActionId {
        self.action[s.index()]
    }

    /// Swap queue labels 1 and 2 (two-queue systems).
    pub fn mirror_two_queue(&self) -> Self {
        assert_eq!(self.n, 2);
        let mut action = vec![ActionId::to(1); 8];
        for idx in 0..8 {
            let s = SaturatedState::from_index(idx, 2);
            let mirrored = SaturatedState::new(3 - s.m, vec![s.c[1], s.c[0]]);
            let a = self.action[mirrored.index()];
            action[idx] = ActionId::to(3 - a.target());
        }
        Self { n: 2, action }
    }

    /// Dense row-stochastic transition matrix of the induced chain.
    pub fn transition_matrix(&self, params: &ChannelParams) -> Vec<Vec<f64>> {
        let states = enumerate_states(self.n).expect("guarded n");
        let ns = states.len();
        let mut p = vec![vec![0.0; ns]; ns];
        for (si, s) in states.iter().enumerate() {
            let a = self.action[si];
            for (sj, s_next) in states.iter().enumerate() {
                p[si][sj] = transition_prob(params, s, a, s_next);
            }
        }
        p
    }
}

/// Randomized stationary policy read off a frequency vector via x(s,a)/x(s).
#[derive(Debug, Clone)]
pub struct RandomizedPolicy {
    pub n: usize,
    /// Per state, probability of each target queue.
    pub probs: Vec<Vec<f64>>,
}

/// Threshold below which a state counts as transient for `policy_from_x`.
pub const RECURRENT_TOL: f64 = 1e-9;

/// Eq.-(9) policy of a frequency vector; transient states default to stay.
pub fn policy_from_x(x: &StateActionFrequencies) -> RandomizedPolicy {
    let n = x.n;
    let states = enumerate_states(n).expect("guarded n");
    let mut probs = Vec::with_capacity(states.len());
    for (si, s) in states.iter().enumerate() {
        let mass: f64 = (1..=n).map(|t| x.get(si, t)).sum();
        let mut row = vec![0.0; n];
        if mass > RECURRENT_TOL {
            for (t, slot) in row.iter_mut().enumerate() {
                *slot = x.get(si, t + 1) / mass;
            }
        } else {
            row[s.m - 1] = 1.0;
        }
        probs.push(row);
    }
    RandomizedPolicy { n, probs }
}

/// Deterministic table from a vertex `x`: the single positive action per
/// recurrent state, stay on transient states.
pub fn deterministic_from_x(x: &StateActionFrequencies) -> DeterministicPolicyTable {
    let policy = policy_from_x(x);
    let action = policy
        .probs
        .iter()
        .map(|row| {
            let (best, _) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
                .expect("nonempty action set");
            ActionId::to(best + 1)
        })
        .collect();
    DeterministicPolicyTable { n: policy.n, action }
}
