//! Slotted Monte-Carlo engine: Bernoulli/Poisson arrivals, Gilbert-Elliot
//! channel evolution, server motion with one-slot switchover, the queue
//! recursion `Q' = max(Q - D, 0) + A`, saturated mode, and stability
//! classification.
//!
//! Event order within a slot: observe, decide, serve, arrive, advance
//! channels. Channel and arrival draws come from independent seeded streams,
//! so the channel sample path depends only on the seed, never on the policy
//! or on arrivals.

use crate::channel::ChannelParams;
use crate::mdp::{self, ActionId, DeterministicPolicyTable, SaturatedState, StateActionFrequencies};
use crate::policies::{self, PolicyError, PolicyKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("config dimension mismatch: {0}")]
    BadConfig(String),
    #[error("bernoulli arrivals need rates <= 1, got {0}")]
    BernoulliRate(f64),
    #[error("empirical window must be positive and <= trace length")]
    BadWindow,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mdp(#[from] mdp::MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    Bernoulli,
    Poisson,
}

/// Arrival process per queue. Bernoulli keeps `A_max = 1`; Poisson is
/// truncated at `a_max` so the second moment stays bounded.
#[derive(Debug, Clone)]
pub struct ArrivalSpec {
    pub kind: ArrivalKind,
    pub rates: Vec<f64>,
    pub a_max: f64,
}

impl ArrivalSpec {
    pub fn bernoulli(rates: Vec<f64>) -> Self {
        Self { kind: ArrivalKind::Bernoulli, rates, a_max: 1.0 }
    }

    pub fn poisson(rates: Vec<f64>) -> Self {
        Self { kind: ArrivalKind::Poisson, rates, a_max: 10.0 }
    }

    pub fn zero(n: usize) -> Self {
        Self::bernoulli(vec![0.0; n])
    }

    fn validate(&self) -> Result<(), SimError> {
        for &r in &self.rates {
            if r < 0.0 {
                return Err(SimError::BadConfig(format!("negative arrival rate {r}")));
            }
            if self.kind == ArrivalKind::Bernoulli && r > 1.0 {
                return Err(SimError::BernoulliRate(r));
            }
        }
        Ok(())
    }
}

/// Stability classifier knobs; the defaults were sized so that points at
/// boundary distance >= 0.01 classify correctly at a 1e5-slot horizon.
#[derive(Debug, Clone, Copy)]
pub struct StabilityKnobs {
    pub slope_threshold: f64,
    pub final_fraction: f64,
}

impl Default for StabilityKnobs {
    fn default() -> Self {
        Self { slope_threshold: 0.002, final_fraction: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub channel: ChannelParams,
    pub arrivals: ArrivalSpec,
    pub policy: PolicyKind,
    pub frame_t: usize,
    pub horizon: usize,
    pub seed: u64,
    pub saturated: bool,
    pub initial_m: usize,
    /// Channel state at t = 0; drawn from steady state when absent.
    pub initial_channels: Option<Vec<u8>>,
    pub initial_queues: Vec<u64>,
    pub checkpoint_count: usize,
    pub stability: StabilityKnobs,
}

impl SimConfig {
    pub fn new(n: usize, channel: ChannelParams, arrivals: ArrivalSpec, policy: PolicyKind) -> Self {
        Self {
            n,
            channel,
            arrivals,
            policy,
            frame_t: 1,
            horizon: 100_000,
            seed: 1,
            saturated: false,
            initial_m: 1,
            initial_channels: None,
            initial_queues: vec![0; n],
            checkpoint_count: 100,
            stability: StabilityKnobs::default(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 || self.n > mdp::MAX_QUEUES {
            return Err(SimError::BadConfig(format!("n={} unsupported", self.n)));
        }
        if self.arrivals.rates.len() != self.n {
            return Err(SimError::BadConfig(format!(
                "{} arrival rates for n={}",
                self.arrivals.rates.len(),
                self.n
            )));
        }
        if self.initial_queues.len() != self.n {
            return Err(SimError::BadConfig("initial queue vector length".into()));
        }
        if self.initial_m < 1 || self.initial_m > self.n {
            return Err(SimError::BadConfig(format!("initial m={}", self.initial_m)));
        }
        if let Some(c) = &self.initial_channels {
            if c.len() != self.n {
                return Err(SimError::BadConfig("initial channel vector length".into()));
            }
        }
        if self.frame_t == 0 || self.horizon < self.frame_t {
            return Err(SimError::BadConfig("need horizon >= frame_t >= 1".into()));
        }
        if let PolicyKind::FbdcTable = self.policy {
            if self.n != 2 {
                return Err(SimError::BadConfig("fbdc_table requires n=2".into()));
            }
        }
        self.arrivals.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimStats {
    pub avg_total_queue: f64,
    pub per_queue_throughput: Vec<f64>,
    /// Little's-law delay, time-average queue over the total arrival rate.
    pub avg_delay: f64,
    pub empirical_x: StateActionFrequencies,
    pub stable: bool,
    pub slope: f64,
    pub trajectory: Vec<(usize, u64)>,
    pub departures: Vec<u64>,
    /// Slots in which the server sat at a connected queue; departures can
    /// never exceed this.
    pub on_slots_at_server: u64,
}

/// Per-slot decision rule driven by the simulator. Implementations own any
/// visit state (gates, frame plans); a fresh value is built per run.
pub trait SlotPolicy {
    fn frame_start(&mut self, _frame_queues: &[u64]) {}
    fn decide(&mut self, s: &SaturatedState, queues: &[u64]) -> ActionId;
    fn served(&mut self, _queue: Option<usize>) {}
}

/// Replays a fixed action table every slot.
pub struct FixedTablePolicy(pub DeterministicPolicyTable);

impl SlotPolicy for FixedTablePolicy {
    fn decide(&mut self, s: &SaturatedState, _queues: &[u64]) -> ActionId {
        self.0.action_for(s)
    }
}

/// Replays a recorded action log slot by slot.
pub struct ReplayPolicy {
    pub log: Vec<ActionId>,
    pub at: usize,
}

impl SlotPolicy for ReplayPolicy {
    fn decide(&mut self, _s: &SaturatedState, _queues: &[u64]) -> ActionId {
        let a = self.log[self.at];
        self.at += 1;
        a
    }
}

struct FbdcLpPolicy {
    params: ChannelParams,
    n: usize,
    table: DeterministicPolicyTable,
}

impl SlotPolicy for FbdcLpPolicy {
    fn frame_start(&mut self, frame_queues: &[u64]) {
        self.table = policies::fbdc_plan(&self.params, self.n, frame_queues)
            .expect("state-action polytope LP is feasible");
    }
    fn decide(&mut self, s: &SaturatedState, _queues: &[u64]) -> ActionId {
        self.table.action_for(s)
    }
}

struct FbdcTablePolicy {
    params: ChannelParams,
    table: DeterministicPolicyTable,
}

impl SlotPolicy for FbdcTablePolicy {
    fn frame_start(&mut self, frame_queues: &[u64]) {
        let ratio = policies::queue_ratio(frame_queues[0] as f64, frame_queues[1] as f64);
        if frame_queues.iter().all(|&q| q == 0) {
            self.table = DeterministicPolicyTable::all_stay(2);
        } else {
            self.table = policies::fbdc_table_lookup(&self.params, ratio).1;
        }
    }
    fn decide(&mut self, s: &SaturatedState, _queues: &[u64]) -> ActionId {
        self.table.action_for(s)
    }
}

struct MyopicPolicy {
    params: ChannelParams,
    k: u32,
    frame_queues: Vec<f64>,
}

impl SlotPolicy for MyopicPolicy {
    fn frame_start(&mut self, frame_queues: &[u64]) {
        self.frame_queues = frame_queues.iter().map(|&q| q as f64).collect();
    }
    fn decide(&mut self, s: &SaturatedState, _queues: &[u64]) -> ActionId {
        let w = policies::myopic_weights(&self.params, &self.frame_queues, s, self.k)
            .expect("k >= 1 checked at build");
        policies::myopic_decide(&w, s.m)
    }
}

struct GreedyMyopicPolicy;

impl SlotPolicy for GreedyMyopicPolicy {
    fn decide(&mut self, s: &SaturatedState, _queues: &[u64]) -> ActionId {
        policies::greedy_myopic_decide(s)
    }
}

struct MaxWeightPolicy;

impl SlotPolicy for MaxWeightPolicy {
    fn decide(&mut self, s: &SaturatedState, queues: &[u64]) -> ActionId {
        policies::max_weight_decide(queues, &s.c, s.m)
    }
}

struct GatedPolicy {
    n: usize,
    last_m: Option<usize>,
    gate: u64,
}

impl SlotPolicy for GatedPolicy {
    fn decide(&mut self, s: &SaturatedState, queues: &[u64]) -> ActionId {
        if self.last_m != Some(s.m) {
            self.gate = queues[s.m - 1]; // snapshot on arrival
            self.last_m = Some(s.m);
        }
        policies::gated_decide(self.gate, s.m, self.n)
    }
    fn served(&mut self, queue: Option<usize>) {
        if queue.is_some() {
            self.gate = self.gate.saturating_sub(1);
        }
    }
}

struct ExhaustivePolicy {
    n: usize,
}

impl SlotPolicy for ExhaustivePolicy {
    fn decide(&mut self, s: &SaturatedState, queues: &[u64]) -> ActionId {
        policies::exhaustive_decide(queues[s.m - 1], s.m, self.n)
    }
}

pub fn build_policy(config: &SimConfig) -> Result<Box<dyn SlotPolicy>, SimError> {
    Ok(match config.policy {
        PolicyKind::FbdcLp => Box::new(FbdcLpPolicy {
            params: config.channel,
            n: config.n,
            table: DeterministicPolicyTable::all_stay(config.n),
        }),
        PolicyKind::FbdcTable => Box::new(FbdcTablePolicy {
            params: config.channel,
            table: DeterministicPolicyTable::all_stay(2),
        }),
        PolicyKind::Myopic(k) => {
            if k == 0 {
                return Err(SimError::Policy(PolicyError::ZeroLookahead));
            }
            Box::new(MyopicPolicy {
                params: config.channel,
                k,
                frame_queues: vec![0.0; config.n],
            })
        }
        PolicyKind::GreedyMyopic => Box::new(GreedyMyopicPolicy),
        PolicyKind::MaxWeight => Box::new(MaxWeightPolicy),
        PolicyKind::Gated => Box::new(GatedPolicy { n: config.n, last_m: None, gate: 0 }),
        PolicyKind::Exhaustive => Box::new(ExhaustivePolicy { n: config.n }),
    })
}

/// SplitMix64 finalizer; per-cell sweep seeds come from here.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_arrival<R: Rng>(spec: &ArrivalSpec, i: usize, rng: &mut R) -> u64 {
    match spec.kind {
        ArrivalKind::Bernoulli => u64::from(rng.gen::<f64>() < spec.rates[i]),
        ArrivalKind::Poisson => {
            if spec.rates[i] <= 0.0 {
                return 0;
            }
            let p = Poisson::new(spec.rates[i]).expect("positive rate");
            (p.sample(rng) as u64).min(spec.a_max as u64)
        }
    }
}

pub fn run(config: &SimConfig) -> Result<SimStats, SimError> {
    let mut policy = build_policy(config)?;
    run_with(config, policy.as_mut()).map(|(stats, _)| stats)
}

/// Run and also return the per-slot action log (for replay experiments).
pub fn run_logged(config: &SimConfig) -> Result<(SimStats, Vec<ActionId>), SimError> {
    let mut policy = build_policy(config)?;
    run_with(config, policy.as_mut())
}

/// Saturated departure-rate vector over the horizon.
pub fn run_saturated(config: &SimConfig) -> Result<Vec<f64>, SimError> {
    if !config.saturated {
        return Err(SimError::BadConfig("run_saturated needs saturated=true".into()));
    }
    let stats = run(config)?;
    Ok(stats.per_queue_throughput)
}

/// Core slot loop shared by every entry point.
pub fn run_with(
    config: &SimConfig,
    policy: &mut dyn SlotPolicy,
) -> Result<(SimStats, Vec<ActionId>), SimError> {
    config.validate()?;
    let n = config.n;
    let params = &config.channel;
    let mut channel_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x01));
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x02));

    let c0 = match &config.initial_channels {
        Some(c) => c.clone(),
        None => (0..n).map(|_| params.sample_steady(&mut channel_rng)).collect(),
    };
    let mut state = SaturatedState::new(config.initial_m, c0);
    let mut queues = config.initial_queues.clone();

    let mut counts = vec![0u64; mdp::num_state_actions(n)];
    let mut departures = vec![0u64; n];
    let mut on_slots_at_server = 0u64;
    let mut queue_area = 0u128;
    let mut trajectory = Vec::with_capacity(config.checkpoint_count + 2);
    let ckpt_every = (config.horizon / config.checkpoint_count).max(1);
    let mut log = Vec::with_capacity(config.horizon.min(1 << 22));

    for t in 0..config.horizon {
        if t % config.frame_t == 0 {
            let snapshot = if config.saturated { &config.initial_queues } else { &queues };
            policy.frame_start(snapshot);
        }
        let total_q: u64 = queues.iter().sum();
        queue_area += total_q as u128;
        if t % ckpt_every == 0 {
            trajectory.push((t, total_q));
        }

        let action = policy.decide(&state, &queues);
        debug_assert!(action.target() >= 1 && action.target() <= n);
        counts[mdp::var_index(state.index(), action.target(), n)] += 1;
        log.push(action);
        if state.c[state.m - 1] == 1 {
            on_slots_at_server += 1;
        }

        let mut served = None;
        if action.target() == state.m && state.c[state.m - 1] == 1 {
            let i = state.m - 1;
            if config.saturated {
                departures[i] += 1;
                served = Some(i);
            } else if queues[i] > 0 {
                queues[i] -= 1;
                departures[i] += 1;
                served = Some(i);
            }
        }
        policy.served(served);

        if !config.saturated {
            for i in 0..n {
                queues[i] += sample_arrival(&config.arrivals, i, &mut arrival_rng);
            }
        }
        for i in 0..n {
            state.c[i] = params.sample_step(state.c[i], &mut channel_rng);
        }
        state.m = action.target();
    }
    trajectory.push((config.horizon, queues.iter().sum()));

    let ts = config.horizon as f64;
    let avg_total_queue = queue_area as f64 / ts;
    let per_queue_throughput: Vec<f64> = departures.iter().map(|&d| d as f64 / ts).collect();
    let lambda_total: f64 = config.arrivals.rates.iter().sum();
    let avg_delay = if config.saturated || lambda_total <= 0.0 {
        0.0
    } else {
        avg_total_queue / lambda_total
    };
    let x: Vec<f64> = counts.iter().map(|&c| c as f64 / ts).collect();
    let (stable, slope) = classify_stability(&trajectory, config.horizon, &config.stability);

    Ok((
        SimStats {
            avg_total_queue,
            per_queue_throughput,
            avg_delay,
            empirical_x: StateActionFrequencies::new(n, x),
            stable: stable || config.saturated,
            slope,
            trajectory,
            departures,
            on_slots_at_server,
        },
        log,
    ))
}

/// Indicator averages of `(state index, action target)` pairs over the first
/// `window` entries; sums to one exactly (integer counts over the window).
pub fn empirical_frequencies(
    trace: &[(usize, usize)],
    window: usize,
    n: usize,
) -> Result<StateActionFrequencies, SimError> {
    if window == 0 || window > trace.len() {
        return Err(SimError::BadWindow);
    }
    let mut counts = vec![0u64; mdp::num_state_actions(n)];
    for &(s, a) in &trace[..window] {
        counts[mdp::var_index(s, a, n)] += 1;
    }
    Ok(StateActionFrequencies::new(
        n,
        counts.iter().map(|&c| c as f64 / window as f64).collect(),
    ))
}

/// Least-squares slope of total queue length over the last half of the
/// horizon. Stable iff the slope is within noise of zero and the final queue
/// level stays below `final_fraction * horizon`.
pub fn classify_stability(
    trajectory: &[(usize, u64)],
    horizon: usize,
    knobs: &StabilityKnobs,
) -> (bool, f64) {
    assert!(trajectory.len() >= 20, "need at least 20 checkpoints");
    let cut = horizon / 2;
    let pts: Vec<(f64, f64)> = trajectory
        .iter()
        .filter(|(t, _)| *t >= cut)
        .map(|&(t, q)| (t as f64, q as f64))
        .collect();
    let k = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_q = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_q)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let dof = (k - 2.0).max(1.0);
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - (mean_q + slope * (p.0 - mean_t))).powi(2))
        .sum();
    let stderr = if sxx > 0.0 { (sse / dof / sxx).sqrt() } else { 0.0 };

    let final_q = trajectory.last().map(|&(_, q)| q as f64).unwrap_or(0.0);
    let stable = slope <= knobs.slope_threshold.max(3.0 * stderr)
        && final_q <= knobs.final_fraction * horizon as f64;
    (stable, slope)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: usize,
    pub lambda: Vec<f64>,
    pub policy: PolicyKind,
    pub seed: u64,
    pub stats: SimStats,
}

/// Cartesian product of the arrival grid and the seed list, one independent
/// run per cell; cells run in parallel but rows come back in grid order.
pub fn sweep(
    grid: &[Vec<f64>],
    base: &SimConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>, SimError> {
    let mut cells: Vec<(usize, &Vec<f64>, u64)> = Vec::with_capacity(grid.len() * seeds.len());
    for lam in grid {
        for &s in seeds {
            cells.push((cells.len(), lam, s));
        }
    }
    let rows: Result<Vec<SweepRow>, SimError> = cells
        .par_iter()
        .map(|&(idx, lam, master)| {
            let mut config = base.clone();
            config.arrivals.rates = lam.clone();
            config.seed = derive_seed(master, idx as u64);
            let stats = run(&config)?;
            Ok(SweepRow { cell: idx, lambda: lam.clone(), policy: config.policy, seed: master, stats })
        })
        .collect();
    let mut rows = rows?;
    rows.sort_by_key(|r| r.cell);
    Ok(rows)
}
