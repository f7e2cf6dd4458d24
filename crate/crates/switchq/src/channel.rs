//! Gilbert-Elliot ON/OFF channel model: per-slot sampling, steady state, and
//! k-step conditional ON-probability prediction.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("transition probability {name}={value} outside (0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("symmetric parameter epsilon={0} outside (0, 0.5]")]
    BadEpsilon(f64),
    #[error("prediction horizon k must be >= 1")]
    ZeroHorizon,
}

/// Transition probabilities of the two-state Markov channel.
///
/// `p01` is OFF→ON per slot, `p10` is ON→OFF per slot. Both must lie in
/// (0, 1]: a zero probability makes a channel state absorbing, which breaks
/// the weakly-communicating assumption the MDP layer relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    p01: f64,
    p10: f64,
}

impl ChannelParams {
    pub fn new(p01: f64, p10: f64) -> Result<Self, ChannelError> {
        if !(p01 > 0.0 && p01 <= 1.0) {
            return Err(ChannelError::BadProbability { name: "p01", value: p01 });
        }
        if !(p10 > 0.0 && p10 <= 1.0) {
            return Err(ChannelError::BadProbability { name: "p10", value: p10 });
        }
        Ok(Self { p01, p10 })
    }

    /// Symmetric channel with p01 = p10 = epsilon, 0 < epsilon <= 0.5.
    pub fn symmetric(epsilon: f64) -> Result<Self, ChannelError> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(ChannelError::BadEpsilon(epsilon));
        }
        Ok(Self { p01: epsilon, p10: epsilon })
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn is_symmetric(&self) -> bool {
        self.p01 == self.p10
    }

    /// Positively correlated over time (the channel has usable memory).
    pub fn is_positively_correlated(&self) -> bool {
        self.p01 + self.p10 < 1.0
    }

    /// Memoryless: the next state is independent of the current one.
    pub fn is_iid(&self) -> bool {
        (self.p01 + self.p10 - 1.0).abs() <= 1e-12
    }

    /// Stationary probability of the ON state, p01/(p01+p10).
    pub fn steady_state_on(&self) -> f64 {
        self.p01 / (self.p01 + self.p10)
    }

    /// Second-largest eigenvalue of the transition matrix, 1 - p01 - p10.
    pub fn memory_factor(&self) -> f64 {
        1.0 - self.p01 - self.p10
    }

    /// P(C(t+k) = 1 | C(t) = current) for k >= 1, in closed form:
    /// pi1 + (current - pi1) * (1 - p01 - p10)^k.
    pub fn predict_on(&self, current: u8, k: u32) -> Result<f64, ChannelError> {
        if k == 0 {
            return Err(ChannelError::ZeroHorizon);
        }
        debug_assert!(current <= 1);
        let pi1 = self.steady_state_on();
        Ok(pi1 + (current as f64 - pi1) * self.memory_factor().powi(k as i32))
    }

    /// Advance one slot; consumes exactly one uniform draw from `rng`.
    pub fn sample_step<R: Rng + ?Sized>(&self, current: u8, rng: &mut R) -> u8 {
        let p_on = if current == 1 { 1.0 - self.p10 } else { self.p01 };
        u8::from(rng.gen::<f64>() < p_on)
    }

    /// Draw an initial state from the stationary distribution.
    pub fn sample_steady<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        u8::from(rng.gen::<f64>() < self.steady_state_on())
    }
}
