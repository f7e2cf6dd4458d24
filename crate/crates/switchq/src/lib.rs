//! Throughput-optimal scheduling of a single server over N parallel queues
//! with Gilbert-Elliot (Markov ON/OFF) connectivity and a one-slot switchover
//! delay.
//!
//! The crate computes the saturated-system rate region via a state-action
//! frequency LP and via closed forms, runs frame-based dynamic control (FBDC),
//! k-lookahead myopic, greedy myopic, Max-Weight and gated/exhaustive policies
//! in a slotted Monte-Carlo simulator, and cross-checks the LP machinery
//! against a brute-force enumeration of stationary-deterministic policies.

pub mod channel;
pub mod lp;
pub mod mdp;
pub mod oracle;
pub mod policies;
pub mod region;
pub mod sim;

pub use channel::ChannelParams;
pub use mdp::{ActionId, DeterministicPolicyTable, Polytope, SaturatedState, StateActionFrequencies};
pub use policies::PolicyKind;
pub use region::RateRegion;
pub use sim::{SimConfig, SimStats};
