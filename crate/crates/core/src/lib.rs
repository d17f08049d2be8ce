//! Analytical throughput engine and online channel-allocation search for
//! WiFi 7 multi-link (MLO) networks.
//!
//! The crate is organised around the pipeline that turns a physical network
//! into a learning problem:
//!
//! - [`channel`] — topology generation, path loss, Rayleigh fading, SINR and
//!   the SINR-to-rate table.
//! - [`csma`] — per-channel carrier-sensing graphs, feasible-state
//!   (independent-set) enumeration, and the reversible-Markov stationary
//!   distribution that yields per-link and network throughput.
//! - [`arms`] — the decision space: per-station MLO configurations, the
//!   allocation/arm encoding, the stochastic bandit environment, and the
//!   exhaustive/greedy search references.
//! - [`bandit`] — the layered Monte Carlo search tree with EB-TC child
//!   selection and the GLR layer stopping rule, plus UCT, DNG-MCTS and
//!   random baselines.
//! - [`bounds`] — executable sample-complexity and error-probability
//!   formulas for the search algorithm.

pub mod arms;
pub mod bandit;
pub mod bounds;
pub mod channel;
pub mod csma;
mod error;
pub mod seeding;

pub use error::{Error, Result};
