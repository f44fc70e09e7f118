//! Simulation and exact analysis of the ping-pong quantum communication
//! protocol under channel attacks.
//!
//! * [`qubit`]: one- and two-qubit state algebra.
//! * [`protocol`]: the round state machine, original and modified variants.
//! * [`adversary`]: Eve's strategies and her hooks on the quantum channel.
//! * [`oracle`]: exhaustive enumeration of a round with exact probabilities.
//! * [`harness`]: reproducible Monte Carlo runs.
//! * [`render`] and [`cli`]: machine-readable output and the command line.

pub mod adversary;
pub mod cli;
pub mod driver;
pub mod harness;
pub mod oracle;
pub mod protocol;
pub mod qubit;
pub mod rational;
pub mod render;

pub use adversary::AttackStrategy;
pub use harness::{run_simulation, BitSource, RunConfig, RunStats};
pub use oracle::{attack_report, enumerate_round, AttackReport, BitChoice, ExactDistribution};
pub use protocol::{run_round, ProtocolConfig, RoundRecord, Variant};
pub use rational::Rational;
