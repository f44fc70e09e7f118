//! Sources of randomness for a protocol round.
//!
//! The round ladder in [`crate::protocol::run_round`] never touches an RNG
//! directly. Every random decision goes through a [`Driver`], which either
//! samples it (Monte Carlo) or branches on it (exact enumeration).

use crate::protocol::EngineError;
use crate::rational::Rational;

/// Where in the round a random decision is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrawSite {
    /// Alice's control-vs-message choice.
    ControlMode,
    /// Within control mode, measure-vs-send-back (modified variant only).
    ControlSplit,
    /// Eve's measurement outcomes.
    Eve,
    /// Alice's Bz measurement in control mode.
    Alice,
    /// Bob's Bz or Bell measurement.
    Bob,
}

pub trait Driver {
    /// A classical coin that lands `true` with exact probability `p_true`.
    fn coin(&mut self, site: DrawSite, p_true: &Rational) -> bool;

    /// Alice's message bit for this round.
    fn message_bit(&mut self) -> u8;

    /// Picks a measurement outcome according to Born probabilities. Outcomes
    /// with (numerically) zero probability are never selected.
    fn born(&mut self, site: DrawSite, probs: &[f64]) -> Result<usize, EngineError>;
}

/// Picks the outcome whose cumulative interval contains `u`, skipping
/// outcomes of negligible probability.
pub(crate) fn pick_by_uniform(probs: &[f64], u: f64) -> Result<usize, EngineError> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(EngineError::Integrity(format!("outcome probabilities sum to {total}")));
    }
    let mut acc = 0.0;
    let mut last_nonzero = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= crate::qubit::NORM_TOLERANCE {
            continue;
        }
        last_nonzero = Some(i);
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    last_nonzero.ok_or_else(|| EngineError::Integrity("no outcome has positive probability".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_pick_respects_intervals() {
        assert_eq!(pick_by_uniform(&[0.5, 0.5], 0.0).unwrap(), 0);
        assert_eq!(pick_by_uniform(&[0.5, 0.5], 0.4999).unwrap(), 0);
        assert_eq!(pick_by_uniform(&[0.5, 0.5], 0.5).unwrap(), 1);
        assert_eq!(pick_by_uniform(&[0.0, 1.0], 0.0).unwrap(), 1);
        // rounding slack at the top of the interval never lands on a zero outcome
        assert_eq!(pick_by_uniform(&[0.5, 0.5 - 1e-13, 0.0], 0.99999999999999).unwrap(), 1);
        assert!(pick_by_uniform(&[0.2, 0.2], 0.1).is_err());
    }
}
