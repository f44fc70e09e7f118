//! Exact analysis of a single round.
//!
//! [`enumerate_round`] walks every branch of [`run_round`] by replaying it
//! with a driver that, instead of sampling, follows a prescribed path through
//! the decision tree and records the weight of each choice. Classical
//! choices carry their exact rational weight; Born probabilities coming out
//! of the state algebra are snapped onto dyadic rationals (all of them are
//! 0, 1/2 or 1 here). The result is an exact outcome list whose weights sum
//! to exactly one.

use crate::adversary::AttackStrategy;
use crate::driver::{DrawSite, Driver};
use crate::protocol::{run_round, ConfigError, Decoded, EngineError, ModeKind, ProtocolConfig, RoundRecord};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InfoError {
    #[error("joint distribution has a negative or non-finite entry")]
    NegativeEntry,
    #[error("joint distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("contingency table is empty")]
    EmptyCounts,
}

/// How Alice's message bit is chosen during enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitChoice {
    Zero,
    One,
    Uniform,
}

/// Mutually exclusive round outcomes with exact probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub outcomes: Vec<(Rational, RoundRecord)>,
}

impl ExactDistribution {
    pub fn total(&self) -> Rational {
        self.outcomes.iter().map(|(p, _)| p).sum()
    }

    /// Probability of the event `pred`.
    pub fn probability(&self, pred: impl Fn(&RoundRecord) -> bool) -> Rational {
        self.outcomes.iter().filter(|(_, r)| pred(r)).map(|(p, _)| p).sum()
    }

    /// `P(event | given)`, or `None` when `given` has probability zero.
    pub fn conditional(
        &self,
        event: impl Fn(&RoundRecord) -> bool,
        given: impl Fn(&RoundRecord) -> bool,
    ) -> Option<Rational> {
        let denom = self.probability(&given);
        if denom.is_zero() {
            return None;
        }
        Some(self.probability(|r| given(r) && event(r)) / denom)
    }
}

struct Level {
    chosen: usize,
    weights: Vec<Rational>,
}

struct Enumerator {
    bit: BitChoice,
    prefix: Vec<usize>,
    trail: Vec<Level>,
    weight: Rational,
}

impl Enumerator {
    fn branch(&mut self, weights: Vec<Rational>) -> usize {
        let depth = self.trail.len();
        let chosen = if depth < self.prefix.len() {
            self.prefix[depth]
        } else {
            weights
                .iter()
                .position(|w| !w.is_zero())
                .expect("a choice point always has a branch of positive weight")
        };
        self.weight = &self.weight * &weights[chosen];
        self.trail.push(Level { chosen, weights });
        chosen
    }

    /// Moves to the next unexplored leaf. Returns false when done.
    fn advance(&mut self) -> bool {
        while let Some(level) = self.trail.pop() {
            let next = (level.chosen + 1..level.weights.len()).find(|&i| !level.weights[i].is_zero());
            if let Some(next) = next {
                self.prefix = self.trail.iter().map(|l| l.chosen).collect();
                self.prefix.push(next);
                self.trail.clear();
                self.weight = Rational::one();
                return true;
            }
        }
        false
    }
}

impl Driver for Enumerator {
    fn coin(&mut self, _site: DrawSite, p_true: &Rational) -> bool {
        self.branch(vec![p_true.clone(), p_true.complement()]) == 0
    }

    fn message_bit(&mut self) -> u8 {
        match self.bit {
            BitChoice::Zero => 0,
            BitChoice::One => 1,
            BitChoice::Uniform => self.branch(vec![Rational::half(), Rational::half()]) as u8,
        }
    }

    fn born(&mut self, _site: DrawSite, probs: &[f64]) -> Result<usize, EngineError> {
        let weights = probs
            .iter()
            .map(|&p| Rational::from_born(p))
            .collect::<Result<Vec<_>, _>>()?;
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(EngineError::Integrity(format!(
                "Born probabilities snap to a total of {total}"
            )));
        }
        Ok(self.branch(weights))
    }
}

/// Every outcome of one round with its exact probability.
pub fn enumerate_round(
    config: &ProtocolConfig,
    strategy: AttackStrategy,
    bit: BitChoice,
) -> Result<ExactDistribution, OracleError> {
    config.validate()?;
    let mut e = Enumerator {
        bit,
        prefix: Vec::new(),
        trail: Vec::new(),
        weight: Rational::one(),
    };
    let mut outcomes = Vec::new();
    loop {
        let record = run_round(config, strategy, 0, &mut e)?;
        outcomes.push((e.weight.clone(), record));
        if !e.advance() {
            break;
        }
    }
    let dist = ExactDistribution { outcomes };
    let total = dist.total();
    if !total.is_one() {
        return Err(EngineError::Integrity(format!("branch probabilities sum to {total}")).into());
    }
    Ok(dist)
}

/// Exact per-round figures for one (protocol, strategy) pair, with
/// uniformly random message bits.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub message_probability: Rational,
    pub control_measure_probability: Rational,
    pub control_sendback_probability: Rational,
    /// Probability that a round ends in detection.
    pub per_round_detection: Rational,
    pub conditional_detection_control_measure: Option<Rational>,
    pub conditional_detection_sendback: Option<Rational>,
    pub stall_probability: Rational,
    pub conditional_stall_message: Option<Rational>,
    pub conditional_stall_sendback: Option<Rational>,
    /// `P(alice = a, bob = b)` over message rounds that decode to a bit.
    pub message_joint: Option<[[Rational; 2]; 2]>,
    /// `P(decoded bit != alice bit | message round)`.
    pub message_ber: Option<Rational>,
    pub message_anomaly: Option<Rational>,
    /// `P(alice = a, eve = e)` over message rounds in which Eve saw a bit.
    pub eve_joint: Option<[[Rational; 2]; 2]>,
    pub eve_agreement: Option<Rational>,
    /// `I(A;B)` in bits; zero when Bob never decodes a bit.
    pub mi_ab_bits: f64,
    /// `I(A;E)` in bits; zero when Eve never sees a bit.
    pub mi_ae_bits: f64,
    /// Mean of the geometric waiting time, `1 / per_round_detection`.
    pub expected_rounds_to_detection: Option<Rational>,
}

fn is_mode(kind: ModeKind) -> impl Fn(&RoundRecord) -> bool {
    move |r| r.mode.kind() == kind
}

fn joint_table(dist: &ExactDistribution, observe: impl Fn(&RoundRecord) -> Option<u8>) -> Option<[[Rational; 2]; 2]> {
    let in_scope = |r: &RoundRecord| r.mode.kind() == ModeKind::Message && observe(r).is_some();
    let mass = dist.probability(in_scope);
    if mass.is_zero() {
        return None;
    }
    let cell = |a: u8, b: u8| {
        dist.probability(|r| in_scope(r) && r.alice_bit == Some(a) && observe(r) == Some(b)) / mass.clone()
    };
    Some([[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]])
}

fn joint_to_f64(joint: &[[Rational; 2]; 2]) -> [[f64; 2]; 2] {
    joint.clone().map(|row| row.map(|p| p.to_f64()))
}

fn decoded_bit(r: &RoundRecord) -> Option<u8> {
    match r.decoded {
        Some(Decoded::Bit(b)) => Some(b),
        _ => None,
    }
}

pub fn attack_report(config: &ProtocolConfig, strategy: AttackStrategy) -> Result<AttackReport, OracleError> {
    let dist = enumerate_round(config, strategy, BitChoice::Uniform)?;
    let message = is_mode(ModeKind::Message);
    let measure = is_mode(ModeKind::ControlMeasure);
    let sendback = is_mode(ModeKind::ControlSendBack);

    let per_round_detection = dist.probability(|r| r.detected);
    let message_joint = joint_table(&dist, decoded_bit);
    let eve_joint = joint_table(&dist, |r| r.eve_bit());
    let mi = |j: &Option<[[Rational; 2]; 2]>| -> Result<f64, OracleError> {
        match j {
            Some(j) => mutual_information(&joint_to_f64(j)).map_err(|e| EngineError::Integrity(e.to_string()).into()),
            None => Ok(0.0),
        }
    };
    let mi_ab_bits = mi(&message_joint)?;
    let mi_ae_bits = mi(&eve_joint)?;
    let eve_agreement = dist.conditional(|r| r.eve_bit() == r.alice_bit, |r| message(r) && r.eve_bit().is_some());

    Ok(AttackReport {
        message_probability: dist.probability(&message),
        control_measure_probability: dist.probability(&measure),
        control_sendback_probability: dist.probability(&sendback),
        conditional_detection_control_measure: dist.conditional(|r| r.detected, &measure),
        conditional_detection_sendback: dist.conditional(|r| r.detected, &sendback),
        stall_probability: dist.probability(|r| r.stalled),
        conditional_stall_message: dist.conditional(|r| r.stalled, &message),
        conditional_stall_sendback: dist.conditional(|r| r.stalled, &sendback),
        message_ber: dist.conditional(|r| decoded_bit(r).is_some_and(|b| Some(b) != r.alice_bit), &message),
        message_anomaly: dist.conditional(|r| r.decoded == Some(Decoded::Anomaly), &message),
        message_joint,
        eve_joint,
        eve_agreement,
        mi_ab_bits,
        mi_ae_bits,
        expected_rounds_to_detection: per_round_detection.recip(),
        per_round_detection,
    })
}

/// `I = sum p(a,b) log2(p(a,b) / (p(a) p(b)))` with `0 log 0 = 0`.
pub fn mutual_information(joint: &[[f64; 2]; 2]) -> Result<f64, InfoError> {
    let cells = joint.iter().flatten();
    if cells.clone().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(InfoError::NegativeEntry);
    }
    let total: f64 = cells.sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(InfoError::NotNormalized(total));
    }
    let row = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let col = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut info = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let p = joint[a][b];
            if p > 0.0 {
                info += p * (p / (row[a] * col[b])).log2();
            }
        }
    }
    Ok(info.clamp(0.0, 1.0))
}
