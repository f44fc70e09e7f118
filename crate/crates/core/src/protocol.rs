//! The ping-pong round state machine.
//!
//! One round runs, in order:
//!
//! 1. Bob prepares `|psi+>`, keeps the home qubit and sends the travel qubit.
//! 2. Forward transit (Eve's forward hook).
//! 3. Alice picks a mode.
//! 4. Control-measure: Alice measures Bz and announces the result, Bob
//!    measures his home qubit in Bz, coincidence means an intruder.
//! 5. Message / control-send-back: Alice encodes (or not) and returns the
//!    qubit. Return transit (Eve's return hook, which sees all announcements
//!    so far). In the modified variant Bob acknowledges receipt when the
//!    qubit actually arrives, then Alice announces her operation. Bob
//!    Bell-measures and decodes, or checks for `|psi->` after a send-back.
//!
//! A qubit the adversary never releases stalls the round: nobody can make
//! progress without it, and the communication is aborted.
//!
//! Random draws happen in a fixed order: mode coin, control-split coin,
//! message bit, then measurement outcomes in the order they physically occur
//! (Eve, Alice, Bob).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::adversary::{
    alice_encode, apply_action, on_forward, on_return, AttackStrategy, ChannelAction, EveRecord, Occupant, Registers,
    Transit,
};
use crate::driver::{DrawSite, Driver};
use crate::qubit::{
    apply_z, bell_distribution, collapse_bell, collapse_z, collapse_z_single, make_bell, z_distribution,
    z_distribution_single, Amplitudes, BellOutcome, PairState, QubitError, QubitSlot,
};
use crate::rational::{Rational, RationalError};

/// Norm drift beyond which a round is aborted as corrupted.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("state norm drifted by {drift:e} after {stage}")]
    NormDrift { stage: &'static str, drift: f64 },
    #[error("protocol integrity violation: {0}")]
    Integrity(String),
    #[error(transparent)]
    Qubit(#[from] QubitError),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: String },
    #[error("unknown protocol variant {0:?} (expected original or modified)")]
    UnknownVariant(String),
    #[error("invalid run configuration: {0}")]
    InvalidRun(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Original,
    Modified,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Modified => "modified",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "modified" => Ok(Variant::Modified),
            other => Err(ConfigError::UnknownVariant(other.to_string())),
        }
    }
}

/// Protocol parameters.
///
/// `control_prob` is Alice's rate of control rounds. Every detection figure
/// of interest is a probability *conditional* on the round type, so this rate
/// only scales per-round figures. `sendback_split` is the share of control
/// rounds in which the modified variant still measures in Bz; the remaining
/// control rounds send the qubit back unencoded. The original variant
/// ignores `sendback_split` and `receipt_enabled`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub control_prob: Rational,
    pub sendback_split: Rational,
    pub receipt_enabled: bool,
    /// Count a `|phi+->` outcome in a checked round as a detection.
    pub phi_counts_as_detection: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            variant: Variant::Original,
            control_prob: Rational::half(),
            sendback_split: Rational::half(),
            receipt_enabled: true,
            phi_counts_as_detection: true,
        }
    }
}

impl ProtocolConfig {
    pub fn original(control_prob: Rational) -> Self {
        ProtocolConfig {
            control_prob,
            ..Default::default()
        }
    }

    pub fn modified(control_prob: Rational, sendback_split: Rational, receipt_enabled: bool) -> Self {
        ProtocolConfig {
            variant: Variant::Modified,
            control_prob,
            sendback_split,
            receipt_enabled,
            phi_counts_as_detection: true,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("control_prob", &self.control_prob), ("c0", &self.sendback_split)] {
            if !value.is_probability() {
                return Err(ConfigError::ProbabilityOutOfRange {
                    name,
                    value: value.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Whether Alice waits for Bob's receipt before announcing.
    pub fn receipt_in_effect(&self) -> bool {
        self.variant == Variant::Modified && self.receipt_enabled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Message,
    ControlMeasure,
    ControlSendBack,
}

impl ModeKind {
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Message => "message",
            ModeKind::ControlMeasure => "control-measure",
            ModeKind::ControlSendBack => "control-sendback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundMode {
    Message(u8),
    ControlMeasure,
    ControlSendBack,
}

impl RoundMode {
    pub fn kind(self) -> ModeKind {
        match self {
            RoundMode::Message(_) => ModeKind::Message,
            RoundMode::ControlMeasure => ModeKind::ControlMeasure,
            RoundMode::ControlSendBack => ModeKind::ControlSendBack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Encoded,
    SentBackUnencoded,
}

/// Events on the authenticated classical channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Announcement {
    BobReceipt,
    AliceControl(u8),
    AliceOperation(Operation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decoded {
    Bit(u8),
    Anomaly,
}

impl Decoded {
    pub fn label(self) -> &'static str {
        match self {
            Decoded::Bit(0) => "0",
            Decoded::Bit(_) => "1",
            Decoded::Anomaly => "anomaly",
        }
    }
}

/// Transcript of one protocol round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round_index: u64,
    pub mode: RoundMode,
    pub alice_bit: Option<u8>,
    /// Alice's Bz result in a control-measure round.
    pub alice_result: Option<u8>,
    /// Bob's Bz result in a control-measure round.
    pub bob_result: Option<u8>,
    pub bell_outcome: Option<BellOutcome>,
    pub decoded: Option<Decoded>,
    pub detected: bool,
    pub stalled: bool,
    pub eve: Vec<EveRecord>,
    pub announcements: Vec<Announcement>,
}

impl RoundRecord {
    fn new(round_index: u64, mode: RoundMode) -> Self {
        RoundRecord {
            round_index,
            mode,
            alice_bit: match mode {
                RoundMode::Message(b) => Some(b),
                _ => None,
            },
            alice_result: None,
            bob_result: None,
            bell_outcome: None,
            decoded: None,
            detected: false,
            stalled: false,
            eve: Vec::new(),
            announcements: Vec::new(),
        }
    }

    /// The last bit Eve observed this round, if any.
    pub fn eve_bit(&self) -> Option<u8> {
        self.eve.iter().rev().find_map(|r| r.bit)
    }

    /// Eve's non-trivial actions joined with `+`, or `pass`.
    pub fn eve_action_label(&self) -> String {
        let acts: Vec<String> = self
            .eve
            .iter()
            .filter(|r| r.action != ChannelAction::Pass)
            .map(|r| r.action.label())
            .collect();
        if acts.is_empty() {
            "pass".to_string()
        } else {
            acts.join("+")
        }
    }
}

fn mode_from_coins(variant: Variant, control: bool, measure: bool, bit: impl FnOnce() -> u8) -> RoundMode {
    if !control {
        return RoundMode::Message(bit());
    }
    match variant {
        Variant::Original => RoundMode::ControlMeasure,
        Variant::Modified if measure => RoundMode::ControlMeasure,
        Variant::Modified => RoundMode::ControlSendBack,
    }
}

/// Alice's mode choice from two uniform draws. A message round is returned
/// with bit 0; the actual bit comes from the bit source.
pub fn choose_mode(config: &ProtocolConfig, u1: f64, u2: f64) -> RoundMode {
    let control = u1 < config.control_prob.to_f64();
    let measure = u2 < config.sendback_split.to_f64();
    mode_from_coins(config.variant, control, measure, || 0)
}

fn draw_mode(config: &ProtocolConfig, driver: &mut dyn Driver) -> RoundMode {
    let control = driver.coin(DrawSite::ControlMode, &config.control_prob);
    let measure =
        control && config.variant == Variant::Modified && driver.coin(DrawSite::ControlSplit, &config.sendback_split);
    mode_from_coins(config.variant, control, measure, || driver.message_bit())
}

/// Alice's encoding: identity for 0, Z on the travel qubit for 1.
pub fn encode(state: &PairState, bit: u8) -> PairState {
    if bit & 1 == 1 {
        apply_z(state, QubitSlot::Travel)
    } else {
        *state
    }
}

pub fn decode(outcome: BellOutcome) -> Decoded {
    match outcome {
        BellOutcome::PsiPlus => Decoded::Bit(0),
        BellOutcome::PsiMinus => Decoded::Bit(1),
        BellOutcome::PhiPlus | BellOutcome::PhiMinus => Decoded::Anomaly,
    }
}

/// `|psi+>` gives anticorrelated Bz results, so equal results mean tampering.
pub fn coincidence_check(alice_result: u8, bob_result: u8) -> bool {
    alice_result == bob_result
}

/// After an unencoded send-back Bob must find `|psi+>`.
pub fn sendback_check(outcome: BellOutcome, phi_counts: bool) -> bool {
    match outcome {
        BellOutcome::PsiPlus => false,
        BellOutcome::PsiMinus => true,
        BellOutcome::PhiPlus | BellOutcome::PhiMinus => phi_counts,
    }
}

fn check_norm(regs: &Registers, stage: &'static str) -> Result<(), EngineError> {
    let mut drift = (regs.pair.norm_sqr() - 1.0).abs();
    if let Some(f) = &regs.fresh {
        drift = drift.max((f.norm_sqr() - 1.0).abs());
    }
    if drift > NORM_DRIFT_LIMIT {
        return Err(EngineError::NormDrift { stage, drift });
    }
    Ok(())
}

fn eve_acts(
    strategy: AttackStrategy,
    transit: Transit,
    regs: &mut Registers,
    announcements: &[Announcement],
    driver: &mut dyn Driver,
) -> Result<EveRecord, EngineError> {
    let action = {
        let view = regs.view(transit, announcements);
        match transit {
            Transit::Forward => on_forward(strategy, &view, driver)?,
            Transit::Return => on_return(strategy, &view, driver)?,
        }
    };
    apply_action(action, transit, regs, driver)
}

/// Runs one full round. All randomness comes from `driver`.
pub fn run_round(
    config: &ProtocolConfig,
    strategy: AttackStrategy,
    round_index: u64,
    driver: &mut dyn Driver,
) -> Result<RoundRecord, EngineError> {
    let mut regs = Registers::new(make_bell(BellOutcome::PsiPlus));
    let mut announcements = Vec::new();
    let mut eve = Vec::new();

    eve.push(eve_acts(strategy, Transit::Forward, &mut regs, &announcements, driver)?);
    check_norm(&regs, "forward transit")?;

    let mode = draw_mode(config, driver);
    let mut rec = RoundRecord::new(round_index, mode);

    match mode {
        RoundMode::ControlMeasure => {
            let alice = alice_measures_z(&mut regs, driver)?;
            announcements.push(Announcement::AliceControl(alice));
            let (p0, p1) = z_distribution(&regs.pair, QubitSlot::HomeB);
            let bob = driver.born(DrawSite::Bob, &[p0, p1])? as u8;
            regs.pair = collapse_z(&regs.pair, QubitSlot::HomeB, bob)?;
            check_norm(&regs, "control measurement")?;
            rec.alice_result = Some(alice);
            rec.bob_result = Some(bob);
            rec.detected = coincidence_check(alice, bob);
        }
        RoundMode::Message(_) | RoundMode::ControlSendBack => {
            let operation = match mode {
                RoundMode::Message(bit) => {
                    alice_encode(&mut regs, bit);
                    Operation::Encoded
                }
                _ => Operation::SentBackUnencoded,
            };
            eve.push(eve_acts(strategy, Transit::Return, &mut regs, &announcements, driver)?);
            check_norm(&regs, "return transit")?;

            let modified = config.variant == Variant::Modified;
            if regs.held {
                // Without an announcement to wait for, or with Alice waiting
                // on a receipt that cannot come, the round cannot progress.
                if !modified || config.receipt_in_effect() {
                    rec.stalled = true;
                } else {
                    announcements.push(Announcement::AliceOperation(operation));
                    eve.push(eve_acts(strategy, Transit::Return, &mut regs, &announcements, driver)?);
                    check_norm(&regs, "delayed return transit")?;
                    rec.stalled = regs.held;
                }
            } else {
                if config.receipt_in_effect() {
                    announcements.push(Announcement::BobReceipt);
                }
                if modified {
                    announcements.push(Announcement::AliceOperation(operation));
                }
            }

            if !rec.stalled {
                if regs.occupant() != Occupant::PairTravel || regs.travel_captured {
                    return Err(EngineError::Integrity(
                        "Bob received a qubit that is not the travel half of his pair".into(),
                    ));
                }
                let probs = bell_distribution(&regs.pair);
                let outcome = BellOutcome::ALL[driver.born(DrawSite::Bob, &probs)?];
                regs.pair = collapse_bell(&regs.pair, outcome)?;
                check_norm(&regs, "Bell measurement")?;
                rec.bell_outcome = Some(outcome);
                match mode {
                    RoundMode::Message(_) => rec.decoded = Some(decode(outcome)),
                    _ => rec.detected = sendback_check(outcome, config.phi_counts_as_detection),
                }
            }
        }
    }

    rec.eve = eve;
    rec.announcements = announcements;
    Ok(rec)
}

fn alice_measures_z(regs: &mut Registers, driver: &mut dyn Driver) -> Result<u8, EngineError> {
    match regs.occupant() {
        Occupant::PairTravel => {
            let (p0, p1) = z_distribution(&regs.pair, QubitSlot::Travel);
            let r = driver.born(DrawSite::Alice, &[p0, p1])? as u8;
            regs.pair = collapse_z(&regs.pair, QubitSlot::Travel, r)?;
            Ok(r)
        }
        Occupant::Fresh => {
            let fresh = regs
                .fresh
                .as_ref()
                .ok_or_else(|| EngineError::Integrity("missing injected qubit".into()))?;
            let (p0, p1) = z_distribution_single(fresh);
            let r = driver.born(DrawSite::Alice, &[p0, p1])? as u8;
            regs.fresh = Some(collapse_z_single(fresh, r)?);
            Ok(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{equal_up_to_global_phase, make_product, PHASE_TOLERANCE};

    /// Scripted driver: fixed coins and bit, Born outcomes from a queue.
    struct Scripted {
        control: bool,
        measure: bool,
        bit: u8,
        outcomes: Vec<usize>,
    }

    impl Driver for Scripted {
        fn coin(&mut self, site: DrawSite, _: &Rational) -> bool {
            match site {
                DrawSite::ControlMode => self.control,
                _ => self.measure,
            }
        }
        fn message_bit(&mut self) -> u8 {
            self.bit
        }
        fn born(&mut self, _: DrawSite, probs: &[f64]) -> Result<usize, EngineError> {
            let k = if self.outcomes.is_empty() {
                0
            } else {
                self.outcomes.remove(0)
            };
            if probs[k] <= 1e-12 {
                return Err(EngineError::Integrity(format!("scripted outcome {k} impossible")));
            }
            Ok(k)
        }
    }

    fn message(bit: u8, outcomes: Vec<usize>) -> Scripted {
        Scripted {
            control: false,
            measure: false,
            bit,
            outcomes,
        }
    }

    #[test]
    fn mode_choice() {
        let original = ProtocolConfig::original(Rational::half());
        assert_eq!(choose_mode(&original, 0.2, 0.99), RoundMode::ControlMeasure);
        assert_eq!(choose_mode(&original, 0.7, 0.0), RoundMode::Message(0));
        let modified = ProtocolConfig::modified(Rational::half(), Rational::new(3, 10), true);
        assert_eq!(choose_mode(&modified, 0.1, 0.9), RoundMode::ControlSendBack);
        assert_eq!(choose_mode(&modified, 0.1, 0.2), RoundMode::ControlMeasure);
        let never = ProtocolConfig::modified(Rational::zero(), Rational::half(), true);
        assert_eq!(choose_mode(&never, 0.0, 0.0), RoundMode::Message(0));
    }

    #[test]
    fn encoding() {
        let psi_plus = make_bell(BellOutcome::PsiPlus);
        assert!(equal_up_to_global_phase(
            &encode(&psi_plus, 1),
            &make_bell(BellOutcome::PsiMinus),
            PHASE_TOLERANCE
        ));
        assert_eq!(encode(&psi_plus, 0), psi_plus);
        let product = make_product(0, 1);
        assert!(equal_up_to_global_phase(
            &encode(&product, 1),
            &product,
            PHASE_TOLERANCE
        ));
    }

    #[test]
    fn checks() {
        assert_eq!(decode(BellOutcome::PsiMinus), Decoded::Bit(1));
        assert_eq!(decode(BellOutcome::PsiPlus), Decoded::Bit(0));
        assert_eq!(decode(BellOutcome::PhiPlus), Decoded::Anomaly);
        assert!(!coincidence_check(0, 1));
        assert!(coincidence_check(1, 1));
        assert!(coincidence_check(0, 0));
        assert!(sendback_check(BellOutcome::PsiMinus, false));
        assert!(!sendback_check(BellOutcome::PsiPlus, true));
        assert!(sendback_check(BellOutcome::PhiPlus, true));
        assert!(!sendback_check(BellOutcome::PhiMinus, false));
    }

    #[test]
    fn honest_message_round_decodes() {
        let cfg = ProtocolConfig::default();
        let rec = run_round(&cfg, AttackStrategy::None, 3, &mut message(1, vec![1])).unwrap();
        assert_eq!(rec.round_index, 3);
        assert_eq!(rec.decoded, Some(Decoded::Bit(1)));
        assert!(!rec.detected && !rec.stalled);
        assert_eq!(rec.eve_action_label(), "pass");
    }

    #[test]
    fn return_measure_yields_either_psi() {
        let cfg = ProtocolConfig::default();
        for bit in 0..2 {
            for (eve, bob) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let rec = run_round(
                    &cfg,
                    AttackStrategy::ReturnMeasure,
                    0,
                    &mut message(bit, vec![eve, bob]),
                )
                .unwrap();
                assert_eq!(rec.decoded, Some(Decoded::Bit(bob as u8)));
                assert_eq!(rec.eve_bit(), Some(eve as u8));
                assert!(!rec.detected);
            }
        }
    }

    #[test]
    fn held_qubit_stalls_when_receipt_is_required() {
        let cfg = ProtocolConfig::modified(Rational::half(), Rational::half(), true);
        let mut d = Scripted {
            control: true,
            measure: false,
            bit: 0,
            outcomes: vec![],
        };
        let rec = run_round(&cfg, AttackStrategy::HoldUntilAnnounce, 0, &mut d).unwrap();
        assert_eq!(rec.mode, RoundMode::ControlSendBack);
        assert!(rec.stalled);
        assert!(rec.bell_outcome.is_none());
        assert!(rec.announcements.is_empty());
    }

    #[test]
    fn held_qubit_is_forwarded_after_announcement_without_receipt() {
        let cfg = ProtocolConfig::modified(Rational::half(), Rational::half(), false);
        let mut d = Scripted {
            control: true,
            measure: false,
            bit: 0,
            outcomes: vec![0],
        };
        let rec = run_round(&cfg, AttackStrategy::HoldUntilAnnounce, 0, &mut d).unwrap();
        assert!(!rec.stalled && !rec.detected);
        assert_eq!(rec.bell_outcome, Some(BellOutcome::PsiPlus));
        assert_eq!(rec.eve_action_label(), "hold+forward-held");
    }

    #[test]
    fn receipt_precedes_operation_announcement() {
        let cfg = ProtocolConfig::modified(Rational::half(), Rational::half(), true);
        let rec = run_round(&cfg, AttackStrategy::None, 0, &mut message(0, vec![0])).unwrap();
        assert_eq!(
            rec.announcements,
            vec![
                Announcement::BobReceipt,
                Announcement::AliceOperation(Operation::Encoded)
            ]
        );
    }

    #[test]
    fn control_round_with_intercepted_qubit() {
        let cfg = ProtocolConfig::default();
        // Alice reads 0 off the fresh |+>, Bob reads 0 off his home qubit.
        let mut d = Scripted {
            control: true,
            measure: true,
            bit: 0,
            outcomes: vec![0, 0],
        };
        let rec = run_round(&cfg, AttackStrategy::InterceptSubstitute, 0, &mut d).unwrap();
        assert!(rec.detected);
        assert_eq!(rec.announcements, vec![Announcement::AliceControl(0)]);
    }
}
