//! Channel adversaries.
//!
//! Eve sits on the quantum channel and gets a hook at each transit of the
//! travel qubit. Hooks only see what Eve could physically see: the public
//! announcements so far and any qubit of her own that is in flight. She never
//! reads amplitudes of the entangled pair; she acts on it through
//! [`apply_action`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::driver::{DrawSite, Driver};
use crate::protocol::{Announcement, EngineError, Operation};
use crate::qubit::{
    apply_z, apply_z_single, collapse_z, collapse_z_single, make_single, x_distribution, z_distribution,
    z_distribution_single, PairState, QubitSlot, SingleKind, SingleState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStrategy {
    /// Honest channel.
    None,
    /// Bz measurement on every qubit Bob sends to Alice.
    ForwardMeasure,
    /// Bz measurement on every qubit Alice returns to Bob.
    ReturnMeasure,
    /// Keeps Bob's travel qubit, sends Alice a fresh `|+>`, reads Alice's
    /// encoding off it in the X basis and replays it onto the kept qubit.
    InterceptSubstitute,
    /// Delays the returning qubit until Alice publicly says what she did.
    HoldUntilAnnounce,
}

impl AttackStrategy {
    pub const ALL: [AttackStrategy; 5] = [
        AttackStrategy::None,
        AttackStrategy::ForwardMeasure,
        AttackStrategy::ReturnMeasure,
        AttackStrategy::InterceptSubstitute,
        AttackStrategy::HoldUntilAnnounce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackStrategy::None => "none",
            AttackStrategy::ForwardMeasure => "forward-measure",
            AttackStrategy::ReturnMeasure => "return-measure",
            AttackStrategy::InterceptSubstitute => "intercept-substitute",
            AttackStrategy::HoldUntilAnnounce => "hold-until-announce",
        }
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown attack strategy {0:?} (expected one of: none, forward-measure, return-measure, intercept-substitute, hold-until-announce)")]
pub struct UnknownStrategy(pub String);

impl FromStr for AttackStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackStrategy::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transit {
    Forward,
    Return,
}

/// Which physical qubit is travelling between Bob and Alice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Occupant {
    /// The travel half of Bob's pair.
    PairTravel,
    /// A fresh qubit Eve injected in its place.
    Fresh,
}

/// Everything Eve may look at when deciding on an action.
#[derive(Debug, Clone, Copy)]
pub struct ChannelView<'a> {
    pub transit: Transit,
    pub occupant: Occupant,
    /// Eve's own injected qubit, when that is what is in transit.
    pub fresh: Option<&'a SingleState>,
    pub holding: bool,
    pub announcements: &'a [Announcement],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelAction {
    Pass,
    MeasureZThenForward,
    /// Keep the travel qubit and send a fresh one of the given kind instead.
    SubstituteFresh(SingleKind),
    /// Shorthand for `SubstituteFresh(SingleKind::Plus)`.
    CaptureAndInject,
    /// Apply `Z^bit` to the kept travel qubit and forward it in place of
    /// whatever came back.
    ReEncodeAndForward(u8),
    Hold,
    ForwardHeld,
}

impl ChannelAction {
    pub fn label(self) -> String {
        match self {
            ChannelAction::Pass => "pass".into(),
            ChannelAction::MeasureZThenForward => "measure-z".into(),
            ChannelAction::SubstituteFresh(kind) => format!("substitute-{}", kind_label(kind)),
            ChannelAction::CaptureAndInject => "capture-inject".into(),
            ChannelAction::ReEncodeAndForward(b) => format!("re-encode-{b}"),
            ChannelAction::Hold => "hold".into(),
            ChannelAction::ForwardHeld => "forward-held".into(),
        }
    }
}

fn kind_label(kind: SingleKind) -> &'static str {
    match kind {
        SingleKind::Zero => "0",
        SingleKind::One => "1",
        SingleKind::Plus => "plus",
        SingleKind::Minus => "minus",
    }
}

/// Physical custody of the qubits in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Registers {
    /// Bob's home qubit and the original travel qubit.
    pub pair: PairState,
    /// Eve's injected qubit, while it is in play.
    pub fresh: Option<SingleState>,
    /// Eve is keeping the pair's travel qubit.
    pub travel_captured: bool,
    /// Eve is delaying the returning qubit.
    pub held: bool,
}

impl Registers {
    pub fn new(pair: PairState) -> Self {
        Registers {
            pair,
            fresh: None,
            travel_captured: false,
            held: false,
        }
    }

    pub fn occupant(&self) -> Occupant {
        if self.travel_captured && self.fresh.is_some() {
            Occupant::Fresh
        } else {
            Occupant::PairTravel
        }
    }

    pub fn view<'a>(&'a self, transit: Transit, announcements: &'a [Announcement]) -> ChannelView<'a> {
        let occupant = self.occupant();
        ChannelView {
            transit,
            occupant,
            fresh: match occupant {
                Occupant::Fresh => self.fresh.as_ref(),
                Occupant::PairTravel => None,
            },
            holding: self.held,
            announcements,
        }
    }
}

/// What Eve did and saw at one transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub action: ChannelAction,
    pub bit: Option<u8>,
}

pub fn on_forward(
    strategy: AttackStrategy,
    _view: &ChannelView<'_>,
    _driver: &mut dyn Driver,
) -> Result<ChannelAction, EngineError> {
    Ok(match strategy {
        AttackStrategy::None | AttackStrategy::ReturnMeasure | AttackStrategy::HoldUntilAnnounce => ChannelAction::Pass,
        AttackStrategy::ForwardMeasure => ChannelAction::MeasureZThenForward,
        AttackStrategy::InterceptSubstitute => ChannelAction::CaptureAndInject,
    })
}

pub fn on_return(
    strategy: AttackStrategy,
    view: &ChannelView<'_>,
    driver: &mut dyn Driver,
) -> Result<ChannelAction, EngineError> {
    Ok(match strategy {
        AttackStrategy::None | AttackStrategy::ForwardMeasure => ChannelAction::Pass,
        AttackStrategy::ReturnMeasure => ChannelAction::MeasureZThenForward,
        AttackStrategy::InterceptSubstitute => match view.fresh {
            Some(fresh) => {
                let (plus, minus) = x_distribution(fresh);
                let bit = driver.born(DrawSite::Eve, &[plus, minus])? as u8;
                ChannelAction::ReEncodeAndForward(bit)
            }
            None => ChannelAction::Pass,
        },
        AttackStrategy::HoldUntilAnnounce => {
            let announced = view.announcements.iter().rev().find_map(|a| match a {
                Announcement::AliceOperation(op) => Some(*op),
                _ => None,
            });
            match announced {
                None => ChannelAction::Hold,
                Some(Operation::SentBackUnencoded) if view.holding => ChannelAction::ForwardHeld,
                Some(Operation::SentBackUnencoded) => ChannelAction::Pass,
                Some(Operation::Encoded) => ChannelAction::MeasureZThenForward,
            }
        }
    })
}

/// Carries out `action` on the registers.
pub fn apply_action(
    action: ChannelAction,
    transit: Transit,
    regs: &mut Registers,
    driver: &mut dyn Driver,
) -> Result<EveRecord, EngineError> {
    let illegal = |why: &str| {
        Err(EngineError::Integrity(format!(
            "{} is illegal on {:?} transit: {why}",
            action.label(),
            transit
        )))
    };
    let mut bit = None;
    match action {
        ChannelAction::Pass => {
            if regs.held {
                return illegal("a held qubit must be released with forward-held");
            }
        }
        ChannelAction::MeasureZThenForward => {
            match regs.occupant() {
                Occupant::PairTravel => {
                    let (p0, p1) = z_distribution(&regs.pair, QubitSlot::Travel);
                    let outcome = driver.born(DrawSite::Eve, &[p0, p1])? as u8;
                    regs.pair = collapse_z(&regs.pair, QubitSlot::Travel, outcome)?;
                    bit = Some(outcome);
                }
                Occupant::Fresh => {
                    let fresh = regs.fresh.as_ref().expect("fresh occupant present");
                    let (p0, p1) = z_distribution_single(fresh);
                    let outcome = driver.born(DrawSite::Eve, &[p0, p1])? as u8;
                    regs.fresh = Some(collapse_z_single(fresh, outcome)?);
                    bit = Some(outcome);
                }
            }
            regs.held = false;
        }
        ChannelAction::SubstituteFresh(_) | ChannelAction::CaptureAndInject => {
            if transit != Transit::Forward {
                return illegal("substitution happens on the way to Alice");
            }
            if regs.travel_captured || regs.held {
                return illegal("the travel qubit is already in Eve's custody");
            }
            let kind = match action {
                ChannelAction::SubstituteFresh(kind) => kind,
                _ => SingleKind::Plus,
            };
            regs.travel_captured = true;
            regs.fresh = Some(make_single(kind));
        }
        ChannelAction::ReEncodeAndForward(b) => {
            if transit != Transit::Return || !regs.travel_captured {
                return illegal("needs a captured travel qubit on the return trip");
            }
            if b & 1 == 1 {
                regs.pair = apply_z(&regs.pair, QubitSlot::Travel);
            }
            regs.fresh = None;
            regs.travel_captured = false;
            regs.held = false;
            bit = Some(b & 1);
        }
        ChannelAction::Hold => {
            if transit != Transit::Return {
                return illegal("only a returning qubit can be held");
            }
            if regs.held {
                return illegal("already holding");
            }
            regs.held = true;
        }
        ChannelAction::ForwardHeld => {
            if !regs.held {
                return illegal("nothing is held");
            }
            regs.held = false;
        }
    }
    Ok(EveRecord { action, bit })
}

/// Alice's local operation on whatever qubit she received.
pub(crate) fn alice_encode(regs: &mut Registers, bit: u8) {
    if bit & 1 == 0 {
        return;
    }
    match regs.occupant() {
        Occupant::PairTravel => regs.pair = apply_z(&regs.pair, QubitSlot::Travel),
        Occupant::Fresh => {
            if let Some(f) = regs.fresh.as_mut() {
                *f = apply_z_single(f);
            }
        }
    }
}
