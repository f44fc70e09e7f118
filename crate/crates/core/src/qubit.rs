//! One- and two-qubit state algebra.
//!
//! Pair states are ordered over `|b_B b_T>`: Bob's home qubit is the most
//! significant bit, the travel-slot qubit the least significant one. So the
//! amplitude vector reads `[|00>, |01>, |10>, |11>]`.
//!
//! Measurements come in two halves: a pure distribution query and a pure
//! collapse onto a chosen outcome. The sampling engine and the exhaustive
//! enumerator both go through the same pair.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

/// Tolerance for normalization checks and probability sums.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Default tolerance for phase-insensitive state comparison.
pub const PHASE_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ROOT_HALF: Complex64 = Complex64::new(FRAC_1_SQRT_2, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum QubitError {
    #[error("cannot collapse onto outcome {outcome} with probability {probability:e}")]
    ZeroProbability { outcome: &'static str, probability: f64 },
}

/// Which tensor factor of a [`PairState`] an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QubitSlot {
    HomeB,
    Travel,
}

impl QubitSlot {
    fn mask(self) -> usize {
        match self {
            QubitSlot::HomeB => 0b10,
            QubitSlot::Travel => 0b01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
        }
    }

    fn amplitudes(self) -> [Complex64; 4] {
        match self {
            BellOutcome::PsiPlus => [ZERO, ROOT_HALF, ROOT_HALF, ZERO],
            BellOutcome::PsiMinus => [ZERO, ROOT_HALF, -ROOT_HALF, ZERO],
            BellOutcome::PhiPlus => [ROOT_HALF, ZERO, ZERO, ROOT_HALF],
            BellOutcome::PhiMinus => [ROOT_HALF, ZERO, ZERO, -ROOT_HALF],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Single-qubit states used for substituted qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SingleKind {
    Zero,
    One,
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    amps: [Complex64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleState {
    amps: [Complex64; 2],
}

/// Common view over both state types.
pub trait Amplitudes {
    fn amplitudes(&self) -> &[Complex64];

    fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    fn max_imaginary(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }
}

impl Amplitudes for PairState {
    fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }
}

impl Amplitudes for SingleState {
    fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }
}

pub fn make_bell(label: BellOutcome) -> PairState {
    PairState {
        amps: label.amplitudes(),
    }
}

pub fn make_product(home: u8, travel: u8) -> PairState {
    let mut amps = [ZERO; 4];
    amps[(((home & 1) << 1) | (travel & 1)) as usize] = ONE;
    PairState { amps }
}

pub fn make_single(kind: SingleKind) -> SingleState {
    let amps = match kind {
        SingleKind::Zero => [ONE, ZERO],
        SingleKind::One => [ZERO, ONE],
        SingleKind::Plus => [ROOT_HALF, ROOT_HALF],
        SingleKind::Minus => [ROOT_HALF, -ROOT_HALF],
    };
    SingleState { amps }
}

impl PairState {
    /// Builds a state from raw amplitudes, renormalizing. Returns `None` for
    /// the zero vector.
    pub fn from_amplitudes(amps: [Complex64; 4]) -> Option<Self> {
        normalize(&amps).map(|amps| PairState { amps })
    }

    pub fn amps(&self) -> [Complex64; 4] {
        self.amps
    }
}

impl SingleState {
    pub fn from_amplitudes(amps: [Complex64; 2]) -> Option<Self> {
        normalize(&amps).map(|amps| SingleState { amps })
    }

    pub fn amps(&self) -> [Complex64; 2] {
        self.amps
    }
}

fn normalize<const N: usize>(amps: &[Complex64; N]) -> Option<[Complex64; N]> {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut out = *amps;
    for a in &mut out {
        *a /= norm;
    }
    Some(out)
}

/// Pauli-Z on one qubit of a pair: negates every amplitude whose targeted
/// bit is 1.
pub fn apply_z(state: &PairState, slot: QubitSlot) -> PairState {
    let mask = slot.mask();
    let mut amps = state.amps;
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask != 0 {
            *a = -*a;
        }
    }
    PairState { amps }
}

pub fn apply_z_single(state: &SingleState) -> SingleState {
    SingleState {
        amps: [state.amps[0], -state.amps[1]],
    }
}

/// Probabilities `(p0, p1)` of a computational-basis measurement on `slot`.
pub fn z_distribution(state: &PairState, slot: QubitSlot) -> (f64, f64) {
    let mask = slot.mask();
    let p1: f64 = state
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let p0: f64 = state
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask == 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    (p0, p1)
}

pub fn collapse_z(state: &PairState, slot: QubitSlot, outcome: u8) -> Result<PairState, QubitError> {
    let mask = slot.mask();
    let keep = |i: usize| ((i & mask != 0) as u8) == (outcome & 1);
    let mut amps = state.amps;
    for (i, a) in amps.iter_mut().enumerate() {
        if !keep(i) {
            *a = ZERO;
        }
    }
    let (p0, p1) = z_distribution(state, slot);
    let probability = if outcome & 1 == 0 { p0 } else { p1 };
    if probability <= NORM_TOLERANCE {
        return Err(QubitError::ZeroProbability {
            outcome: if outcome & 1 == 0 { "z=0" } else { "z=1" },
            probability,
        });
    }
    let scale = probability.sqrt();
    for a in &mut amps {
        *a /= scale;
    }
    Ok(PairState { amps })
}

pub fn z_distribution_single(state: &SingleState) -> (f64, f64) {
    (state.amps[0].norm_sqr(), state.amps[1].norm_sqr())
}

pub fn collapse_z_single(state: &SingleState, outcome: u8) -> Result<SingleState, QubitError> {
    let (p0, p1) = z_distribution_single(state);
    let (probability, label) = if outcome & 1 == 0 { (p0, "z=0") } else { (p1, "z=1") };
    if probability <= NORM_TOLERANCE {
        return Err(QubitError::ZeroProbability {
            outcome: label,
            probability,
        });
    }
    Ok(make_single(if outcome & 1 == 0 {
        SingleKind::Zero
    } else {
        SingleKind::One
    }))
}

/// Bell-basis coefficients `<beta|state>` in [`BellOutcome::ALL`] order.
pub fn bell_coefficients(state: &PairState) -> [Complex64; 4] {
    BellOutcome::ALL.map(|b| {
        b.amplitudes()
            .iter()
            .zip(state.amps.iter())
            .map(|(basis, amp)| basis.conj() * amp)
            .sum()
    })
}

/// Inverse of [`bell_coefficients`].
pub fn from_bell_coefficients(coeffs: &[Complex64; 4]) -> [Complex64; 4] {
    let mut amps = [ZERO; 4];
    for (c, b) in coeffs.iter().zip(BellOutcome::ALL) {
        for (slot, basis) in amps.iter_mut().zip(b.amplitudes()) {
            *slot += c * basis;
        }
    }
    amps
}

/// Outcome probabilities of a Bell measurement, indexed by
/// [`BellOutcome::index`].
pub fn bell_distribution(state: &PairState) -> [f64; 4] {
    bell_coefficients(state).map(|c| c.norm_sqr())
}

pub fn collapse_bell(state: &PairState, outcome: BellOutcome) -> Result<PairState, QubitError> {
    let probability = bell_distribution(state)[outcome.index()];
    if probability <= NORM_TOLERANCE {
        return Err(QubitError::ZeroProbability {
            outcome: outcome.label(),
            probability,
        });
    }
    Ok(make_bell(outcome))
}

/// Probabilities `(p_plus, p_minus)` of a measurement in the `|+>, |->` basis.
pub fn x_distribution(state: &SingleState) -> (f64, f64) {
    let [a, b] = state.amps;
    let plus = (a + b) * FRAC_1_SQRT_2;
    let minus = (a - b) * FRAC_1_SQRT_2;
    (plus.norm_sqr(), minus.norm_sqr())
}

/// Collapse in the X basis; outcome 0 is `|+>`, outcome 1 is `|->`.
pub fn collapse_x(state: &SingleState, outcome: u8) -> Result<SingleState, QubitError> {
    let (pp, pm) = x_distribution(state);
    let (probability, label, kind) = if outcome & 1 == 0 {
        (pp, "x=+", SingleKind::Plus)
    } else {
        (pm, "x=-", SingleKind::Minus)
    };
    if probability <= NORM_TOLERANCE {
        return Err(QubitError::ZeroProbability {
            outcome: label,
            probability,
        });
    }
    Ok(make_single(kind))
}

/// True when some unit scalar `lambda` gives `||a - lambda b|| <= tol`.
pub fn equal_up_to_global_phase<S: Amplitudes>(a: &S, b: &S, tol: f64) -> bool {
    let (xs, ys) = (a.amplitudes(), b.amplitudes());
    if xs.len() != ys.len() {
        return false;
    }
    let overlap: Complex64 = ys.iter().zip(xs).map(|(y, x)| y.conj() * x).sum();
    let lambda = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    let dist_sqr: f64 = xs.iter().zip(ys).map(|(x, y)| (x - lambda * y).norm_sqr()).sum();
    dist_sqr.sqrt() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const R: f64 = FRAC_1_SQRT_2;

    fn re(amps: &[Complex64]) -> Vec<f64> {
        amps.iter().map(|a| a.re).collect()
    }

    #[test]
    fn bell_constructors_follow_sign_convention() {
        assert_eq!(re(&make_bell(BellOutcome::PsiPlus).amps), vec![0.0, R, R, 0.0]);
        assert_eq!(re(&make_bell(BellOutcome::PsiMinus).amps), vec![0.0, R, -R, 0.0]);
        assert_eq!(re(&make_bell(BellOutcome::PhiPlus).amps), vec![R, 0.0, 0.0, R]);
        assert_eq!(re(&make_bell(BellOutcome::PhiMinus).amps), vec![R, 0.0, 0.0, -R]);
        for b in BellOutcome::ALL {
            assert!(make_bell(b).is_normalized(NORM_TOLERANCE));
        }
    }

    #[test]
    fn basis_ordering_puts_home_qubit_first() {
        assert_eq!(re(&make_product(0, 1).amps), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(re(&make_product(1, 0).amps), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(z_distribution(&make_product(0, 1), QubitSlot::HomeB), (1.0, 0.0));
        assert_eq!(z_distribution(&make_product(0, 1), QubitSlot::Travel), (0.0, 1.0));
    }

    #[test]
    fn single_constructors() {
        assert_eq!(re(&make_single(SingleKind::Plus).amps), vec![R, R]);
        assert_eq!(re(&make_single(SingleKind::One).amps), vec![0.0, 1.0]);
        assert_eq!(re(&make_single(SingleKind::Minus).amps), vec![R, -R]);
    }

    #[test]
    fn z_on_travel_maps_psi_plus_to_psi_minus() {
        let s = apply_z(&make_bell(BellOutcome::PsiPlus), QubitSlot::Travel);
        let psi_minus = make_bell(BellOutcome::PsiMinus);
        assert!(equal_up_to_global_phase(&s, &psi_minus, PHASE_TOLERANCE));
        assert!(!equal_up_to_global_phase(
            &make_bell(BellOutcome::PsiPlus),
            &psi_minus,
            PHASE_TOLERANCE
        ));
    }

    #[test]
    fn z_single_maps_plus_to_minus() {
        let s = apply_z_single(&make_single(SingleKind::Plus));
        assert!(equal_up_to_global_phase(
            &s,
            &make_single(SingleKind::Minus),
            PHASE_TOLERANCE
        ));
        let (pp, pm) = x_distribution(&s);
        assert!(pp.abs() < NORM_TOLERANCE && (pm - 1.0).abs() < NORM_TOLERANCE);
    }

    #[test]
    fn global_phase_equality() {
        let psi_minus = make_bell(BellOutcome::PsiMinus);
        let negated = PairState {
            amps: psi_minus.amps.map(|a| -a),
        };
        assert!(equal_up_to_global_phase(&psi_minus, &negated, PHASE_TOLERANCE));
        let rotated = PairState {
            amps: psi_minus.amps.map(|a| a * Complex64::from_polar(1.0, 0.7)),
        };
        assert!(equal_up_to_global_phase(&psi_minus, &rotated, PHASE_TOLERANCE));
    }

    #[test]
    fn z_measurement_on_psi_plus() {
        let psi = make_bell(BellOutcome::PsiPlus);
        let (p0, p1) = z_distribution(&psi, QubitSlot::Travel);
        assert!((p0 - 0.5).abs() < NORM_TOLERANCE && (p1 - 0.5).abs() < NORM_TOLERANCE);
        let collapsed = collapse_z(&psi, QubitSlot::Travel, 1).unwrap();
        assert!(equal_up_to_global_phase(
            &collapsed,
            &make_product(0, 1),
            PHASE_TOLERANCE
        ));
    }

    #[test]
    fn collapse_onto_impossible_outcome_fails() {
        let s = make_product(0, 1);
        assert!(collapse_z(&s, QubitSlot::HomeB, 1).is_err());
        assert!(collapse_bell(&make_bell(BellOutcome::PsiMinus), BellOutcome::PsiPlus).is_err());
        assert!(collapse_x(&make_single(SingleKind::Minus), 0).is_err());
        assert!(collapse_z_single(&make_single(SingleKind::One), 0).is_err());
    }

    #[test]
    fn bell_distributions() {
        let close = |a: [f64; 4], b: [f64; 4]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= NORM_TOLERANCE);
        assert!(close(
            bell_distribution(&make_bell(BellOutcome::PsiMinus)),
            [0.0, 1.0, 0.0, 0.0]
        ));
        assert!(close(bell_distribution(&make_product(0, 1)), [0.5, 0.5, 0.0, 0.0]));
        assert!(close(bell_distribution(&make_product(0, 0)), [0.0, 0.0, 0.5, 0.5]));
        assert_eq!(
            collapse_bell(&make_product(0, 1), BellOutcome::PsiMinus).unwrap(),
            make_bell(BellOutcome::PsiMinus)
        );
    }

    #[test]
    fn x_distributions() {
        let (p, m) = x_distribution(&make_single(SingleKind::Minus));
        assert!(p.abs() < NORM_TOLERANCE && (m - 1.0).abs() < NORM_TOLERANCE);
        let (p, m) = x_distribution(&make_single(SingleKind::Zero));
        assert!((p - 0.5).abs() < NORM_TOLERANCE && (m - 0.5).abs() < NORM_TOLERANCE);
    }

    fn arb_pair() -> impl Strategy<Value = PairState> {
        prop::array::uniform8(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
            PairState::from_amplitudes([
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
                Complex64::new(v[4], v[5]),
                Complex64::new(v[6], v[7]),
            ])
            .filter(|s| s.amps.iter().any(|a| a.norm() > 1e-3))
        })
    }

    fn arb_single() -> impl Strategy<Value = SingleState> {
        prop::array::uniform4(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
            SingleState::from_amplitudes([Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])])
        })
    }

    fn arb_slot() -> impl Strategy<Value = QubitSlot> {
        prop_oneof![Just(QubitSlot::HomeB), Just(QubitSlot::Travel)]
    }

    proptest! {
        #[test]
        fn z_is_an_exact_involution(s in arb_pair(), slot in arb_slot()) {
            let twice = apply_z(&apply_z(&s, slot), slot);
            prop_assert_eq!(twice, s);
            prop_assert!(apply_z(&s, slot).is_normalized(NORM_TOLERANCE));
        }

        #[test]
        fn distributions_are_normalized(s in arb_pair(), slot in arb_slot(), q in arb_single()) {
            let (p0, p1) = z_distribution(&s, slot);
            prop_assert!((p0 + p1 - 1.0).abs() <= NORM_TOLERANCE);
            prop_assert!((0.0..=1.0 + NORM_TOLERANCE).contains(&p0));
            let bell = bell_distribution(&s);
            prop_assert!((bell.iter().sum::<f64>() - 1.0).abs() <= NORM_TOLERANCE);
            prop_assert!(bell.iter().all(|p| (0.0..=1.0 + NORM_TOLERANCE).contains(p)));
            let (pp, pm) = x_distribution(&q);
            prop_assert!((pp + pm - 1.0).abs() <= NORM_TOLERANCE);
        }

        #[test]
        fn repeat_measurement_is_stable(s in arb_pair(), slot in arb_slot()) {
            let (p0, _) = z_distribution(&s, slot);
            let outcome = if p0 >= 0.5 { 0 } else { 1 };
            let collapsed = collapse_z(&s, slot, outcome).unwrap();
            prop_assert!(collapsed.is_normalized(NORM_TOLERANCE));
            let (q0, q1) = z_distribution(&collapsed, slot);
            let again = if outcome == 0 { q0 } else { q1 };
            prop_assert!((again - 1.0).abs() <= NORM_TOLERANCE);
        }

        #[test]
        fn bell_basis_is_complete(s in arb_pair()) {
            let rebuilt = from_bell_coefficients(&bell_coefficients(&s));
            for (a, b) in rebuilt.iter().zip(s.amps.iter()) {
                prop_assert!((a - b).norm() <= NORM_TOLERANCE);
            }
        }

        #[test]
        fn x_collapse_is_normalized(q in arb_single()) {
            let (pp, _) = x_distribution(&q);
            let c = collapse_x(&q, if pp >= 0.5 { 0 } else { 1 }).unwrap();
            prop_assert!(c.is_normalized(NORM_TOLERANCE));
            prop_assert!(apply_z_single(&c).is_normalized(NORM_TOLERANCE));
        }
    }

    #[test]
    fn psi_states_anticorrelate_under_paired_z() {
        for b in [BellOutcome::PsiPlus, BellOutcome::PsiMinus] {
            for o in 0..2u8 {
                let c = collapse_z(&make_bell(b), QubitSlot::Travel, o).unwrap();
                let (h0, h1) = z_distribution(&c, QubitSlot::HomeB);
                let p_other = if o == 0 { h1 } else { h0 };
                assert!((p_other - 1.0).abs() <= NORM_TOLERANCE);
            }
        }
    }
}
