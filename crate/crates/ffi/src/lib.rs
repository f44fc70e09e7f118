//! C ABI over `pingpong`.
//!
//! Every entry point returns a [`PpStatus`]. Objects are handed out as
//! opaque pointers and must be released with the matching `*_free`
//! function; strings returned through `char **` are released with
//! [`pp_string_free`]. After a non-`Ok` status, [`pp_last_error`] describes
//! what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pingpong::harness::SampledDriver;
use pingpong::oracle::AttackReport;
use pingpong::protocol::{Decoded, ModeKind};
use pingpong::{render, run_round, AttackStrategy, ProtocolConfig, Rational, RunConfig, RunStats, Variant};
use serde_json::{json, Value};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Rejected configuration or argument.
    InvalidArgument = 2,
    /// The engine hit an internal invariant violation.
    Engine = 3,
    /// The requested figure is undefined for this configuration.
    NotAvailable = 4,
    /// An exact value does not fit in 64-bit integers.
    Overflow = 5,
    /// The session already ended with a stalled round.
    SessionEnded = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpVariant {
    Original = 0,
    Modified = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStrategy {
    None = 0,
    ForwardMeasure = 1,
    ReturnMeasure = 2,
    InterceptSubstitute = 3,
    HoldUntilAnnounce = 4,
}

impl From<PpStrategy> for AttackStrategy {
    fn from(s: PpStrategy) -> Self {
        match s {
            PpStrategy::None => AttackStrategy::None,
            PpStrategy::ForwardMeasure => AttackStrategy::ForwardMeasure,
            PpStrategy::ReturnMeasure => AttackStrategy::ReturnMeasure,
            PpStrategy::InterceptSubstitute => AttackStrategy::InterceptSubstitute,
            PpStrategy::HoldUntilAnnounce => AttackStrategy::HoldUntilAnnounce,
        }
    }
}

/// Protocol parameters. Probabilities are exact fractions `num / den`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PpProtocol {
    pub variant: PpVariant,
    pub control_num: u32,
    pub control_den: u32,
    /// Share of control rounds that measure (modified variant).
    pub c0_num: u32,
    pub c0_den: u32,
    pub receipt_enabled: bool,
}

/// Figures available from a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpReportField {
    PerRoundDetection = 0,
    ConditionalDetectionControlMeasure = 1,
    ConditionalDetectionSendback = 2,
    StallProbability = 3,
    ConditionalStallMessage = 4,
    ConditionalStallSendback = 5,
    MessageProbability = 6,
    ControlMeasureProbability = 7,
    ControlSendbackProbability = 8,
    MessageBer = 9,
    MessageAnomaly = 10,
    EveAgreement = 11,
    ExpectedRoundsToDetection = 12,
}

/// Raw counters of a run or session.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PpCounts {
    pub rounds_executed: u64,
    pub message_rounds: u64,
    pub control_measure_rounds: u64,
    pub control_sendback_rounds: u64,
    pub bit_errors: u64,
    pub anomalies: u64,
    pub detections: u64,
    pub stalls: u64,
    /// 1-based; 0 when nothing was detected.
    pub first_detection_round: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpMode {
    Message = 0,
    ControlMeasure = 1,
    ControlSendback = 2,
}

/// Outcome of one stepped round. Bits are -1 when absent; `decoded` is -2
/// for an anomalous Bell outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PpRound {
    pub round_index: u64,
    pub mode: PpMode,
    pub alice_bit: i32,
    pub decoded: i32,
    pub eve_bit: i32,
    pub detected: bool,
    pub stalled: bool,
}

/// Exact per-round analysis.
pub struct PpReport {
    config: ProtocolConfig,
    strategy: AttackStrategy,
    report: AttackReport,
}

/// Counters of a finished run.
pub struct PpStats {
    config: Value,
    stats: RunStats,
}

/// A run advanced one round at a time.
pub struct PpSession {
    config: ProtocolConfig,
    strategy: AttackStrategy,
    seed: u64,
    next_round: u64,
    ended: bool,
    stats: RunStats,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: PpStatus, msg: impl Into<String>) -> PpStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`PpStatus::Panic`].
fn guard(f: impl FnOnce() -> PpStatus) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(PpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn fraction(name: &str, num: u32, den: u32) -> Result<Rational, PpStatus> {
    if den == 0 {
        return Err(fail(PpStatus::InvalidArgument, format!("{name}: zero denominator")));
    }
    Ok(Rational::new(num.into(), den.into()))
}

fn protocol_from(p: &PpProtocol) -> Result<ProtocolConfig, PpStatus> {
    let variant = match p.variant {
        PpVariant::Original => Variant::Original,
        PpVariant::Modified => Variant::Modified,
    };
    let config = ProtocolConfig {
        variant,
        control_prob: fraction("control probability", p.control_num, p.control_den)?,
        sendback_split: fraction("c0", p.c0_num, p.c0_den)?,
        receipt_enabled: p.receipt_enabled,
        phi_counts_as_detection: true,
    };
    config
        .validate()
        .map_err(|e| fail(PpStatus::InvalidArgument, e.to_string()))?;
    Ok(config)
}

fn echo(config: &ProtocolConfig, strategy: AttackStrategy) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("variant".into(), json!(config.variant.name()));
    m.insert("attack".into(), json!(strategy.name()));
    m.insert("control_prob".into(), json!(config.control_prob.to_string()));
    m.insert("c0".into(), json!(config.sendback_split.to_string()));
    let receipt = if config.receipt_enabled { "on" } else { "off" };
    m.insert("receipt".into(), json!(receipt));
    m
}

fn field(report: &AttackReport, f: PpReportField) -> Option<&Rational> {
    use PpReportField::*;
    match f {
        PerRoundDetection => Some(&report.per_round_detection),
        ConditionalDetectionControlMeasure => report.conditional_detection_control_measure.as_ref(),
        ConditionalDetectionSendback => report.conditional_detection_sendback.as_ref(),
        StallProbability => Some(&report.stall_probability),
        ConditionalStallMessage => report.conditional_stall_message.as_ref(),
        ConditionalStallSendback => report.conditional_stall_sendback.as_ref(),
        MessageProbability => Some(&report.message_probability),
        ControlMeasureProbability => Some(&report.control_measure_probability),
        ControlSendbackProbability => Some(&report.control_sendback_probability),
        MessageBer => report.message_ber.as_ref(),
        MessageAnomaly => report.message_anomaly.as_ref(),
        EveAgreement => report.eve_agreement.as_ref(),
        ExpectedRoundsToDetection => report.expected_rounds_to_detection.as_ref(),
    }
}

unsafe fn write_string(text: String, out: *mut *mut c_char) -> PpStatus {
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            PpStatus::Ok
        }
        Err(_) => fail(PpStatus::Engine, "output contained a NUL byte"),
    }
}

fn counts(stats: &RunStats) -> PpCounts {
    PpCounts {
        rounds_executed: stats.rounds_executed,
        message_rounds: stats.message_rounds,
        control_measure_rounds: stats.control_measure_rounds,
        control_sendback_rounds: stats.control_sendback_rounds,
        bit_errors: stats.bit_errors,
        anomalies: stats.anomalies,
        detections: stats.detections,
        stalls: stats.stalls,
        first_detection_round: stats.first_detection_round.unwrap_or(0),
    }
}

/// Description of the last failure on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Computes the exact report for `protocol` under `strategy`.
///
/// # Safety
/// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_report_new(
    protocol: *const PpProtocol,
    strategy: PpStrategy,
    out: *mut *mut PpReport,
) -> PpStatus {
    guard(|| {
        if protocol.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let config = match protocol_from(&*protocol) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let strategy = AttackStrategy::from(strategy);
        match pingpong::attack_report(&config, strategy) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(PpReport {
                    config,
                    strategy,
                    report,
                }));
                PpStatus::Ok
            }
            Err(e) => fail(PpStatus::Engine, e.to_string()),
        }
    })
}

/// Reads one figure as a double.
///
/// # Safety
/// `report` must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_report_get(report: *const PpReport, which: PpReportField, value: *mut f64) -> PpStatus {
    guard(|| {
        if report.is_null() || value.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        match field(&(*report).report, which) {
            Some(r) => {
                *value = r.to_f64();
                PpStatus::Ok
            }
            None => fail(
                PpStatus::NotAvailable,
                format!("{which:?} is undefined for this configuration"),
            ),
        }
    })
}

/// Reads one figure as an exact fraction in lowest terms.
///
/// # Safety
/// `report` must be live; `num` and `den` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_report_get_exact(
    report: *const PpReport,
    which: PpReportField,
    num: *mut i64,
    den: *mut i64,
) -> PpStatus {
    guard(|| {
        if report.is_null() || num.is_null() || den.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let Some(r) = field(&(*report).report, which) else {
            return fail(
                PpStatus::NotAvailable,
                format!("{which:?} is undefined for this configuration"),
            );
        };
        match r.to_i64_parts() {
            Some((n, d)) => {
                *num = n;
                *den = d;
                PpStatus::Ok
            }
            None => fail(PpStatus::Overflow, format!("{r} does not fit in 64 bits")),
        }
    })
}

/// Mutual information between Alice and Bob (`ab`) and Alice and Eve (`ae`), in bits.
///
/// # Safety
/// `report` must be live; `ab` and `ae` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_report_mutual_information(report: *const PpReport, ab: *mut f64, ae: *mut f64) -> PpStatus {
    guard(|| {
        if report.is_null() || ab.is_null() || ae.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        *ab = (*report).report.mi_ab_bits;
        *ae = (*report).report.mi_ae_bits;
        PpStatus::Ok
    })
}

/// The report as the JSON document printed by `pingpong oracle`.
///
/// # Safety
/// `report` must be live; `out` must be writable. Free the result with
/// `pp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pp_report_to_json(report: *const PpReport, out: *mut *mut c_char) -> PpStatus {
    guard(|| {
        if report.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let r = &*report;
        let mut config = serde_json::Map::new();
        config.insert("subcommand".into(), json!("oracle"));
        config.extend(echo(&r.config, r.strategy));
        let doc = render::oracle_document(Value::Object(config), &r.report);
        write_string(render::to_json_text(&doc), out)
    })
}

/// # Safety
/// `report` must come from `pp_report_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pp_report_free(report: *mut PpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Runs a Monte Carlo simulation with uniformly random message bits.
///
/// # Safety
/// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_run(
    protocol: *const PpProtocol,
    strategy: PpStrategy,
    rounds: u64,
    seed: u64,
    stop_on_detection: bool,
    out: *mut *mut PpStats,
) -> PpStatus {
    guard(|| {
        if protocol.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let config = match protocol_from(&*protocol) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let strategy = AttackStrategy::from(strategy);
        let mut run = RunConfig::new(config.clone(), strategy, rounds, seed);
        run.stop_on_detection = stop_on_detection;
        if let Err(e) = run.validate() {
            return fail(PpStatus::InvalidArgument, e.to_string());
        }
        match pingpong::run_simulation(&run, false) {
            Ok(output) => {
                let mut echo = echo(&config, strategy);
                echo.insert("rounds".into(), json!(rounds));
                echo.insert("seed".into(), json!(seed));
                echo.insert("bits".into(), json!("random"));
                echo.insert("stop_on_detection".into(), json!(stop_on_detection));
                *out = Box::into_raw(Box::new(PpStats {
                    config: Value::Object(echo),
                    stats: output.stats,
                }));
                PpStatus::Ok
            }
            Err(e) => fail(PpStatus::Engine, e.to_string()),
        }
    })
}

/// # Safety
/// `stats` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_counts(stats: *const PpStats, out: *mut PpCounts) -> PpStatus {
    guard(|| {
        if stats.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        *out = counts(&(*stats).stats);
        PpStatus::Ok
    })
}

/// Empirical mutual information of the run, in bits.
///
/// # Safety
/// `stats` must be live; `ab` and `ae` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_mutual_information(stats: *const PpStats, ab: *mut f64, ae: *mut f64) -> PpStatus {
    guard(|| {
        if stats.is_null() || ab.is_null() || ae.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        *ab = (*stats).stats.mi_ab_bits();
        *ae = (*stats).stats.mi_ae_bits();
        PpStatus::Ok
    })
}

/// Counters and rates as JSON (the `oracle` block is null).
///
/// # Safety
/// `stats` must be live; `out` must be writable. Free the result with
/// `pp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_to_json(stats: *const PpStats, out: *mut *mut c_char) -> PpStatus {
    guard(|| {
        if stats.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let s = &*stats;
        let doc = render::run_document(s.config.clone(), &s.stats, None);
        write_string(render::to_json_text(&doc), out)
    })
}

/// # Safety
/// `stats` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_free(stats: *mut PpStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Opens a session that runs one round per `pp_session_step`. Rounds match
/// those of `pp_run` with the same seed.
///
/// # Safety
/// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_session_new(
    protocol: *const PpProtocol,
    strategy: PpStrategy,
    seed: u64,
    out: *mut *mut PpSession,
) -> PpStatus {
    guard(|| {
        if protocol.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let config = match protocol_from(&*protocol) {
            Ok(c) => c,
            Err(s) => return s,
        };
        *out = Box::into_raw(Box::new(PpSession {
            config,
            strategy: strategy.into(),
            seed,
            next_round: 0,
            ended: false,
            stats: RunStats::default(),
        }));
        PpStatus::Ok
    })
}

/// Runs the next round. A stalled round ends the session; later calls
/// return `SessionEnded`.
///
/// # Safety
/// `session` must be live; `round` may be null.
#[no_mangle]
pub unsafe extern "C" fn pp_session_step(session: *mut PpSession, round: *mut PpRound) -> PpStatus {
    guard(|| {
        if session.is_null() {
            return fail(PpStatus::NullPointer, "null session");
        }
        let s = &mut *session;
        if s.ended {
            return fail(PpStatus::SessionEnded, "session ended with a stalled round");
        }
        let mut driver = SampledDriver::new(s.seed, s.next_round, None);
        let rec = match run_round(&s.config, s.strategy, s.next_round, &mut driver) {
            Ok(rec) => rec,
            Err(e) => return fail(PpStatus::Engine, format!("round {}: {e}", s.next_round)),
        };
        s.stats.record(&rec);
        s.next_round += 1;
        s.ended = rec.stalled;
        if !round.is_null() {
            let bit = |b: Option<u8>| b.map_or(-1, i32::from);
            *round = PpRound {
                round_index: rec.round_index,
                mode: match rec.mode.kind() {
                    ModeKind::Message => PpMode::Message,
                    ModeKind::ControlMeasure => PpMode::ControlMeasure,
                    ModeKind::ControlSendBack => PpMode::ControlSendback,
                },
                alice_bit: bit(rec.alice_bit),
                decoded: match rec.decoded {
                    Some(Decoded::Bit(b)) => b.into(),
                    Some(Decoded::Anomaly) => -2,
                    None => -1,
                },
                eve_bit: bit(rec.eve_bit()),
                detected: rec.detected,
                stalled: rec.stalled,
            };
        }
        PpStatus::Ok
    })
}

/// Counters accumulated so far.
///
/// # Safety
/// `session` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pp_session_counts(session: *const PpSession, out: *mut PpCounts) -> PpStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        *out = counts(&(*session).stats);
        PpStatus::Ok
    })
}

/// # Safety
/// `session` must come from `pp_session_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pp_session_free(session: *mut PpSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
