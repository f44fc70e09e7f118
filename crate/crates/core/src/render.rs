//! JSON and CSV output.
//!
//! Every JSON document has the same top-level keys, in this order:
//! `config`, `counts`, `rates`, `mutual_information`, `oracle`. Blocks that
//! do not apply are `null`. Exact probabilities are rendered as `"num/den"`
//! strings next to a `<key>_decimal` float.

use std::io::{self, Write};

use serde_json::{json, Map, Value};

use crate::harness::{confidence_interval, RunStats};
use crate::oracle::AttackReport;
use crate::protocol::RoundRecord;
use crate::rational::Rational;

/// z-score of the reported 95% intervals.
pub const Z_95: f64 = 1.96;

pub const TRANSCRIPT_HEADER: [&str; 9] = [
    "round_index",
    "mode",
    "alice_bit",
    "eve_action",
    "eve_bit",
    "bell_outcome",
    "decoded",
    "detected",
    "stalled",
];

pub const SWEEP_HEADER: [&str; 19] = [
    "param",
    "value",
    "value_decimal",
    "per_round_detection",
    "per_round_detection_decimal",
    "conditional_detection_control_measure",
    "conditional_detection_sendback",
    "stall_probability",
    "message_ber",
    "mi_ab_bits",
    "mi_ae_bits",
    "expected_rounds_to_detection",
    "mc_rounds",
    "mc_detection_rate",
    "mc_ber",
    "mc_stall_rate",
    "mc_mi_ab_bits",
    "mc_mi_ae_bits",
    "mc_first_detection_round",
];

fn put_rational(map: &mut Map<String, Value>, key: &str, value: Option<&Rational>) {
    map.insert(key.to_string(), value.map_or(Value::Null, |r| json!(r.to_string())));
    map.insert(
        format!("{key}_decimal"),
        value.map_or(Value::Null, |r| json!(r.to_f64())),
    );
}

fn table<T: ToString>(t: &Option<[[T; 2]; 2]>) -> Value {
    match t {
        Some(t) => json!([
            [t[0][0].to_string(), t[0][1].to_string()],
            [t[1][0].to_string(), t[1][1].to_string()]
        ]),
        None => Value::Null,
    }
}

fn opt_f64(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

pub fn report_json(report: &AttackReport) -> Value {
    let mut m = Map::new();
    put_rational(&mut m, "detection_probability", Some(&report.per_round_detection));
    put_rational(&mut m, "per_round_detection", Some(&report.per_round_detection));
    put_rational(
        &mut m,
        "conditional_detection_control_measure",
        report.conditional_detection_control_measure.as_ref(),
    );
    put_rational(
        &mut m,
        "conditional_detection_sendback",
        report.conditional_detection_sendback.as_ref(),
    );
    put_rational(&mut m, "stall_probability", Some(&report.stall_probability));
    put_rational(
        &mut m,
        "conditional_stall_message",
        report.conditional_stall_message.as_ref(),
    );
    put_rational(
        &mut m,
        "conditional_stall_sendback",
        report.conditional_stall_sendback.as_ref(),
    );
    put_rational(&mut m, "message_probability", Some(&report.message_probability));
    put_rational(
        &mut m,
        "control_measure_probability",
        Some(&report.control_measure_probability),
    );
    put_rational(
        &mut m,
        "control_sendback_probability",
        Some(&report.control_sendback_probability),
    );
    put_rational(&mut m, "message_ber", report.message_ber.as_ref());
    put_rational(&mut m, "message_anomaly_probability", report.message_anomaly.as_ref());
    put_rational(&mut m, "eve_agreement", report.eve_agreement.as_ref());
    put_rational(
        &mut m,
        "expected_rounds_to_detection",
        report.expected_rounds_to_detection.as_ref(),
    );
    m.insert("joint_ab".into(), table(&report.message_joint));
    m.insert("joint_ae".into(), table(&report.eve_joint));
    m.insert("mi_ab_bits".into(), json!(report.mi_ab_bits));
    m.insert("mi_ae_bits".into(), json!(report.mi_ae_bits));
    Value::Object(m)
}

pub fn counts_json(stats: &RunStats) -> Value {
    json!({
        "rounds_executed": stats.rounds_executed,
        "message_rounds": stats.message_rounds,
        "control_measure_rounds": stats.control_measure_rounds,
        "control_sendback_rounds": stats.control_sendback_rounds,
        "bit_errors": stats.bit_errors,
        "anomalies": stats.anomalies,
        "detections": stats.detections,
        "detections_control_measure": stats.detections_control_measure,
        "detections_sendback": stats.detections_sendback,
        "stalls": stats.stalls,
        "stalls_message": stats.stalls_message,
        "stalls_sendback": stats.stalls_sendback,
        "first_detection_round": stats.first_detection_round,
        "joint_ab": stats.joint_ab,
        "joint_ae": stats.joint_ae,
    })
}

pub fn rates_json(stats: &RunStats) -> Value {
    let mut m = Map::new();
    let mut put = |key: &str, rate: Option<f64>, n: u64| {
        m.insert(key.to_string(), opt_f64(rate));
        let ci = rate.map(|p| {
            let (lo, hi) = confidence_interval(p, n, Z_95);
            json!([lo, hi])
        });
        m.insert(format!("{key}_ci95"), ci.unwrap_or(Value::Null));
    };
    put("ber", stats.ber(), stats.message_rounds);
    put("detection_rate", stats.detection_rate(), stats.rounds_executed);
    put("stall_rate", stats.stall_rate(), stats.rounds_executed);
    put("message_rate", stats.message_rate(), stats.rounds_executed);
    put(
        "control_measure_rate",
        stats.control_measure_rate(),
        stats.rounds_executed,
    );
    put(
        "control_sendback_rate",
        stats.control_sendback_rate(),
        stats.rounds_executed,
    );
    put("anomaly_rate", stats.anomaly_rate(), stats.message_rounds);
    put(
        "conditional_detection_control_measure",
        stats.conditional_detection_control_measure(),
        stats.control_measure_rounds,
    );
    put(
        "conditional_detection_sendback",
        stats.conditional_detection_sendback(),
        stats.control_sendback_rounds,
    );
    put("eve_agreement", stats.eve_agreement(), stats.eve_observations());
    Value::Object(m)
}

/// Document printed by `oracle`.
pub fn oracle_document(config: Value, report: &AttackReport) -> Value {
    json!({
        "config": config,
        "counts": null,
        "rates": null,
        "mutual_information": {
            "mi_ab_bits": report.mi_ab_bits,
            "mi_ae_bits": report.mi_ae_bits,
        },
        "oracle": report_json(report),
    })
}

/// Document printed by `run`.
pub fn run_document(config: Value, stats: &RunStats, report: Option<&AttackReport>) -> Value {
    json!({
        "config": config,
        "counts": counts_json(stats),
        "rates": rates_json(stats),
        "mutual_information": {
            "mi_ab_bits": stats.mi_ab_bits(),
            "mi_ae_bits": stats.mi_ae_bits(),
        },
        "oracle": report.map_or(Value::Null, report_json),
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_text(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn opt_bit(b: Option<u8>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

pub fn write_transcript<W: Write>(records: &[RoundRecord], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRANSCRIPT_HEADER)?;
    for r in records {
        w.write_record([
            r.round_index.to_string(),
            r.mode.kind().label().to_string(),
            opt_bit(r.alice_bit),
            r.eve_action_label(),
            opt_bit(r.eve_bit()),
            r.bell_outcome.map(|b| b.label().to_string()).unwrap_or_default(),
            r.decoded.map(|d| d.label().to_string()).unwrap_or_default(),
            r.detected.to_string(),
            r.stalled.to_string(),
        ])?;
    }
    w.flush()
}

/// One grid point of a parameter sweep.
pub struct SweepRow<'a> {
    pub param: &'a str,
    pub value: &'a Rational,
    pub report: &'a AttackReport,
    pub stats: Option<&'a RunStats>,
}

pub fn write_sweep<W: Write>(rows: &[SweepRow<'_>], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let rat = |r: Option<&Rational>| r.map(|r| r.to_string()).unwrap_or_default();
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let rep = row.report;
        let s = row.stats;
        w.write_record([
            row.param.to_string(),
            row.value.to_string(),
            row.value.to_f64().to_string(),
            rep.per_round_detection.to_string(),
            rep.per_round_detection.to_f64().to_string(),
            rat(rep.conditional_detection_control_measure.as_ref()),
            rat(rep.conditional_detection_sendback.as_ref()),
            rep.stall_probability.to_string(),
            rat(rep.message_ber.as_ref()),
            rep.mi_ab_bits.to_string(),
            rep.mi_ae_bits.to_string(),
            rat(rep.expected_rounds_to_detection.as_ref()),
            s.map(|s| s.rounds_executed.to_string()).unwrap_or_default(),
            num(s.and_then(|s| s.detection_rate())),
            num(s.and_then(|s| s.ber())),
            num(s.and_then(|s| s.stall_rate())),
            num(s.map(|s| s.mi_ab_bits())),
            num(s.map(|s| s.mi_ae_bits())),
            s.and_then(|s| s.first_detection_round)
                .map(|r| r.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackStrategy;
    use crate::oracle::attack_report;
    use crate::protocol::ProtocolConfig;

    #[test]
    fn zero_detection_renders_as_exact_zero() {
        let rep = attack_report(&ProtocolConfig::default(), AttackStrategy::ReturnMeasure).unwrap();
        let v = report_json(&rep);
        assert_eq!(v["detection_probability"], json!("0/1"));
        assert_eq!(v["detection_probability_decimal"], json!(0.0));
        assert_eq!(v["expected_rounds_to_detection"], Value::Null);
        let text = to_json_text(&v);
        assert!(text.contains("\"detection_probability\": \"0/1\""));
        assert!(text.contains("\"detection_probability_decimal\": 0.0"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn half_renders_as_fraction() {
        let cfg = ProtocolConfig::modified(Rational::half(), Rational::half(), true);
        let rep = attack_report(&cfg, AttackStrategy::ReturnMeasure).unwrap();
        let text = to_json_text(&report_json(&rep));
        assert!(text.contains("\"conditional_detection_sendback\": \"1/2\""));
        assert!(text.contains("\"per_round_detection\": \"1/8\""));
    }

    #[test]
    fn top_level_keys_are_fixed() {
        let rep = attack_report(&ProtocolConfig::default(), AttackStrategy::None).unwrap();
        let doc = oracle_document(json!({}), &rep);
        let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "counts", "rates", "mutual_information", "oracle"]);
        let doc = run_document(json!({}), &RunStats::default(), None);
        let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "counts", "rates", "mutual_information", "oracle"]);
    }
}
