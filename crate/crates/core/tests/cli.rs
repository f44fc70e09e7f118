mod common;

use std::process::Command;

use pingpong::cli::run_cli;
use serde_json::Value;

use common::{golden_dir, GOLDEN};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pingpong"))
}

fn call(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("pingpong").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, out, err)
}

fn json_of(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{args:?}: {}", String::from_utf8_lossy(&err));
    serde_json::from_slice(&out).unwrap()
}

#[test]
fn golden_outputs_match() {
    for (name, args) in GOLDEN {
        let (code, out, err) = call(args);
        assert_eq!(code, 0, "{name}: {}", String::from_utf8_lossy(&err));
        let path = golden_dir().join(format!("{name}.json"));
        let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(out == expected, "{name}: output differs from {}", path.display());
    }
}

#[test]
fn binary_output_is_byte_identical_across_invocations() {
    for (_, args) in GOLDEN {
        let a = bin().args(args).output().unwrap();
        let b = bin().args(args).output().unwrap();
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn json_key_set_is_frozen() {
    let v = json_of(GOLDEN[0].1);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["config", "counts", "rates", "mutual_information", "oracle"]);
}

#[test]
fn example_original_return_measure() {
    let v = json_of(&["oracle", "--variant", "original", "--attack", "return-measure"]);
    assert_eq!(v["oracle"]["detection_probability"], "0/1");
    assert_eq!(v["oracle"]["detection_probability_decimal"], 0.0);
    assert_eq!(v["mutual_information"]["mi_ab_bits"], 0.0);
}

#[test]
fn example_modified_return_measure() {
    let v = json_of(&[
        "oracle",
        "--variant",
        "modified",
        "--attack",
        "return-measure",
        "--control-prob",
        "1/2",
        "--c0",
        "1/2",
    ]);
    assert_eq!(v["oracle"]["conditional_detection_sendback"], "1/2");
    assert_eq!(v["oracle"]["per_round_detection"], "1/8");
}

#[test]
fn example_honest_run() {
    let v = json_of(&[
        "run",
        "--variant",
        "original",
        "--attack",
        "none",
        "--rounds",
        "10",
        "--bits",
        "pattern:0110",
        "--seed",
        "7",
    ]);
    assert_eq!(v["rates"]["ber"], 0.0);
    assert_eq!(v["counts"]["detections"], 0);
    assert_eq!(v["counts"]["rounds_executed"], 10);
}

#[test]
fn exit_codes_from_the_binary() {
    let ok = bin().args(["oracle"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(!ok.stdout.is_empty());

    for args in [
        &["run", "--attack", "nope"][..],
        &["oracle", "--variant", "improved"],
        &["oracle", "--control-prob", "1.5"],
        &["oracle", "--c0", "1/3x"],
        &["oracle", "--control-prob", "0.333e0"],
        &["oracle", "--rounds", "5"],
        &["run", "--bits", "pattern:2"],
        &["run", "--json", "/nonexistent-dir/x.json"],
    ] {
        let o = bin().args(args).output().unwrap();
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }

    let help = bin().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn config_block_round_trips_as_flags() {
    for (_, args) in GOLDEN {
        let (_, first, _) = call(args);
        let v: Value = serde_json::from_slice(&first).unwrap();
        let config = v["config"].as_object().unwrap();
        let mut argv: Vec<String> = vec![config["subcommand"].as_str().unwrap().to_string()];
        for (k, val) in config {
            if k == "subcommand" {
                continue;
            }
            let flag = format!("--{}", k.replace('_', "-"));
            match val {
                Value::Bool(true) => argv.push(flag),
                Value::Bool(false) => {}
                Value::String(s) => argv.extend([flag, s.clone()]),
                other => argv.extend([flag, other.to_string()]),
            }
        }
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let (code, second, _) = call(&argv);
        assert_eq!(code, 0);
        assert!(first == second, "round trip changed output for {argv:?}");
    }
}

#[test]
fn decimal_and_fraction_flags_agree() {
    let a = json_of(&[
        "oracle",
        "--variant",
        "modified",
        "--attack",
        "forward-measure",
        "--control-prob",
        "0.5",
        "--c0",
        "0.25",
    ]);
    let b = json_of(&[
        "oracle",
        "--variant",
        "modified",
        "--attack",
        "forward-measure",
        "--control-prob",
        "1/2",
        "--c0",
        "1/4",
    ]);
    assert_eq!(a, b);
}

#[test]
fn json_to_file_leaves_stdout_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let (code, out, _) = call(&["oracle", "--json", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["config"]["subcommand"], "oracle");
}

#[test]
fn transcript_has_one_row_per_executed_round() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let v = json_of(&[
        "run",
        "--attack",
        "none",
        "--rounds",
        "8",
        "--bits",
        "pattern:0110",
        "--seed",
        "1",
        "--csv",
        path.to_str().unwrap(),
    ]);
    let mut r = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, pingpong::render::TRANSCRIPT_HEADER);
    assert_eq!(
        r.records().count() as u64,
        v["counts"]["rounds_executed"].as_u64().unwrap()
    );
}

#[test]
fn transcript_stops_at_a_stall() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let v = json_of(&[
        "run",
        "--variant",
        "modified",
        "--attack",
        "hold-until-announce",
        "--receipt",
        "on",
        "--rounds",
        "500",
        "--seed",
        "2",
        "--csv",
        path.to_str().unwrap(),
    ]);
    let executed = v["counts"]["rounds_executed"].as_u64().unwrap();
    assert!(executed < 500);
    assert_eq!(v["counts"]["stalls"], 1);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(&path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect();
    assert_eq!(rows.len() as u64, executed);
    assert_eq!(&rows.last().unwrap()[8], "true");
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let (code, out, _) = call(&[
        "sweep",
        "--variant",
        "modified",
        "--attack",
        "return-measure",
        "--param",
        "c0",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "5",
    ]);
    assert_eq!(code, 0);
    let mut r = csv::Reader::from_reader(out.as_slice());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, pingpong::render::SWEEP_HEADER);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let values: Vec<&str> = rows.iter().map(|r| &r[1]).collect();
    assert_eq!(values, ["0/1", "1/4", "1/2", "3/4", "1/1"]);
    // per-round detection c(1 - c0)/2 with c = 1/2
    let detection: Vec<&str> = rows.iter().map(|r| &r[3]).collect();
    assert_eq!(detection, ["1/4", "3/16", "1/8", "1/16", "0/1"]);
    assert!(rows.iter().all(|r| r[12].is_empty()));
}

#[test]
fn sweep_with_monte_carlo_is_deterministic() {
    let args = [
        "sweep",
        "--attack",
        "forward-measure",
        "--param",
        "control-prob",
        "--from",
        "1/4",
        "--to",
        "3/4",
        "--steps",
        "3",
        "--rounds",
        "2000",
        "--seed",
        "4",
    ];
    let (code, a, _) = call(&args);
    assert_eq!(code, 0);
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(a.as_slice())
        .records()
        .map(Result::unwrap)
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[12] == "2000"));
}
