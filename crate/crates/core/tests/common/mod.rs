/// One configuration per strategy.
pub const GOLDEN: [(&str, &[&str]); 5] = [
    (
        "none",
        &[
            "run",
            "--variant",
            "original",
            "--attack",
            "none",
            "--rounds",
            "64",
            "--seed",
            "7",
            "--bits",
            "pattern:0110",
        ],
    ),
    (
        "forward-measure",
        &[
            "run",
            "--variant",
            "original",
            "--attack",
            "forward-measure",
            "--rounds",
            "64",
            "--seed",
            "11",
        ],
    ),
    (
        "return-measure",
        &[
            "run",
            "--variant",
            "modified",
            "--attack",
            "return-measure",
            "--rounds",
            "64",
            "--seed",
            "3",
            "--control-prob",
            "1/2",
            "--c0",
            "1/2",
        ],
    ),
    (
        "intercept-substitute",
        &[
            "run",
            "--variant",
            "original",
            "--attack",
            "intercept-substitute",
            "--rounds",
            "64",
            "--seed",
            "5",
            "--control-prob",
            "0.25",
        ],
    ),
    (
        "hold-until-announce",
        &[
            "run",
            "--variant",
            "modified",
            "--attack",
            "hold-until-announce",
            "--rounds",
            "64",
            "--seed",
            "9",
            "--receipt",
            "off",
        ],
    ),
];

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}
