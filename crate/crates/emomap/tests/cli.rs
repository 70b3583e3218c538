//! Black-box tests of the command-line surface: exit codes, output shape,
//! and reproducibility under a fixed seed.

use std::path::Path;
use std::process::{Command, Output};

fn emomap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emomap"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn full_pipeline_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let gen = emomap(
        &["gen-synth", "--n", "250", "--sigma", "0.05", "--seed", "1", "--out", "data"],
        root,
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    assert!(root.join("data/mapping.csv").is_file());
    assert!(root.join("data/content_a.csv").is_file());
    assert!(root.join("data/content_b.csv").is_file());

    let train = emomap(
        &[
            "train-mapper", "--data", "data/mapping.csv", "--registry", "synthetic",
            "--steps", "600", "--d", "16", "--hidden", "32,32", "--seed", "2", "--out", "run",
        ],
        root,
    );
    assert!(train.status.success(), "{}", stderr(&train));
    assert!(root.join("run/model.emoe").is_file());

    let translate = emomap(
        &[
            "translate", "--model", "run/model.emoe", "--format-in", "SynA",
            "--format-out", "SynB", "--values", "0.2,-0.5,0.9",
        ],
        root,
    );
    assert!(translate.status.success(), "{}", stderr(&translate));
    let values: Vec<f64> = stdout(&translate)
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);

    let encoder = emomap(
        &[
            "train-encoder", "--model", "run/model.emoe", "--data", "data/content_a.csv",
            "--mode", "augmented", "--augment-format", "SynB", "--epochs", "8",
            "--seed", "3", "--out", "run2",
        ],
        root,
    );
    assert!(encoder.status.success(), "{}", stderr(&encoder));

    let evaluate = emomap(
        &[
            "evaluate", "--model", "run2/model.emoe", "--scenario", "supervised",
            "--data", "data/content_a.csv",
        ],
        root,
    );
    assert!(evaluate.status.success(), "{}", stderr(&evaluate));
    assert!(stdout(&evaluate).contains("supervised pearson_r"));

    let retrieve = emomap(
        &[
            "retrieve", "--model", "run2/model.emoe", "--query", "SynA-5",
            "--in", "syn-content-SynA", "--top", "3", "--data", "data/content_a.csv",
            "--json-lines",
        ],
        root,
    );
    assert!(retrieve.status.success(), "{}", stderr(&retrieve));
    let out = stdout(&retrieve);
    assert!(out.contains("SynA-5"));
    assert!(out.contains("\"rank\":1"));

    let pca = emomap(
        &["analyze-pca", "--model", "run/model.emoe", "--k", "2", "--out", "pca"],
        root,
    );
    assert!(pca.status.success(), "{}", stderr(&pca));
    let table = std::fs::read_to_string(root.join("pca/pca.tsv")).unwrap();
    // one row per head-row variable of the two 3-variable formats
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn exit_codes_and_error_messages() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // missing model file -> exit 1, path named on stderr
    let missing = emomap(
        &[
            "translate", "--model", "nope.emoe", "--format-in", "VAD",
            "--format-out", "BE5", "--values", "0,0,0",
        ],
        root,
    );
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("nope.emoe"));

    // unknown flag -> clap error, non-zero exit
    let unknown = emomap(&["gen-synth", "--bogus"], root);
    assert!(!unknown.status.success());

    // invalid registry name -> exit 1
    let gen = emomap(&["gen-synth", "--n", "10", "--seed", "1", "--out", "d"], root);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let bad = emomap(
        &[
            "train-mapper", "--data", "d/mapping.csv", "--registry", "martian",
            "--steps", "1", "--out", "r",
        ],
        root,
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("martian"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for out in ["a", "b"] {
        let gen = emomap(
            &["gen-synth", "--n", "60", "--sigma", "0.05", "--seed", "9", "--out", out],
            root,
        );
        assert!(gen.status.success(), "{}", stderr(&gen));
    }
    let a = std::fs::read_to_string(root.join("a/mapping.csv")).unwrap();
    let b = std::fs::read_to_string(root.join("b/mapping.csv")).unwrap();
    assert_eq!(a, b);

    for out in ["ra", "rb"] {
        let train = emomap(
            &[
                "train-mapper", "--data", "a/mapping.csv", "--registry", "synthetic",
                "--steps", "120", "--d", "8", "--hidden", "16", "--seed", "4", "--out", out,
            ],
            root,
        );
        assert!(train.status.success(), "{}", stderr(&train));
    }
    let ma = std::fs::read(root.join("ra/model.emoe")).unwrap();
    let mb = std::fs::read(root.join("rb/model.emoe")).unwrap();
    assert_eq!(ma, mb, "identical seeds must produce identical model files");
}
