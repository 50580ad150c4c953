//! End-to-end tests of the `prodrop` binary: every subcommand is
//! exercised through a real process, checking artifacts, determinism,
//! config-file precedence, and the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prodrop"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

/// Asserts the error contract: expected exit code, exactly one stderr
/// line, machine-parsable `error: <kind>:` prefix.
fn assert_error(out: &Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code), "exit code");
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let trimmed = stderr.trim_end();
    assert!(
        !trimmed.is_empty() && !trimmed.contains('\n'),
        "expected a single error line, got {stderr:?}"
    );
    let prefix = format!("error: {kind}: ");
    assert!(
        trimmed.starts_with(&prefix),
        "expected prefix {prefix:?}, got {trimmed:?}"
    );
}

/// Runs synth plus the whole training/inference chain in `dir`,
/// using small but non-degenerate model sizes.
fn run_pipeline(dir: &Path) {
    run_ok(
        dir,
        &["synth", "--out-dir", "data", "--sentences", "150", "--seed", "7"],
    );
    run_ok(
        dir,
        &["train-lm", "--corpus", "data/full-source.txt", "--out", "lm.5g", "--order", "5"],
    );
    run_ok(
        dir,
        &["align", "--src", "data/source.txt", "--tgt", "data/target.txt", "--out", "em.pharaoh", "--iterations", "5"],
    );
    run_ok(
        dir,
        &[
            "annotate",
            "--src", "data/source.txt",
            "--tgt", "data/target.txt",
            "--align", "data/alignments.pharaoh",
            "--lm", "lm.5g",
            "--out", "labels.tsv",
            "--inserted-out", "inserted.txt",
        ],
    );
    run_ok(
        dir,
        &[
            "train-detector",
            "--labels", "labels.tsv",
            "--out", "d.model",
            "--window", "5",
            "--hidden", "16",
            "--epochs", "10",
            "--dim", "16",
            "--seed", "7",
        ],
    );
    run_ok(
        dir,
        &[
            "train-predictor",
            "--labels", "labels.tsv",
            "--sidecar", "data/source.pos",
            "--out", "p.model",
            "--hidden", "16",
            "--epochs", "10",
            "--dim", "25",
            "--seed", "7",
        ],
    );
    run_ok(
        dir,
        &[
            "generate",
            "--detector", "d.model",
            "--predictor", "p.model",
            "--in", "data/source.txt",
            "--sidecar", "data/source.pos",
            "--nbest", "6",
            "--out", "out.cn",
        ],
    );
    run_ok(dir, &["emit-cn", "--labels", "labels.tsv", "--out", "labels.cn"]);
}

#[test]
fn full_pipeline_produces_consistent_artifacts() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    run_pipeline(dir);

    // every artifact is present, UTF-8, and newline-terminated
    for name in [
        "data/source.txt",
        "data/source.pos",
        "data/target.txt",
        "data/alignments.pharaoh",
        "data/full-source.txt",
        "data/gold-labels.tsv",
        "lm.5g",
        "em.pharaoh",
        "labels.tsv",
        "inserted.txt",
        "d.model",
        "p.model",
        "out.cn",
        "labels.cn",
    ] {
        let text = read(dir, name);
        assert!(text.ends_with('\n'), "{name} lacks trailing newline");
        assert!(!text.trim().is_empty(), "{name} is empty");
    }

    // structured artifacts parse back with the library
    let labels = prodrop::corpus::parse_labeled(&read(dir, "labels.tsv")).unwrap();
    let n_labeled: usize = labels.iter().map(Vec::len).sum();
    assert_eq!(n_labeled, 150);
    let networks = prodrop::generator::parse_cn(&read(dir, "out.cn")).unwrap();
    assert_eq!(networks.len(), 150);
    let slot_columns: usize = networks.iter().map(|n| n.dp_column_count()).sum();
    assert!(slot_columns > 0, "no slot columns were generated");
    assert_eq!(
        prodrop::corpus::parse_alignments(&read(dir, "em.pharaoh")).unwrap().len(),
        150
    );

    // stripping slot columns from the networks recovers the input text
    let sources = prodrop::corpus::parse_corpus(&read(dir, "data/source.txt")).unwrap();
    let flat: Vec<_> = sources.iter().flatten().collect();
    for (network, sentence) in networks.iter().zip(flat) {
        let originals: Vec<&str> = network.original_tokens();
        let expected: Vec<&str> = sentence.surfaces().collect();
        assert_eq!(originals, expected);
    }

    // the projection labels recover the planted gold annotations well:
    // evaluate prints the report and writes the same bytes to --out
    let out = run_ok(
        dir,
        &["evaluate", "--auto", "labels.tsv", "--gold", "data/gold-labels.tsv", "--out", "report.txt"],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, read(dir, "report.txt"));
    assert!(stdout.contains("detection"), "report:\n{stdout}");
    let f1_line = stdout
        .lines()
        .find(|l| l.starts_with("prediction.f1="))
        .expect("prediction.f1 key");
    let f1: f64 = f1_line.trim_start_matches("prediction.f1=").parse().unwrap();
    assert!(f1 > 0.8, "projection quality collapsed: {f1_line}");
}

#[test]
fn reruns_are_deterministic_and_inputs_untouched() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();

    run_ok(
        dir,
        &["synth", "--out-dir", "a", "--sentences", "80", "--seed", "7"],
    );
    run_ok(
        dir,
        &["synth", "--out-dir", "b", "--sentences", "80", "--seed", "7"],
    );
    run_ok(
        dir,
        &["synth", "--out-dir", "c", "--sentences", "80", "--seed", "8"],
    );
    for name in [
        "source.txt",
        "source.pos",
        "target.txt",
        "alignments.pharaoh",
        "full-source.txt",
        "gold-labels.tsv",
    ] {
        assert_eq!(
            read(dir, &format!("a/{name}")),
            read(dir, &format!("b/{name}")),
            "{name} differs between same-seed runs"
        );
    }
    assert_ne!(
        read(dir, "a/source.txt"),
        read(dir, "c/source.txt"),
        "different seeds produced identical corpora"
    );

    // identical inputs + seed give byte-identical models; inputs stay put
    let input_before = read(dir, "a/full-source.txt");
    let gold_before = read(dir, "a/gold-labels.tsv");
    run_ok(dir, &["train-lm", "--corpus", "a/full-source.txt", "--out", "lm1", "--order", "3"]);
    run_ok(dir, &["train-lm", "--corpus", "a/full-source.txt", "--out", "lm2", "--order", "3"]);
    assert_eq!(read(dir, "lm1"), read(dir, "lm2"));
    let detector_args = |out: &'static str| {
        [
            "train-detector",
            "--labels", "a/gold-labels.tsv",
            "--out", out,
            "--window", "3",
            "--hidden", "4",
            "--epochs", "2",
            "--dim", "4",
            "--seed", "7",
        ]
    };
    run_ok(dir, &detector_args("d1"));
    run_ok(dir, &detector_args("d2"));
    assert_eq!(read(dir, "d1"), read(dir, "d2"));
    assert_eq!(input_before, read(dir, "a/full-source.txt"), "input corpus mutated");
    assert_eq!(gold_before, read(dir, "a/gold-labels.tsv"), "input labels mutated");
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    run_ok(
        dir,
        &["synth", "--out-dir", "data", "--sentences", "30", "--seed", "7"],
    );

    // 2: invalid setting value
    let out = run(dir, &["synth", "--out-dir", "x", "--drop-rate", "1.5"]);
    assert_error(&out, 2, "config");
    // 2: missing required setting
    let out = run(dir, &["align", "--src", "data/source.txt", "--out", "q"]);
    assert_error(&out, 2, "config");
    // 2: unknown flag (argument parsing)
    let out = run(dir, &["train-lm", "--no-such-flag"]);
    assert_error(&out, 2, "config");
    // 3: unreadable input
    let out = run(dir, &["train-lm", "--corpus", "missing.txt", "--out", "y"]);
    assert_error(&out, 3, "io");
    // 4: corrupt model file
    fs::write(dir.join("bad.model"), "not a model\n").unwrap();
    let out = run(
        dir,
        &["generate", "--detector", "bad.model", "--predictor", "bad.model", "--in", "data/source.txt", "--out", "z"],
    );
    assert_error(&out, 4, "model");
    // 5: malformed data file
    fs::write(dir.join("bad.tsv"), "starts\tmid\n").unwrap();
    let out = run(dir, &["train-detector", "--labels", "bad.tsv", "--out", "w"]);
    assert_error(&out, 5, "data");
    // 5: inconsistent pairing (alignment links out of range)
    fs::write(dir.join("bad.pharaoh"), "9-9\n").unwrap();
    let out = run(
        dir,
        &[
            "annotate",
            "--src", "data/source.txt",
            "--tgt", "data/target.txt",
            "--align", "bad.pharaoh",
            "--lm", "also-missing.lm",
            "--out", "l",
        ],
    );
    // line counts mismatch before the LM is ever read
    assert_error(&out, 5, "data");
    // 0: help
    let out = run(dir, &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("train-lm"));
}

#[test]
fn config_file_supplies_values_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    run_ok(
        dir,
        &["synth", "--out-dir", "data", "--sentences", "30", "--seed", "7"],
    );
    fs::write(
        dir.join("settings.conf"),
        "# experiment settings\ncorpus=data/full-source.txt\nout=from-file.lm\norder=2\n",
    )
    .unwrap();

    // everything from the file
    run_ok(dir, &["train-lm", "--config", "settings.conf"]);
    let lm = prodrop::lm::parse_lm(&read(dir, "from-file.lm")).unwrap();
    assert_eq!(lm.order(), 2);

    // explicit flags override file values
    run_ok(
        dir,
        &["train-lm", "--config", "settings.conf", "--order", "3", "--out", "from-flag.lm"],
    );
    let lm = prodrop::lm::parse_lm(&read(dir, "from-flag.lm")).unwrap();
    assert_eq!(lm.order(), 3);

    // malformed config lines are config errors
    fs::write(dir.join("broken.conf"), "order 2\n").unwrap();
    let out = run(dir, &["train-lm", "--config", "broken.conf"]);
    assert_error(&out, 2, "config");

    // unparsable config values name the offending key
    fs::write(dir.join("bad-value.conf"), "order=two\n").unwrap();
    let out = run(
        dir,
        &["train-lm", "--config", "bad-value.conf", "--corpus", "data/full-source.txt", "--out", "x.lm"],
    );
    assert_error(&out, 2, "config");
    assert!(
        String::from_utf8(out.stderr).unwrap().contains("--order"),
        "error should name the offending field"
    );
}

#[test]
fn emit_cn_encodes_labels_as_single_candidate_columns() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    run_ok(
        dir,
        &["synth", "--out-dir", "data", "--sentences", "40", "--drop-rate", "1.0", "--seed", "7"],
    );
    run_ok(dir, &["emit-cn", "--labels", "data/gold-labels.tsv", "--out", "gold.cn"]);
    let networks = prodrop::generator::parse_cn(&read(dir, "gold.cn")).unwrap();
    assert_eq!(networks.len(), 40);
    // drop rate 1: every network is a straight-line lattice spelling
    // the sentence with the annotated pronoun inserted at its slot
    // (single-candidate slot columns parse back as plain columns; the
    // lattice is what downstream decoders consume)
    let gold = prodrop::corpus::parse_labeled(&read(dir, "data/gold-labels.tsv")).unwrap();
    for (network, labeled) in networks.iter().zip(gold.iter().flatten()) {
        let annotation = &labeled.annotations()[0];
        let mut expected: Vec<String> = labeled
            .sentence
            .surfaces()
            .map(str::to_string)
            .collect();
        expected.insert(annotation.position, annotation.pronoun.clone());
        let spelled: Vec<&str> = network
            .columns
            .iter()
            .map(|c| {
                assert_eq!(c.arcs.len(), 1, "every column is single-arc");
                assert_eq!(c.arcs[0].1, 1.0, "every arc has weight 1");
                c.arcs[0].0.as_str()
            })
            .collect();
        assert_eq!(spelled, expected);
    }
}
