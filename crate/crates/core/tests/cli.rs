use std::path::Path;
use std::process::{Command, Output};

use reinflect::actions::{parse_actions, run};
use reinflect::patches::PatchTable;

fn reinflect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reinflect"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = reinflect(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const DATA: &str = "\
skapad\tskapade\tADJ;DEF
fixad\tfixade\tADJ;DEF
målad\tmålade\tADJ;DEF
bungas\tbungām\tN;PL
kat\tkatten\tN;DEF
hund\thunden\tN;DEF
";

#[test]
fn patches_on_latin_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.tsv");
    std::fs::write(&data, "tal\ttále\tN\nfar\tfär\tN\n").unwrap();
    let out = dir.path().join("table.tsv");
    ok(&[
        "patches",
        "--ranges",
        "basic-latin,latin-1-supplement",
        "--alphabet-from",
        p(&data),
        "--out",
        p(&out),
        "--seed",
        "1",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let table = PatchTable::from_tsv(&text).unwrap();
    // Acute, diaeresis, and the acute/diaeresis swap between á and ä.
    assert_eq!(table.class_count(), 3);
    assert!(table.find_patch('á', 'ä').is_some());
    assert!(text.lines().all(|l| l.split('\t').count() == 3));
    assert_ne!(table.find_patch('a', 'á'), table.find_patch('a', 'ä'));
    assert_eq!(table.find_patch('e', 'é'), table.find_patch('a', 'á'));
}

#[test]
fn oracle_lines_replay() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.tsv");
    std::fs::write(&data, DATA).unwrap();
    let text = ok(&["oracle", "--data", p(&data), "--seed", "3"]);
    let table = PatchTable::from_tsv(&ok(&["patches", "--alphabet-from", p(&data)])).unwrap();
    assert_eq!(text.lines().count(), 6);
    for line in text.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        let actions = parse_actions(cols[2]).unwrap();
        assert_eq!(run(cols[0], &actions, &table).unwrap(), cols[1]);
    }
    assert!(text.contains("PATCH:"));
    let plain = ok(&["oracle", "--data", p(&data), "--patches", "false"]);
    assert!(!plain.contains("PATCH:"));

    let aligned = ok(&["align", "--pairs", p(&data)]);
    assert!(aligned.lines().any(|l| l == "bungas\tbungām\t1"));
}

#[test]
fn enhance_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.tsv");
    std::fs::write(&data, DATA).unwrap();
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        ok(&["enhance", "--data", p(&data), "--factor", "1", "--seed", "7", "--out", p(&out)]);
        std::fs::read(out).unwrap()
    };
    let a = run_once("a.tsv");
    assert_eq!(a, run_once("b.tsv"));
    assert!(!a.is_empty());
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    std::fs::write(&train, DATA).unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "# tiny model\nhidden=8\nembed=4\nepochs=2\n").unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let metrics = dir.path().join("epochs.tsv");
    ok(&[
        "train",
        "--config",
        p(&config),
        "--train",
        p(&train),
        "--dev",
        p(&train),
        "--checkpoint",
        p(&ckpt),
        "--metrics",
        p(&metrics),
        "--seed",
        "2",
    ]);
    let log = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.starts_with("epoch\ttrain_loss"));

    let test = dir.path().join("test.tsv");
    std::fs::write(&test, "skapad\tADJ;DEF\nhund\tN;DEF\n").unwrap();
    let pred = dir.path().join("pred.tsv");
    ok(&["predict", "--checkpoint", p(&ckpt), "--test", p(&test), "--beam", "4", "--out", p(&pred), "--seed", "0"]);
    assert_eq!(std::fs::read_to_string(&pred).unwrap().lines().count(), 2);

    let gold = dir.path().join("gold.tsv");
    std::fs::write(&gold, "skapad\tskapade\tADJ;DEF\nhund\thunden\tN;DEF\n").unwrap();
    let report = ok(&["evaluate", "--predictions", p(&pred), "--gold", p(&gold)]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("accuracy\t") && lines[1].starts_with("levenshtein\t"));
}

#[test]
fn failures_exit_nonzero() {
    let out = reinflect(&["predict", "--checkpoint", "/nonexistent.ckpt", "--test", "/nonexistent.tsv"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error: checkpoint:"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "colour=blue\n").unwrap();
    let out = reinflect(&["train", "--config", p(&config), "--checkpoint", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("colour"));
}
