use std::path::{Path, PathBuf};

use reinflect::corpus::{parse_unimorph, write_unimorph, InflectionSample};
use reinflect::patches::default_table;
use reinflect::pipeline::{self, GridPoint, RunConfig, TuneReport};

fn sample(lemma: &str, form: &str, tags: &[&str]) -> InflectionSample {
    InflectionSample::new(lemma, Some(form), tags).unwrap()
}

fn write(dir: &Path, name: &str, samples: &[InflectionSample]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, write_unimorph(samples)).unwrap();
    path
}

fn write_text(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn small_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_text("hidden=16\nembed=8\nmax_epochs=3\nseed=4\n").unwrap();
    cfg.checkpoint = Some(dir.join("model.ckpt"));
    cfg
}

fn toy_language() -> (Vec<InflectionSample>, Vec<InflectionSample>) {
    let words = ["kat", "hund", "bil", "hus", "sol", "vind", "dal", "mur"];
    let mut train = Vec::new();
    for w in words {
        train.push(sample(w, &format!("{w}en"), &["N", "DEF"]));
        train.push(sample(w, &format!("{w}ar"), &["N", "PL"]));
    }
    let dev = vec![sample("rot", "roten", &["N", "DEF"]), sample("rot", "rotar", &["N", "PL"])];
    (train, dev)
}

#[test]
fn overfit_checkpoint_predicts_macron_form() {
    let dir = tempfile::tempdir().unwrap();
    let pair = [sample("bungas", "bungām", &["N", "PL", "NOM"])];
    let mut cfg = small_config(dir.path());
    cfg.apply_text("max_epochs=80\npatience=80\n").unwrap();
    cfg.train = Some(write(dir.path(), "train.tsv", &pair));
    cfg.dev = Some(write(dir.path(), "dev.tsv", &pair));
    let outcome = pipeline::cmd_train(&cfg).unwrap();
    assert!(outcome.model.table.class_count() > 0);

    cfg.test = Some(write_text(dir.path(), "test.tsv", "bungas\tN;PL;NOM\n"));
    let text = pipeline::cmd_predict(&cfg).unwrap();
    assert_eq!(text, "bungas\tbungām\tN;PL;NOM\n");
}

#[test]
fn plain_oracle_has_no_patch_actions() {
    let (train, _) = toy_language();
    let mut data = train;
    data.push(sample("bungas", "bungām", &["N", "PL"]));
    let with = pipeline::cmd_oracle(&data, default_table()).unwrap();
    let without = pipeline::cmd_oracle(&data, &reinflect::patches::PatchTable::empty()).unwrap();
    assert!(with.contains("PATCH:"));
    assert!(!without.contains("PATCH:"));
    assert_eq!(with.lines().count(), data.len());
}

#[test]
fn prediction_files_for_any_beam() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev) = toy_language();
    let mut cfg = small_config(dir.path());
    cfg.train = Some(write(dir.path(), "train.tsv", &train));
    cfg.dev = Some(write(dir.path(), "dev.tsv", &dev));
    pipeline::cmd_train(&cfg).unwrap();

    cfg.test = Some(write_text(dir.path(), "test.tsv", "rot\tN;DEF\nlund\tN;PL\nxyz\tN;PL\n"));
    for beam in [1, 16] {
        cfg.beam_size = beam;
        let text = pipeline::cmd_predict(&cfg).unwrap();
        let parsed = parse_unimorph(&text, false).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[2].lemma, "xyz");
    }

    cfg.test = Some(write_text(dir.path(), "empty.tsv", ""));
    cfg.output = Some(dir.path().join("empty.out"));
    assert_eq!(pipeline::cmd_predict(&cfg).unwrap(), "");
    assert_eq!(std::fs::read(dir.path().join("empty.out")).unwrap(), b"");
}

#[test]
fn evaluation_reports() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write_text(dir.path(), "gold", "x\tñíiyä'waa\tV\n");
    let pred = write_text(dir.path(), "pred", "x\tñíiyä'wa\tV\n");
    let m = pipeline::cmd_evaluate(&pred, &gold).unwrap();
    assert_eq!(m.report(), "accuracy\t0.0000\nlevenshtein\t1.0000\n");
    assert_eq!(pipeline::cmd_evaluate(&gold, &gold).unwrap().report(), "accuracy\t100.0000\nlevenshtein\t0.0000\n");

    // katter/kattor differ in one place, hunden/hund in two.
    let gold = write_text(dir.path(), "gold3", "a\tkatter\tN\nb\thunden\tN\nc\tbilar\tN\n");
    let pred = write_text(dir.path(), "pred3", "a\tkattor\tN\nb\thund\tN\nc\tbilar\tN\n");
    let m = pipeline::cmd_evaluate(&pred, &gold).unwrap();
    assert_eq!(m.report(), "accuracy\t33.3333\nlevenshtein\t1.0000\n");

    let short = write_text(dir.path(), "short", "a\tkatter\tN\n");
    assert!(pipeline::cmd_evaluate(&short, &gold).is_err());
}

#[test]
fn stage_named_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.train = Some(dir.path().join("missing.tsv"));
    let err = pipeline::cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("parse:"), "{err}");

    cfg.train = Some(write_text(dir.path(), "bad.tsv", "only-one-column\n"));
    let err = pipeline::cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("parse:"), "{err}");

    cfg.checkpoint = Some(write_text(dir.path(), "junk.ckpt", "not a checkpoint\n"));
    cfg.test = Some(write_text(dir.path(), "t.tsv", "a\tN\n"));
    let err = pipeline::cmd_predict(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("checkpoint:"), "{err}");
}

#[test]
fn enhancement_is_seeded() {
    let (train, _) = toy_language();
    let a = pipeline::cmd_enhance(&train, 1, 1, 7).unwrap();
    let b = pipeline::cmd_enhance(&train, 1, 1, 7).unwrap();
    assert_eq!(a, b);
    assert!(!a.is_empty());
    let five = pipeline::cmd_enhance(&train, 5, 1, 7).unwrap();
    assert!(five.len() > a.len());
}

fn without_times(report: &TuneReport) -> TuneReport {
    let mut r = report.clone();
    for c in &mut r.cells {
        c.seconds = 0.0;
    }
    r
}

#[test]
fn full_grid_has_72_cells_for_two_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev) = toy_language();
    let mut cfg = RunConfig::default();
    cfg.apply_text("max_epochs=1\nseeds=0,1\n").unwrap();
    cfg.train = Some(write(dir.path(), "train.tsv", &train));
    cfg.dev = Some(write(dir.path(), "dev.tsv", &dev));
    cfg.output = Some(dir.path().join("tune.tsv"));
    let report = pipeline::cmd_tune(&cfg).unwrap();
    assert_eq!(report.cells.len(), 72);
    assert!(report.best.is_some());
    let tsv = std::fs::read_to_string(dir.path().join("tune.tsv")).unwrap();
    assert_eq!(tsv, report.to_tsv());

    // Only ASCII letters: the filtered table is empty and patch cells
    // coincide with their twins.
    for cell in &report.cells {
        assert_eq!(cell.patches_noop, cell.point.use_patches);
        if cell.point.use_patches {
            let twin = report
                .cells
                .iter()
                .find(|c| c.seed == cell.seed && c.point == GridPoint { use_patches: false, ..cell.point })
                .unwrap();
            assert_eq!(cell.result, twin.result);
        }
    }

    assert_eq!(pipeline::cmd_tune(&cfg).unwrap().to_tsv(), tsv);
}

#[test]
fn parallel_tuning_matches_serial() {
    let mut train = toy_language().0;
    train.push(sample("bungas", "bungām", &["N", "PL"]));
    let dev = toy_language().1;
    let mut cfg = RunConfig::default();
    cfg.apply_text("max_epochs=2\nseeds=3,5\n").unwrap();
    let grid: Vec<GridPoint> = [(16, 8, true, 0), (16, 8, false, 1), (32, 8, true, 1)]
        .into_iter()
        .map(|(hidden_size, embed_size, use_patches, enhance_factor)| GridPoint {
            hidden_size,
            embed_size,
            use_patches,
            enhance_factor,
        })
        .collect();
    let table = default_table();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| pipeline::tune_on(&cfg, &grid, &train, &dev, table).unwrap())
    };
    let serial = run(1);
    let parallel = run(4);
    assert_eq!(without_times(&serial), without_times(&parallel));
    assert_eq!(serial.cells.len(), 6);
    assert!(serial.cells.iter().all(|c| !c.patches_noop));
}

#[test]
fn missing_dev_file_holds_out_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = toy_language();
    let mut cfg = small_config(dir.path());
    cfg.train = Some(write(dir.path(), "train.tsv", &train));
    let outcome = pipeline::cmd_train(&cfg).unwrap();
    assert!(outcome.epochs.iter().all(|e| e.dev_accuracy.is_some()));

    cfg.train = Some(write(dir.path(), "one.tsv", &train[..1]));
    let outcome = pipeline::cmd_train(&cfg).unwrap();
    assert!(outcome.epochs.iter().all(|e| e.dev_accuracy.is_none()));
}
