use std::fs;
use std::path::Path;

use tsr_cli::cache::{CacheError, FeatureCache};
use tsr_cli::commands::{
    cmd_bench, cmd_check, cmd_eval, cmd_features, cmd_train, cmd_tune, suffixed, CliError,
};
use tsr_cli::report::{parse_csv, Averaging, TableRow};
use tsr_cli::synth::{write_synthetic_gtsrb, SynthConfig};
use tsr_core::dataset::DatasetError;
use tsr_core::metrics::Split;
use tsr_core::pipeline::{PipelineError, PipelineKind};
use tsr_core::svm::{load_model, SvmError, TrainConfig};
use tsr_core::tuning::TuneError;

fn dataset(dir: &Path, classes: u32) {
    let cfg = SynthConfig {
        classes,
        train_per_class: 12,
        test_per_class: 4,
        seed: 5,
    };
    write_synthetic_gtsrb(dir, &cfg).unwrap();
}

#[test]
fn check_reports_classes() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 4);
    let mut out = Vec::new();
    let s = cmd_check(dir.path(), &mut out).unwrap();
    assert_eq!(s.class_counts, vec![12; 4]);
    assert_eq!(s.total, 48);
    assert_eq!(s.size_histogram.iter().sum::<usize>(), 48);
    assert_eq!(s.test_total, Some(16));
    assert_eq!(s.imbalance_ratio(), 1.0);
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("training images: 48 in 4 classes"));
}

#[test]
fn check_layout_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        cmd_check(dir.path(), &mut Vec::new()),
        Err(CliError::Dataset(_))
    ));

    dataset(dir.path(), 3);
    fs::remove_dir_all(dir.path().join("Final_Training/Images/00001")).unwrap();
    match cmd_check(dir.path(), &mut Vec::new()) {
        Err(CliError::Dataset(DatasetError::MissingClassDirectory(p))) => {
            assert!(p.ends_with("00001"))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn features_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    dataset(&dir.path().join("data"), 3);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let sets = cmd_features(
        &dir.path().join("data"),
        "YUV-HOG",
        7,
        false,
        &a,
        &mut Vec::new(),
    )
    .unwrap();
    cmd_features(
        &dir.path().join("data"),
        "YUV-HOG",
        7,
        false,
        &b,
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(sets.train.dim(), 324);
    assert_eq!(
        (sets.train.len(), sets.validation.len(), sets.test.len()),
        (28, 8, 12)
    );
    for suffix in ["train", "val", "test"] {
        let bytes = fs::read(suffixed(&a, suffix)).unwrap();
        assert_eq!(bytes, fs::read(suffixed(&b, suffix)).unwrap());
        let cache = FeatureCache::decode(&bytes).unwrap();
        assert_eq!(cache.pipeline, "YUV-HOG");
        assert_eq!(cache.seed, 7);
    }
    let other = dir.path().join("c");
    cmd_features(
        &dir.path().join("data"),
        "YUV-HOG",
        8,
        false,
        &other,
        &mut Vec::new(),
    )
    .unwrap();
    assert_ne!(
        fs::read(suffixed(&a, "train")).unwrap(),
        fs::read(suffixed(&other, "train")).unwrap()
    );
}

#[test]
fn unknown_pipeline_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_features(
        dir.path(),
        "FOO-HOG",
        0,
        false,
        &dir.path().join("f"),
        &mut Vec::new(),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        CliError::Pipeline(PipelineError::UnknownPipelineName { .. })
    ));
    let msg = err.to_string();
    for kind in PipelineKind::ALL {
        assert!(msg.contains(kind.name()), "{msg}");
    }
}

#[test]
fn train_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    dataset(&dir.path().join("data"), 3);
    let prefix = dir.path().join("f");
    cmd_features(
        &dir.path().join("data"),
        "HOG",
        1,
        true,
        &prefix,
        &mut Vec::new(),
    )
    .unwrap();
    let model_path = dir.path().join("m.tsrm");
    let mut log = Vec::new();
    let fit = cmd_train(
        &suffixed(&prefix, "train"),
        &TrainConfig::default(),
        &model_path,
        &mut log,
    )
    .unwrap();
    assert_eq!(fit.model.c, 20.5557);
    assert_eq!(fit.model.gamma, 0.2167);
    assert_eq!(load_model(&model_path).unwrap(), fit.model);
    let log = String::from_utf8(log).unwrap();
    assert_eq!(log.matches("converged").count(), 3 + 1);

    // scoring the training cache with its own model
    let report = cmd_eval(
        &model_path,
        &suffixed(&prefix, "train"),
        "md",
        None,
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(report.scores.accuracy, 1.0);
    assert_eq!(report.split, Split::Test);
    let mut out = Vec::new();
    let report = cmd_eval(
        &model_path,
        &suffixed(&prefix, "val"),
        "csv",
        None,
        &mut out,
    )
    .unwrap();
    assert_eq!(report.split, Split::Validation);
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("Method;F1 Score;Accuracy;Precision;Recall\nHOG;"));

    let report_path = dir.path().join("r.csv");
    cmd_eval(
        &model_path,
        &suffixed(&prefix, "test"),
        "csv",
        Some(&report_path),
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(
        parse_csv(&fs::read_to_string(report_path).unwrap())
            .unwrap()
            .len(),
        1
    );

    assert!(matches!(
        cmd_eval(
            &model_path,
            &suffixed(&prefix, "val"),
            "xml",
            None,
            &mut Vec::new()
        ),
        Err(CliError::UnknownFormat(_))
    ));
}

#[test]
fn train_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut one = FeatureCache::new("HOG", 0, 2);
    one.push(3, &[0.0, 1.0]).unwrap();
    one.push(3, &[1.0, 0.0]).unwrap();
    let path = dir.path().join("one.train");
    one.write(&path).unwrap();
    let model = dir.path().join("m");
    assert!(matches!(
        cmd_train(&path, &TrainConfig::default(), &model, &mut Vec::new()),
        Err(CliError::Svm(SvmError::FewerThanTwoClasses(1)))
    ));

    let mut bytes = fs::read(&path).unwrap();
    bytes[20] ^= 0xff;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        cmd_train(&path, &TrainConfig::default(), &model, &mut Vec::new()),
        Err(CliError::Cache(CacheError::ChecksumMismatch { .. }))
    ));
}

#[test]
fn eval_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let mut train = FeatureCache::new("HOG", 0, 2);
    for (l, x) in [
        (0, [0.0, 0.0]),
        (0, [0.1, 0.0]),
        (1, [1.0, 1.0]),
        (1, [0.9, 1.0]),
    ] {
        train.push(l, &x).unwrap();
    }
    train.write(&dir.path().join("t.train")).unwrap();
    cmd_train(
        &dir.path().join("t.train"),
        &TrainConfig::default(),
        &dir.path().join("m"),
        &mut Vec::new(),
    )
    .unwrap();
    let mut wide = FeatureCache::new("HOG", 0, 3);
    wide.push(0, &[0.0, 0.0, 0.0]).unwrap();
    wide.write(&dir.path().join("w.test")).unwrap();
    assert!(matches!(
        cmd_eval(
            &dir.path().join("m"),
            &dir.path().join("w.test"),
            "md",
            None,
            &mut Vec::new()
        ),
        Err(CliError::DimensionMismatch { model: 2, cache: 3 })
    ));
}

#[test]
fn bench_tables() {
    let dir = tempfile::tempdir().unwrap();
    dataset(&dir.path().join("data"), 3);
    let out_dir = dir.path().join("bench");
    let report = cmd_bench(
        &dir.path().join("data"),
        2,
        false,
        &out_dir,
        &mut Vec::new(),
    )
    .unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.test.pipeline.name()).collect();
    assert_eq!(names, PipelineKind::ALL.map(|k| k.name()));
    for file in [
        "tables-1.md",
        "tables-1.csv",
        "tables-2.md",
        "tables-2.csv",
        "tables-1-weighted.csv",
        "tables-2-weighted.md",
        "timing.md",
    ] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    let timing = fs::read_to_string(out_dir.join("timing.md")).unwrap();
    for kind in PipelineKind::ALL {
        assert!(timing.contains(&format!("| {} |", kind.name())));
    }
    let parsed = parse_csv(&fs::read_to_string(out_dir.join("tables-2.csv")).unwrap()).unwrap();
    let six = |v: f64| format!("{v:.6}").parse::<f64>().unwrap();
    for (row, bench) in parsed.iter().zip(&report.rows) {
        let mem = TableRow::from_report(&bench.test, Averaging::Macro);
        assert_eq!(row.method, mem.method);
        assert_eq!(row.accuracy, six(mem.accuracy));
        assert_eq!(row.f1, six(mem.f1));
        assert_eq!(row.precision, six(mem.precision));
        assert_eq!(row.recall, six(mem.recall));
    }
}

#[test]
fn tune_command() {
    let dir = tempfile::tempdir().unwrap();
    dataset(&dir.path().join("data"), 3);
    let prefix = dir.path().join("f");
    cmd_features(
        &dir.path().join("data"),
        "HOG",
        1,
        false,
        &prefix,
        &mut Vec::new(),
    )
    .unwrap();
    let config = dir.path().join("tuned.txt");
    let mut a = Vec::new();
    let r = cmd_tune(&suffixed(&prefix, "train"), 4, Some(&config), &mut a).unwrap();
    assert!(r.c() > 5.0 && r.c() < 25.0);
    assert!(r.gamma() > 0.05 && r.gamma() < 0.35);
    let mut b = Vec::new();
    cmd_tune(&suffixed(&prefix, "train"), 4, None, &mut b).unwrap();
    assert_eq!(a, b);
    let text = fs::read_to_string(config).unwrap();
    assert!(text.starts_with(&format!("c = {}\n", r.c())));

    let mut tiny = FeatureCache::new("HOG", 0, 1);
    for (l, x) in [(0, 0.0), (0, 0.1), (1, 1.0)] {
        tiny.push(l, &[x]).unwrap();
    }
    tiny.write(&dir.path().join("tiny.train")).unwrap();
    assert!(matches!(
        cmd_tune(&dir.path().join("tiny.train"), 0, None, &mut Vec::new()),
        Err(CliError::Tune(TuneError::TooFewSamples { .. }))
    ));
}
