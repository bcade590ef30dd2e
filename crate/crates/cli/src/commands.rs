use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;
use tsr_core::dataset::{
    load_test_set, load_training_pool, shuffle_split, training_annotations, DatasetError,
    LabeledSample, LoadOptions, SplitConfig,
};
use tsr_core::hog::HogConfig;
use tsr_core::metrics::{confusion, EvalReport, MetricsError, Split};
use tsr_core::pipeline::{apply_pipeline, PipelineError, PipelineKind};
use tsr_core::svm::{
    load_model, save_model, train_multiclass, CompiledModel, MulticlassFit, MulticlassSvmModel,
    SvmError, TrainConfig,
};
use tsr_core::tuning::{two_stage_search, SearchResult, TuneError, TwoStageResult};

use crate::cache::{CacheError, FeatureCache};
use crate::report::{render, Averaging, ReportFormat, TableRow, UnknownFormat};
use crate::synth::{write_synthetic_gtsrb, SynthConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    UnknownFormat(#[from] UnknownFormat),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model expects {model}-dimensional features but the cache holds {cache}")]
    DimensionMismatch { model: usize, cache: usize },
    #[error("feature cache {0} is empty")]
    EmptyCache(PathBuf),
    #[error("{} pipeline(s) failed: {}", .0.len(), describe_failures(.0))]
    Bench(Vec<(PipelineKind, String)>),
}

fn describe_failures(failures: &[(PipelineKind, String)]) -> String {
    failures
        .iter()
        .map(|(k, e)| format!("{k}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(io_err(Path::new("<output>")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Where the training pool and test set live under a data root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub train_dir: PathBuf,
    pub test_dir: PathBuf,
    pub test_csv: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        let test_dir = root.join("Final_Test").join("Images");
        Self {
            train_dir: root.join("Final_Training").join("Images"),
            test_csv: test_dir.join("GT-final_test.csv"),
            test_dir,
        }
    }
}

/// `prefix` with `.suffix` appended to its file name.
pub fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub class_counts: Vec<usize>,
    pub total: usize,
    /// Counts of the longer image side in `[0,30)`, `[30,50)`, `[50,100)`, `[100,∞)`.
    pub size_histogram: [usize; 4],
    pub test_total: Option<usize>,
}

impl DatasetSummary {
    pub fn imbalance_ratio(&self) -> f64 {
        let max = self.class_counts.iter().copied().max().unwrap_or(0);
        let min = self.class_counts.iter().copied().min().unwrap_or(0);
        if min == 0 {
            f64::INFINITY
        } else {
            max as f64 / min as f64
        }
    }
}

const SIZE_BUCKETS: [&str; 4] = ["<30", "30-49", "50-99", ">=100"];

pub fn cmd_check(data_root: &Path, out: &mut dyn Write) -> Result<DatasetSummary, CliError> {
    let layout = Layout::new(data_root);
    let anns = training_annotations(&layout.train_dir)?;
    let classes = anns
        .iter()
        .map(|(_, a)| a.class_id as usize + 1)
        .max()
        .unwrap_or(0);
    let mut class_counts = vec![0usize; classes];
    let mut size_histogram = [0usize; 4];
    for (_, a) in &anns {
        class_counts[a.class_id as usize] += 1;
        let side = a.width.max(a.height);
        size_histogram[match side {
            0..=29 => 0,
            30..=49 => 1,
            50..=99 => 2,
            _ => 3,
        }] += 1;
    }
    let test_total = if layout.test_csv.exists() {
        let text = fs::read_to_string(&layout.test_csv).map_err(io_err(&layout.test_csv))?;
        Some(tsr_core::dataset::parse_annotation_csv(&text)?.len())
    } else {
        None
    };
    let summary = DatasetSummary {
        class_counts,
        total: anns.len(),
        size_histogram,
        test_total,
    };

    let mut text = String::new();
    let _ = writeln!(
        text,
        "training images: {} in {} classes",
        summary.total,
        summary.class_counts.len()
    );
    let _ = writeln!(text, "class  count");
    for (c, n) in summary.class_counts.iter().enumerate() {
        let _ = writeln!(text, "{c:05}  {n}");
    }
    let _ = writeln!(
        text,
        "imbalance (max/min): {:.2}",
        summary.imbalance_ratio()
    );
    let _ = writeln!(text, "longer side:");
    for (label, n) in SIZE_BUCKETS.iter().zip(summary.size_histogram) {
        let _ = writeln!(text, "  {label:>6}: {n}");
    }
    match summary.test_total {
        Some(n) => {
            let _ = writeln!(text, "test images: {n}");
        }
        None => {
            let _ = writeln!(
                text,
                "test annotations not found at {}",
                layout.test_csv.display()
            );
        }
    }
    emit(out, &text)?;
    Ok(summary)
}

/// Descriptors for every sample, in input order.
pub fn extract(
    samples: &[LabeledSample],
    kind: PipelineKind,
    seed: u64,
) -> Result<FeatureCache, CliError> {
    let hog = HogConfig::default();
    let rows = samples
        .par_iter()
        .map(|s| apply_pipeline(kind, &s.image, &hog).map(|f| (s.label, f)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cache = FeatureCache::new(kind.name(), seed, hog.descriptor_len());
    for (label, f) in rows {
        cache.push(label, f.values())?;
    }
    Ok(cache)
}

/// Images shared by every pipeline: the seeded 80:20 split of the pool and the test set.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Vec<LabeledSample>,
    pub validation: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

pub fn load_data(data_root: &Path, seed: u64, roi_crop: bool) -> Result<LoadedData, CliError> {
    let layout = Layout::new(data_root);
    let opts = LoadOptions { roi_crop };
    let pool = load_training_pool(&layout.train_dir, opts)?;
    let (train, validation) = shuffle_split(pool, &SplitConfig::new(seed))?;
    let test = load_test_set(&layout.test_dir, &layout.test_csv, opts)?;
    Ok(LoadedData {
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct FeatureSets {
    pub train: FeatureCache,
    pub validation: FeatureCache,
    pub test: FeatureCache,
}

pub fn build_features(
    data: &LoadedData,
    kind: PipelineKind,
    seed: u64,
) -> Result<FeatureSets, CliError> {
    Ok(FeatureSets {
        train: extract(&data.train, kind, seed)?,
        validation: extract(&data.validation, kind, seed)?,
        test: extract(&data.test, kind, seed)?,
    })
}

/// Writes `<out_prefix>.train`, `<out_prefix>.val` and `<out_prefix>.test`.
pub fn cmd_features(
    data_root: &Path,
    pipeline: &str,
    seed: u64,
    roi_crop: bool,
    out_prefix: &Path,
    out: &mut dyn Write,
) -> Result<FeatureSets, CliError> {
    let kind: PipelineKind = pipeline.parse()?;
    let data = load_data(data_root, seed, roi_crop)?;
    let sets = build_features(&data, kind, seed)?;
    for (suffix, cache) in [
        ("train", &sets.train),
        ("val", &sets.validation),
        ("test", &sets.test),
    ] {
        let path = suffixed(out_prefix, suffix);
        cache.write(&path)?;
        emit(
            out,
            &format!(
                "{}: {} rows of dim {}\n",
                path.display(),
                cache.len(),
                cache.dim()
            ),
        )?;
    }
    Ok(sets)
}

fn read_nonempty(path: &Path) -> Result<FeatureCache, CliError> {
    let cache = FeatureCache::read(path)?;
    if cache.is_empty() {
        return Err(CliError::EmptyCache(path.to_path_buf()));
    }
    Ok(cache)
}

pub fn train_on(cache: &FeatureCache, cfg: &TrainConfig) -> Result<MulticlassFit, CliError> {
    Ok(train_multiclass(&cache.rows(), cache.labels(), cfg)?)
}

fn convergence_lines(fit: &MulticlassFit) -> String {
    let mut text = String::new();
    for p in &fit.pair_stats {
        let _ = writeln!(
            text,
            "pair {:>2}/{:<2} samples {:>5} sv {:>5} iterations {:>8} gap {:.2e} converged {}",
            p.class_a,
            p.class_b,
            p.samples,
            p.support_vectors,
            p.stats.iterations,
            p.stats.max_violation,
            if p.stats.converged { "yes" } else { "no" }
        );
    }
    let _ = writeln!(
        text,
        "{} pairs, {} not converged",
        fit.pair_stats.len(),
        fit.unconverged().count()
    );
    text
}

pub fn cmd_train(
    cache_path: &Path,
    cfg: &TrainConfig,
    model_out: &Path,
    out: &mut dyn Write,
) -> Result<MulticlassFit, CliError> {
    let cache = read_nonempty(cache_path)?;
    emit(
        out,
        &format!(
            "training on {} rows ({}), C={} gamma={}\n",
            cache.len(),
            cache.pipeline,
            cfg.c,
            cfg.gamma
        ),
    )?;
    let fit = train_on(&cache, cfg)?;
    save_model(&fit.model, model_out)?;
    emit(out, &convergence_lines(&fit))?;
    Ok(fit)
}

pub fn evaluate(
    model: &MulticlassSvmModel,
    cache: &FeatureCache,
    kind: PipelineKind,
    split: Split,
) -> Result<EvalReport, CliError> {
    if model.dim() != cache.dim() {
        return Err(CliError::DimensionMismatch {
            model: model.dim(),
            cache: cache.dim(),
        });
    }
    let predicted = CompiledModel::new(model).predict_batch(&cache.rows())?;
    let k = model
        .classes
        .iter()
        .chain(cache.labels())
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let cm = confusion(cache.labels(), &predicted, k)?;
    Ok(EvalReport::new(kind, split, &cm)?)
}

fn split_of(path: &Path) -> Split {
    match path.extension().and_then(|e| e.to_str()) {
        Some("val") => Split::Validation,
        _ => Split::Test,
    }
}

/// Scores a cache; the split is `validation` for `*.val` files and `test` otherwise.
pub fn cmd_eval(
    model_path: &Path,
    cache_path: &Path,
    format: &str,
    report_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<EvalReport, CliError> {
    let format: ReportFormat = format.parse()?;
    let model = load_model(model_path)?;
    let cache = read_nonempty(cache_path)?;
    let kind: PipelineKind = cache.pipeline.parse()?;
    let report = evaluate(&model, &cache, kind, split_of(cache_path))?;
    let table = render(&[TableRow::from_report(&report, Averaging::Macro)], format);
    match report_out {
        Some(path) => write_file(path, &table)?,
        None => emit(out, &table)?,
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub preprocess_s: f64,
    pub train_s: f64,
    pub eval_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub validation: EvalReport,
    pub test: EvalReport,
    pub timing: Timing,
    pub pairs: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub load_s: f64,
    pub rows: Vec<BenchRow>,
}

fn bench_one(data: &LoadedData, kind: PipelineKind, seed: u64) -> Result<BenchRow, CliError> {
    let t0 = Instant::now();
    let sets = build_features(data, kind, seed)?;
    let preprocess_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let fit = train_on(&sets.train, &TrainConfig::default())?;
    let train_s = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let validation = evaluate(&fit.model, &sets.validation, kind, Split::Validation)?;
    let test = evaluate(&fit.model, &sets.test, kind, Split::Test)?;
    let eval_s = t2.elapsed().as_secs_f64();
    Ok(BenchRow {
        validation,
        test,
        timing: Timing {
            preprocess_s,
            train_s,
            eval_s,
        },
        pairs: fit.pair_stats.len(),
        unconverged: fit.unconverged().count(),
    })
}

pub fn timing_summary(report: &BenchReport) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "image loading: {:.3} s\n", report.load_s);
    let _ = writeln!(
        text,
        "| Method | Preprocessing (s) | Training (s) | Evaluation (s) | Pairs | Unconverged pairs |"
    );
    let _ = writeln!(text, "|---|---:|---:|---:|---:|---:|");
    for r in &report.rows {
        let _ = writeln!(
            text,
            "| {} | {:.3} | {:.3} | {:.3} | {} | {} |",
            r.test.pipeline,
            r.timing.preprocess_s,
            r.timing.train_s,
            r.timing.eval_s,
            r.pairs,
            r.unconverged
        );
    }
    text
}

/// Every pipeline with default hyperparameters; writes `tables-1` (validation)
/// and `tables-2` (test) in markdown and CSV, weighted-average variants and
/// `timing.md`. Fails after writing if any pipeline failed.
pub fn cmd_bench(
    data_root: &Path,
    seed: u64,
    roi_crop: bool,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<BenchReport, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let t0 = Instant::now();
    let data = load_data(data_root, seed, roi_crop)?;
    let load_s = t0.elapsed().as_secs_f64();
    emit(
        out,
        &format!(
            "loaded {} train, {} validation, {} test images in {load_s:.1} s\n",
            data.train.len(),
            data.validation.len(),
            data.test.len()
        ),
    )?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for kind in PipelineKind::ALL {
        match bench_one(&data, kind, seed) {
            Ok(row) => {
                emit(
                    out,
                    &format!(
                        "{kind}: validation accuracy {:.6}, test accuracy {:.6} ({:.1} s)\n",
                        row.validation.scores.accuracy,
                        row.test.scores.accuracy,
                        row.timing.preprocess_s + row.timing.train_s + row.timing.eval_s
                    ),
                )?;
                rows.push(row);
            }
            Err(e) => {
                emit(out, &format!("{kind}: FAILED: {e}\n"))?;
                failures.push((kind, e.to_string()));
            }
        }
    }

    let report = BenchReport { load_s, rows };
    for (stem, pick) in [
        (
            "tables-1",
            (|r: &BenchRow| &r.validation) as fn(&BenchRow) -> &EvalReport,
        ),
        ("tables-2", |r: &BenchRow| &r.test),
    ] {
        for (suffix, averaging) in [("", Averaging::Macro), ("-weighted", Averaging::Weighted)] {
            let table: Vec<TableRow> = report
                .rows
                .iter()
                .map(|r| TableRow::from_report(pick(r), averaging))
                .collect();
            for format in [ReportFormat::Markdown, ReportFormat::Csv] {
                let path = out_dir.join(format!("{stem}{suffix}.{}", format.extension()));
                write_file(&path, &render(&table, format))?;
            }
        }
    }
    write_file(&out_dir.join("timing.md"), &timing_summary(&report))?;

    if failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Bench(failures))
    }
}

fn stage_lines(name: &str, folds: usize, r: &SearchResult) -> String {
    let mut text = format!("{name} ({folds}-fold):\n");
    for c in &r.evaluated {
        let mark = if *c == r.best { " *" } else { "" };
        let _ = writeln!(
            text,
            "  C={:<10.4} gamma={:<8.4} score={:.6}{mark}",
            c.c, c.gamma, c.score
        );
    }
    text
}

/// Two-stage search; optionally writes `c = …` / `gamma = …` to `config_out`.
pub fn cmd_tune(
    cache_path: &Path,
    seed: u64,
    config_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<TwoStageResult, CliError> {
    let cache = read_nonempty(cache_path)?;
    let result = two_stage_search(&cache.rows(), cache.labels(), seed)?;
    emit(out, &stage_lines("stage 1", 5, &result.wide))?;
    emit(out, &stage_lines("stage 2", 3, &result.narrow))?;
    let config = format!("c = {}\ngamma = {}\n", result.c(), result.gamma());
    emit(out, &config)?;
    if let Some(path) = config_out {
        write_file(path, &config)?;
    }
    Ok(result)
}

pub fn cmd_synth(out_dir: &Path, cfg: &SynthConfig, out: &mut dyn Write) -> Result<(), CliError> {
    write_synthetic_gtsrb(out_dir, cfg).map_err(io_err(out_dir))?;
    emit(
        out,
        &format!(
            "wrote {} classes x {} training and {} test images to {}\n",
            cfg.classes,
            cfg.train_per_class,
            cfg.test_per_class,
            out_dir.display()
        ),
    )
}
