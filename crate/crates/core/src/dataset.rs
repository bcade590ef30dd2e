//! GTSRB ingestion: annotation CSVs, decoding, resizing and the seeded split.
//!
//! Training layout: `<root>/00000 .. <root>/000NN`, each holding
//! `GT-000NN.csv` plus the PPM files it names. Test layout: a flat folder of
//! PPM files and one CSV with the same schema.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::imgcore::{self, Image, ImageError};
use crate::pipeline::INPUT_SIZE;
use crate::rng::XorShift64Star;

pub const NUM_CLASSES: u32 = 43;
pub const CSV_HEADER: [&str; 8] = [
    "Filename", "Width", "Height", "Roi.X1", "Roi.Y1", "Roi.X2", "Roi.Y2", "ClassId",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("annotation file has no header line")]
    MissingHeader,
    #[error("row {row}: expected 8 fields, found {found}")]
    BadFieldCount { row: usize, found: usize },
    #[error("row {row}: column {column} is not a number")]
    NonNumericField { row: usize, column: &'static str },
    #[error("row {row}: ROI lies outside the image")]
    RoiOutOfBounds { row: usize },
    #[error("row {row}: class id {class_id} outside 0..{NUM_CLASSES}")]
    ClassOutOfRange { row: usize, class_id: u32 },
    #[error("{path}: {source}")]
    Annotation {
        path: PathBuf,
        #[source]
        source: Box<DatasetError>,
    },
    #[error("no class directories under {0}")]
    NoClassDirectories(PathBuf),
    #[error("missing class directory {0}")]
    MissingClassDirectory(PathBuf),
    #[error("missing annotation file {0}")]
    MissingAnnotationFile(PathBuf),
    #[error("{} image(s) failed to load, first: {}", .0.len(), .0.first().map(|(p, e)| format!("{}: {e}", p.display())).unwrap_or_default())]
    Decode(Vec<(PathBuf, String)>),
    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub filename: String,
    pub width: u32,
    pub height: u32,
    /// (x1, y1, x2, y2), with `x2`/`y2` exclusive.
    pub roi: (u32, u32, u32, u32),
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub label: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Crop to the annotated ROI before resizing.
    pub roi_crop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.8,
            seed,
        }
    }
}

pub fn parse_annotation_csv(text: &str) -> Result<Vec<Annotation>, DatasetError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: Vec<&str> = header.trim().split(';').map(str::trim).collect();
    if header != CSV_HEADER {
        return Err(DatasetError::MissingHeader);
    }
    lines
        .map(|(i, line)| parse_row(i + 1, line.trim_end_matches('\r')))
        .collect()
}

fn parse_row(row: usize, line: &str) -> Result<Annotation, DatasetError> {
    let fields: Vec<&str> = line.split(';').map(str::trim).collect();
    if fields.len() != CSV_HEADER.len() {
        return Err(DatasetError::BadFieldCount {
            row,
            found: fields.len(),
        });
    }
    let num = |i: usize| -> Result<u32, DatasetError> {
        fields[i]
            .parse()
            .map_err(|_| DatasetError::NonNumericField {
                row,
                column: CSV_HEADER[i],
            })
    };
    let (width, height) = (num(1)?, num(2)?);
    let roi = (num(3)?, num(4)?, num(5)?, num(6)?);
    let class_id = num(7)?;
    if !(roi.0 < roi.2 && roi.2 <= width && roi.1 < roi.3 && roi.3 <= height) {
        return Err(DatasetError::RoiOutOfBounds { row });
    }
    if class_id >= NUM_CLASSES {
        return Err(DatasetError::ClassOutOfRange { row, class_id });
    }
    Ok(Annotation {
        filename: fields[0].to_string(),
        width,
        height,
        roi,
        class_id,
    })
}

fn read_annotations(path: &Path) -> Result<Vec<Annotation>, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingAnnotationFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotation_csv(&text).map_err(|e| DatasetError::Annotation {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

/// Decode, optionally crop, and resize one annotated file.
pub fn load_image(path: &Path, ann: &Annotation, opts: LoadOptions) -> Result<Image, String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let mut img = imgcore::decode_ppm(&bytes).map_err(|e| e.to_string())?;
    if img.color_space() == imgcore::ColorSpace::Gray {
        let g = img.data().iter().flat_map(|&v| [v, v, v]).collect();
        img = Image::new(img.width(), img.height(), imgcore::ColorSpace::Bgr, g)
            .map_err(|e: ImageError| e.to_string())?;
    }
    if opts.roi_crop {
        let (x1, y1, x2, y2) = ann.roi;
        img = img
            .crop(x1 as usize, y1 as usize, x2 as usize, y2 as usize)
            .map_err(|e| e.to_string())?;
    }
    imgcore::resize_bilinear(&img, INPUT_SIZE, INPUT_SIZE).map_err(|e| e.to_string())
}

fn load_all(
    jobs: Vec<(PathBuf, Annotation)>,
    opts: LoadOptions,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let results: Vec<Result<LabeledSample, (PathBuf, String)>> = jobs
        .into_par_iter()
        .map(|(path, ann)| {
            load_image(&path, &ann, opts)
                .map(|image| LabeledSample {
                    image,
                    label: ann.class_id,
                })
                .map_err(|e| (path, e))
        })
        .collect();
    let mut failures = Vec::new();
    let mut samples = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    if failures.is_empty() {
        Ok(samples)
    } else {
        Err(DatasetError::Decode(failures))
    }
}

/// Class directories `00000..` under `root`, which must be contiguous from 0.
pub fn class_directories(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let entries = fs::read_dir(root).map_err(|source| DatasetError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| DatasetError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if entry.path().is_dir() && name.len() == 5 && name.bytes().all(|b| b.is_ascii_digit()) {
            ids.push(name.parse::<u32>().expect("five digits"));
        }
    }
    ids.sort_unstable();
    let Some(&max) = ids.last() else {
        return Err(DatasetError::NoClassDirectories(root.to_path_buf()));
    };
    for id in 0..=max {
        if ids.binary_search(&id).is_err() {
            return Err(DatasetError::MissingClassDirectory(
                root.join(format!("{id:05}")),
            ));
        }
    }
    Ok(ids.iter().map(|id| root.join(format!("{id:05}"))).collect())
}

/// Annotations of the training pool, per class directory in ascending order.
pub fn training_annotations(root: &Path) -> Result<Vec<(PathBuf, Annotation)>, DatasetError> {
    let mut jobs = Vec::new();
    for dir in class_directories(root)? {
        let name = dir
            .file_name()
            .expect("dir name")
            .to_string_lossy()
            .into_owned();
        for ann in read_annotations(&dir.join(format!("GT-{name}.csv")))? {
            jobs.push((dir.join(&ann.filename), ann));
        }
    }
    Ok(jobs)
}

/// Every annotated training image resized to 32×32, ordered by class
/// directory and then CSV row.
pub fn load_training_pool(
    root: &Path,
    opts: LoadOptions,
) -> Result<Vec<LabeledSample>, DatasetError> {
    load_all(training_annotations(root)?, opts)
}

pub fn load_test_set(
    root: &Path,
    gt_csv: &Path,
    opts: LoadOptions,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let jobs = read_annotations(gt_csv)?
        .into_iter()
        .map(|ann| (root.join(&ann.filename), ann))
        .collect();
    load_all(jobs, opts)
}

/// Seeded Fisher–Yates shuffle, then the first `floor(fraction·N)` go to training.
pub fn shuffle_split<T>(
    mut samples: Vec<T>,
    cfg: &SplitConfig,
) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(cfg.train_fraction));
    }
    if samples.len() < 2 {
        return Err(DatasetError::TooFewSamples(samples.len()));
    }
    XorShift64Star::new(cfg.seed).shuffle(&mut samples);
    let n_train = (cfg.train_fraction * samples.len() as f64).floor() as usize;
    let validation = samples.split_off(n_train);
    Ok((samples, validation))
}
