//! Randomized hyperparameter search over (C, gamma) scored by k-fold
//! cross-validation.
//!
//! A stage draws `samples_per_axis` values per axis (C uniform, gamma
//! log-uniform), forms the full grid of combinations and evaluates
//! `iterations` distinct cells of it. Folds, draws and cell order all come
//! from the stage seed, so the grid and folds do not depend on the budget.

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::XorShift64Star;
use crate::svm::{train_multiclass, CompiledModel, SvmError, TrainConfig};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("too few samples: {n} samples for {k} folds (smallest class has {smallest_class})")]
    TooFewSamples {
        n: usize,
        k: usize,
        smallest_class: usize,
    },
    #[error("invalid search stage: {0}")]
    InvalidStage(String),
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error(transparent)]
    Svm(#[from] SvmError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchStage {
    pub c_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub samples_per_axis: usize,
    pub iterations: usize,
    pub folds: usize,
    pub seed: u64,
}

impl SearchStage {
    /// Wide first pass: 0.5 < C < 50, 0.01 < gamma < 1, 5 folds.
    pub fn wide(seed: u64) -> Self {
        Self {
            c_range: (0.5, 50.0),
            gamma_range: (0.01, 1.0),
            samples_per_axis: 10,
            iterations: 10,
            folds: 5,
            seed,
        }
    }

    /// Narrow second pass: 5 < C < 25, 0.05 < gamma < 0.35, 3 folds.
    pub fn narrow(seed: u64) -> Self {
        Self {
            c_range: (5.0, 25.0),
            gamma_range: (0.05, 0.35),
            samples_per_axis: 10,
            iterations: 10,
            folds: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        let (cl, ch) = self.c_range;
        let (gl, gh) = self.gamma_range;
        if !(cl > 0.0 && cl < ch && ch.is_finite()) {
            return Err(TuneError::InvalidStage(format!("bad C range ({cl}, {ch})")));
        }
        if !(gl > 0.0 && gl < gh && gh.is_finite()) {
            return Err(TuneError::InvalidStage(format!(
                "bad gamma range ({gl}, {gh})"
            )));
        }
        if self.folds < 2 {
            return Err(TuneError::InvalidStage(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.samples_per_axis == 0
            || self.iterations == 0
            || self.iterations > self.samples_per_axis * self.samples_per_axis
        {
            return Err(TuneError::InvalidStage(format!(
                "iterations {} must lie in 1..={}",
                self.iterations,
                self.samples_per_axis * self.samples_per_axis
            )));
        }
        Ok(())
    }

    /// Per-axis draws and the order in which grid cells are visited.
    pub fn grid(&self) -> (Vec<f64>, Vec<f64>, Vec<(usize, usize)>) {
        let mut rng = XorShift64Star::new(self.seed);
        let (cl, ch) = self.c_range;
        let cs: Vec<f64> = (0..self.samples_per_axis)
            .map(|_| cl + rng.next_f64() * (ch - cl))
            .collect();
        let (gl, gh) = (self.gamma_range.0.ln(), self.gamma_range.1.ln());
        let gammas: Vec<f64> = (0..self.samples_per_axis)
            .map(|_| (gl + rng.next_f64() * (gh - gl)).exp())
            .collect();
        let n = self.samples_per_axis;
        let mut cells: Vec<(usize, usize)> = (0..n * n).map(|i| (i / n, i % n)).collect();
        rng.shuffle(&mut cells);
        (cs, gammas, cells)
    }
}

/// Shuffle `0..n` and cut it into `k` folds; the first `n % k` folds get one extra index.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TuneError> {
    if k < 2 || n < k {
        return Err(TuneError::TooFewSamples {
            n,
            k,
            smallest_class: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    XorShift64Star::new(seed).shuffle(&mut idx);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn check_inputs<F>(features: &[F], labels: &[u32], k: usize) -> Result<(), TuneError> {
    if features.len() != labels.len() {
        return Err(TuneError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let smallest_class = counts.values().copied().min().unwrap_or(0);
    // a class seen once can never be in both a training and a validation fold
    if labels.len() < k || smallest_class < 2 {
        return Err(TuneError::TooFewSamples {
            n: labels.len(),
            k,
            smallest_class,
        });
    }
    Ok(())
}

/// Validation accuracy on each fold after training on the others.
/// A training fold holding a single class predicts that class everywhere.
fn fold_accuracy<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    folds: &[Vec<usize>],
    held_out: usize,
    cfg: &TrainConfig,
) -> Result<f64, TuneError> {
    let val = &folds[held_out];
    let train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != held_out)
        .flat_map(|(_, ix)| ix.iter().copied())
        .collect();
    let xs: Vec<&[f32]> = train.iter().map(|&i| features[i].as_ref()).collect();
    let ys: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
    let predictions: Vec<u32> = if ys.iter().all(|&y| y == ys[0]) {
        vec![ys[0]; val.len()]
    } else {
        let model = CompiledModel::new(&train_multiclass(&xs, &ys, cfg)?.model);
        let rows: Vec<&[f32]> = val.iter().map(|&i| features[i].as_ref()).collect();
        model.predict_batch(&rows)?
    };
    let hits = val
        .iter()
        .zip(&predictions)
        .filter(|&(&i, &p)| labels[i] == p)
        .count();
    Ok(hits as f64 / val.len() as f64)
}

fn cv_with_folds<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    folds: &[Vec<usize>],
    cfg: &TrainConfig,
) -> Result<f64, TuneError> {
    let mut total = 0.0;
    for f in 0..folds.len() {
        total += fold_accuracy(features, labels, folds, f, cfg)?;
    }
    Ok(total / folds.len() as f64)
}

/// Mean held-out accuracy over `k` seeded folds.
pub fn cv_score<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    c: f64,
    gamma: f64,
    k: usize,
    seed: u64,
) -> Result<f64, TuneError> {
    check_inputs(features, labels, k)?;
    let folds = kfold_indices(labels.len(), k, seed)?;
    cv_with_folds(features, labels, &folds, &TrainConfig::new(c, gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub c: f64,
    pub gamma: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Candidate,
    /// In evaluation order.
    pub evaluated: Vec<Candidate>,
}

/// Higher score wins, then smaller C, then smaller gamma.
fn better(a: &Candidate, b: &Candidate) -> bool {
    a.score > b.score || (a.score == b.score && (a.c < b.c || (a.c == b.c && a.gamma < b.gamma)))
}

pub fn random_search<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    stage: &SearchStage,
) -> Result<SearchResult, TuneError> {
    stage.validate()?;
    check_inputs(features, labels, stage.folds)?;
    let folds = kfold_indices(labels.len(), stage.folds, stage.seed)?;
    let (cs, gammas, cells) = stage.grid();
    let evaluated = cells[..stage.iterations]
        .par_iter()
        .map(|&(i, j)| {
            let (c, gamma) = (cs[i], gammas[j]);
            let score = cv_with_folds(features, labels, &folds, &TrainConfig::new(c, gamma))?;
            Ok(Candidate { c, gamma, score })
        })
        .collect::<Result<Vec<_>, TuneError>>()?;
    let best = evaluated
        .iter()
        .copied()
        .reduce(|acc, x| if better(&x, &acc) { x } else { acc })
        .expect("at least one iteration");
    Ok(SearchResult { best, evaluated })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageResult {
    pub wide: SearchResult,
    pub narrow: SearchResult,
}

impl TwoStageResult {
    pub fn c(&self) -> f64 {
        self.narrow.best.c
    }

    pub fn gamma(&self) -> f64 {
        self.narrow.best.gamma
    }
}

/// Wide 5-fold pass seeded with `seed`, then the narrow 3-fold pass seeded
/// with `seed + 1`; the narrow winner is the result.
pub fn two_stage_search<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    seed: u64,
) -> Result<TwoStageResult, TuneError> {
    let wide = random_search(features, labels, &SearchStage::wide(seed))?;
    let narrow = random_search(features, labels, &SearchStage::narrow(seed.wrapping_add(1)))?;
    Ok(TwoStageResult { wide, narrow })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs(n_per: usize) -> (Vec<Vec<f32>>, Vec<u32>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n_per {
            let t = i as f32 * 0.7;
            xs.push(vec![0.2 * t.sin(), 0.2 * t.cos()]);
            ys.push(0);
            xs.push(vec![2.0 + 0.2 * t.cos(), 2.0 + 0.2 * t.sin()]);
            ys.push(1);
        }
        (xs, ys)
    }

    #[test]
    fn fold_sizes() {
        let folds = kfold_indices(10, 5, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let sizes: Vec<usize> = kfold_indices(11, 5, 3)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        let mut all: Vec<usize> = kfold_indices(11, 5, 3).unwrap().concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(
            kfold_indices(11, 5, 3).unwrap(),
            kfold_indices(11, 5, 3).unwrap()
        );
        assert_ne!(
            kfold_indices(50, 5, 3).unwrap(),
            kfold_indices(50, 5, 4).unwrap()
        );
        assert!(matches!(
            kfold_indices(3, 5, 0),
            Err(TuneError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn separable_scores_one() {
        let (xs, ys) = two_blobs(10);
        assert_eq!(cv_score(&xs, &ys, 10.0, 0.5, 5, 1).unwrap(), 1.0);
    }

    #[test]
    fn shuffled_labels_near_chance() {
        let mut rng = XorShift64Star::new(99);
        let xs: Vec<Vec<f32>> = (0..40)
            .map(|_| (0..3).map(|_| rng.next_f64() as f32).collect())
            .collect();
        let mut ys: Vec<u32> = (0..40).map(|i| (i % 2) as u32).collect();
        rng.shuffle(&mut ys);
        let s = cv_score(&xs, &ys, 1.0, 1.0, 5, 7).unwrap();
        assert!((s - 0.5).abs() <= 0.15, "score {s}");
    }

    #[test]
    fn leave_one_out() {
        let xs: Vec<Vec<f32>> = (0..6).map(|i| vec![i as f32]).collect();
        let ys = vec![0, 0, 0, 1, 1, 1];
        let s = cv_score(&xs, &ys, 1.0, 1.0, 6, 0).unwrap();
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn single_sample_classes_rejected() {
        let xs: Vec<Vec<f32>> = (0..6).map(|i| vec![i as f32]).collect();
        let ys: Vec<u32> = (0..6).collect();
        assert!(matches!(
            two_stage_search(&xs, &ys, 0),
            Err(TuneError::TooFewSamples {
                smallest_class: 1,
                ..
            })
        ));
    }

    #[test]
    fn candidates_within_ranges_and_reproducible() {
        let (xs, ys) = two_blobs(8);
        for stage in [SearchStage::wide(5), SearchStage::narrow(6)] {
            let r = random_search(&xs, &ys, &stage).unwrap();
            assert_eq!(r.evaluated.len(), 10);
            for cand in &r.evaluated {
                assert!(cand.c > stage.c_range.0 && cand.c < stage.c_range.1);
                assert!(cand.gamma > stage.gamma_range.0 && cand.gamma < stage.gamma_range.1);
            }
            let cells: std::collections::HashSet<(u64, u64)> = r
                .evaluated
                .iter()
                .map(|c| (c.c.to_bits(), c.gamma.to_bits()))
                .collect();
            assert_eq!(cells.len(), 10);
            assert_eq!(random_search(&xs, &ys, &stage).unwrap(), r);
        }
    }

    #[test]
    fn returned_score_is_fresh() {
        let mut rng = XorShift64Star::new(4);
        let xs: Vec<Vec<f32>> = (0..30)
            .map(|_| (0..2).map(|_| rng.next_f64() as f32).collect())
            .collect();
        let ys: Vec<u32> = xs
            .iter()
            .map(|x| u32::from(x[0] + 0.3 * x[1] > 0.6))
            .collect();
        let stage = SearchStage::wide(11);
        let r = random_search(&xs, &ys, &stage).unwrap();
        let again = cv_score(&xs, &ys, r.best.c, r.best.gamma, stage.folds, stage.seed).unwrap();
        assert_eq!(again, r.best.score);
        for cand in &r.evaluated {
            assert!(!better(cand, &r.best));
        }
    }

    #[test]
    fn exhaustive_budget_dominates() {
        let mut rng = XorShift64Star::new(8);
        let xs: Vec<Vec<f32>> = (0..16)
            .map(|_| (0..2).map(|_| rng.next_f64() as f32).collect())
            .collect();
        let ys: Vec<u32> = xs.iter().map(|x| u32::from(x[0] > x[1])).collect();
        let mut stage = SearchStage::wide(2);
        stage.samples_per_axis = 4;
        stage.folds = 2;
        stage.iterations = 5;
        let partial = random_search(&xs, &ys, &stage).unwrap();
        stage.iterations = 16;
        let full = random_search(&xs, &ys, &stage).unwrap();
        assert!(full.best.score >= partial.best.score);
        assert_eq!(&full.evaluated[..5], &partial.evaluated[..]);
    }

    #[test]
    fn stage_validation() {
        let mut s = SearchStage::wide(0);
        assert!(s.validate().is_ok());
        s.iterations = 101;
        assert!(s.validate().is_err());
        let mut s = SearchStage::narrow(0);
        s.folds = 1;
        assert!(s.validate().is_err());
        let mut s = SearchStage::narrow(0);
        s.gamma_range = (0.3, 0.1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn two_stage_lands_in_narrow_ranges() {
        let (xs, ys) = two_blobs(6);
        let r = two_stage_search(&xs, &ys, 3).unwrap();
        assert!(r.c() > 5.0 && r.c() < 25.0);
        assert!(r.gamma() > 0.05 && r.gamma() < 0.35);
        assert_eq!(r.wide.evaluated.len(), 10);
    }
}
