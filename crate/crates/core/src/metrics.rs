//! Confusion matrices and accuracy / precision / recall / F1 summaries.

use std::fmt;

use thiserror::Error;

use crate::pipeline::PipelineKind;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{truth} truth labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} outside 0..{k}")]
    LabelOutOfRange { label: u32, k: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.k..(truth + 1) * self.k]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.row(c).iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, c)).sum()
    }

    pub fn add(&mut self, truth: u32, predicted: u32) -> Result<(), MetricsError> {
        for label in [truth, predicted] {
            if label as usize >= self.k {
                return Err(MetricsError::LabelOutOfRange { label, k: self.k });
            }
        }
        self.counts[truth as usize * self.k + predicted as usize] += 1;
        Ok(())
    }

    /// Sum of two matrices over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.k, other.k, "merging matrices of different size");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let k = rows.len();
        assert!(rows.iter().all(|r| r.len() == k), "matrix must be square");
        Self {
            k,
            counts: rows.concat(),
        }
    }
}

pub fn confusion(
    truth: &[u32],
    predicted: &[u32],
    k: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro means skip classes with no true samples; weighted means weight by support.
pub fn scores(cm: &ConfusionMatrix) -> Result<Scores, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let per_class: Vec<ClassScores> = (0..cm.k())
        .map(|c| {
            let tp = cm.get(c, c);
            let precision = ratio(tp, cm.col_sum(c));
            let recall = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support: cm.row_sum(c),
            }
        })
        .collect();
    let present: Vec<&ClassScores> = per_class.iter().filter(|s| s.support > 0).collect();
    let n = present.len() as f64;
    let mean = |f: fn(&ClassScores) -> f64| present.iter().map(|s| f(s)).sum::<f64>() / n;
    let weighted = |f: fn(&ClassScores) -> f64| {
        present.iter().map(|s| f(s) * s.support as f64).sum::<f64>() / total as f64
    };
    Ok(Scores {
        accuracy: ratio(cm.trace(), total),
        macro_precision: mean(|s| s.precision),
        macro_recall: mean(|s| s.recall),
        macro_f1: mean(|s| s.f1),
        weighted_precision: weighted(|s| s.precision),
        weighted_recall: weighted(|s| s.recall),
        weighted_f1: weighted(|s| s.f1),
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pipeline: PipelineKind,
    pub split: Split,
    pub scores: Scores,
}

impl EvalReport {
    pub fn new(
        pipeline: PipelineKind,
        split: Split,
        cm: &ConfusionMatrix,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            pipeline,
            split,
            scores: scores(cm)?,
        })
    }
}
