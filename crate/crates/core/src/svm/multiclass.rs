use std::collections::HashMap;

use rayon::prelude::*;

use super::{rbf, smo_train, BinaryModel, SolveStats, SvmError, TrainConfig};

/// Binary machine for `class_a` (+1) against `class_b` (-1), `class_a < class_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub class_a: u32,
    pub class_b: u32,
    pub model: BinaryModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel {
    pub classes: Vec<u32>,
    pub pairs: Vec<PairModel>,
    pub c: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub class_a: u32,
    pub class_b: u32,
    pub samples: usize,
    pub support_vectors: usize,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct MulticlassFit {
    pub model: MulticlassSvmModel,
    pub pair_stats: Vec<PairStats>,
}

impl MulticlassFit {
    pub fn unconverged(&self) -> impl Iterator<Item = &PairStats> {
        self.pair_stats.iter().filter(|p| !p.stats.converged)
    }
}

impl MulticlassSvmModel {
    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.model.dim())
    }

    fn check_dim(&self, x: &[f32]) -> Result<(), SvmError> {
        if x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// One-vs-one training; every unordered class pair is fit on its own samples.
pub fn train_multiclass<F: AsRef<[f32]> + Sync>(
    features: &[F],
    labels: &[u32],
    cfg: &TrainConfig,
) -> Result<MulticlassFit, SvmError> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::FewerThanTwoClasses(classes.len()));
    }
    let dim = features[0].as_ref().len();
    if let Some(f) = features.iter().find(|f| f.as_ref().len() != dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            actual: f.as_ref().len(),
        });
    }

    let pairs: Vec<(u32, u32)> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| classes[i + 1..].iter().map(move |&b| (a, b)))
        .collect();

    let results: Vec<Result<(PairModel, PairStats), SvmError>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (xs, ys): (Vec<&[f32]>, Vec<i8>) = features
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == a || l == b)
                .map(|(f, &l)| (f.as_ref(), if l == a { 1 } else { -1 }))
                .unzip();
            let fit = smo_train(&xs, &ys, cfg).map_err(|e| SvmError::Pair {
                a,
                b,
                source: Box::new(e),
            })?;
            let stats = PairStats {
                class_a: a,
                class_b: b,
                samples: xs.len(),
                support_vectors: fit.model.sv_count(),
                stats: fit.stats,
            };
            Ok((
                PairModel {
                    class_a: a,
                    class_b: b,
                    model: fit.model,
                },
                stats,
            ))
        })
        .collect();

    let mut models = Vec::with_capacity(results.len());
    let mut pair_stats = Vec::with_capacity(results.len());
    for r in results {
        let (m, s) = r?;
        models.push(m);
        pair_stats.push(s);
    }
    Ok(MulticlassFit {
        model: MulticlassSvmModel {
            classes,
            pairs: models,
            c: cfg.c,
            gamma: cfg.gamma,
        },
        pair_stats,
    })
}

/// Majority vote; ties go to the larger summed |decision| over won pairs,
/// then to the lower class id.
fn vote(classes: &[u32], decisions: impl Iterator<Item = (u32, u32, f64)>) -> u32 {
    let index: HashMap<u32, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut votes = vec![0usize; classes.len()];
    let mut margin = vec![0.0f64; classes.len()];
    for (a, b, d) in decisions {
        let winner = if d > 0.0 { a } else { b };
        let k = index[&winner];
        votes[k] += 1;
        margin[k] += d.abs();
    }
    let mut best = 0;
    for k in 1..classes.len() {
        if votes[k] > votes[best] || (votes[k] == votes[best] && margin[k] > margin[best]) {
            best = k;
        }
    }
    classes[best]
}

pub fn predict(model: &MulticlassSvmModel, x: &[f32]) -> Result<u32, SvmError> {
    model.check_dim(x)?;
    let mut decisions = Vec::with_capacity(model.pairs.len());
    for p in &model.pairs {
        decisions.push((p.class_a, p.class_b, p.model.decision_value(x)?));
    }
    Ok(vote(&model.classes, decisions.into_iter()))
}

/// Prediction-side view that evaluates each distinct support vector once per
/// query, however many pairs share it. Decisions are bit-identical to
/// [`predict`].
#[derive(Debug, Clone)]
pub struct CompiledModel {
    classes: Vec<u32>,
    dim: usize,
    gamma: f64,
    vectors: Vec<f32>,
    pairs: Vec<CompiledPair>,
}

#[derive(Debug, Clone)]
struct CompiledPair {
    class_a: u32,
    class_b: u32,
    /// Indices into the shared vector table.
    vectors: Vec<u32>,
    coeffs: Vec<f64>,
    bias: f64,
}

impl CompiledModel {
    pub fn new(model: &MulticlassSvmModel) -> Self {
        let dim = model.dim();
        let mut seen: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut vectors = Vec::new();
        let mut pairs = Vec::with_capacity(model.pairs.len());
        for p in &model.pairs {
            let mut idx = Vec::with_capacity(p.model.sv_count());
            for i in 0..p.model.sv_count() {
                let sv = p.model.support_vector(i);
                let key: Vec<u32> = sv.iter().map(|v| v.to_bits()).collect();
                let next = seen.len() as u32;
                let id = *seen.entry(key).or_insert_with(|| {
                    vectors.extend_from_slice(sv);
                    next
                });
                idx.push(id);
            }
            pairs.push(CompiledPair {
                class_a: p.class_a,
                class_b: p.class_b,
                vectors: idx,
                coeffs: p.model.dual_coeffs().to_vec(),
                bias: p.model.bias(),
            });
        }
        Self {
            classes: model.classes.clone(),
            dim,
            gamma: model.gamma,
            vectors,
            pairs,
        }
    }

    pub fn unique_support_vectors(&self) -> usize {
        self.vectors.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn predict(&self, x: &[f32]) -> Result<u32, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let k: Vec<f64> = self
            .vectors
            .chunks_exact(self.dim)
            .map(|sv| rbf(sv, x, self.gamma))
            .collect();
        let decisions = self.pairs.iter().map(|p| {
            let sum: f64 = p
                .vectors
                .iter()
                .zip(&p.coeffs)
                .map(|(&i, &c)| c * k[i as usize])
                .sum();
            (p.class_a, p.class_b, sum + p.bias)
        });
        Ok(vote(&self.classes, decisions))
    }

    /// Predict many rows in parallel, preserving order.
    pub fn predict_batch<F: AsRef<[f32]> + Sync>(&self, rows: &[F]) -> Result<Vec<u32>, SvmError> {
        rows.par_iter().map(|r| self.predict(r.as_ref())).collect()
    }
}
