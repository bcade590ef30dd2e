//! Sequential minimal optimization for the soft-margin RBF dual.
//!
//! Works on the minimization form `f(a) = 1/2 a'Qa - e'a` with
//! `Q_ij = y_i y_j K(x_i, x_j)`, `0 <= a_i <= C` and `y'a = 0`. Each step
//! picks a maximal-violating pair using second-order information, moves the
//! two multipliers analytically along the equality constraint, clips to the
//! box, and updates the cached gradient from the two kernel rows. The loop
//! ends when the violation gap `m(a) - M(a)` is at most `tol`, which keeps
//! every KKT condition within `tol` for the bias chosen at the end.

use std::collections::HashMap;
use std::rc::Rc;

use super::{rbf, BinaryModel, SvmError, TrainConfig, SV_THRESHOLD};

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 128 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Largest KKT violation of the returned multipliers and bias.
    pub max_violation: f64,
    /// False when the iteration cap was hit with violations above `10 * tol`.
    pub converged: bool,
    /// Dual objective `sum a - 1/2 a'Qa` (maximization form).
    pub dual_objective: f64,
}

/// Solver output: the model plus the full multiplier vector for diagnostics.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub model: BinaryModel,
    /// One multiplier per training example, in input order.
    pub alphas: Vec<f64>,
    pub stats: SolveStats,
}

/// Kernel rows computed on demand and kept under a byte budget, evicting the
/// least recently used row. Values never depend on cache state.
struct KernelRows<'a, F> {
    x: &'a [F],
    gamma: f64,
    rows: HashMap<usize, (Rc<Vec<f64>>, u64)>,
    capacity: usize,
    clock: u64,
}

impl<'a, F: AsRef<[f32]>> KernelRows<'a, F> {
    fn new(x: &'a [F], gamma: f64) -> Self {
        let n = x.len().max(1);
        Self {
            x,
            gamma,
            rows: HashMap::new(),
            capacity: (CACHE_BYTES / (8 * n)).max(2),
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        self.clock += 1;
        if let Some((row, used)) = self.rows.get_mut(&i) {
            *used = self.clock;
            return Rc::clone(row);
        }
        if self.rows.len() >= self.capacity {
            let victim = *self
                .rows
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(k, _)| k)
                .expect("cache not empty");
            self.rows.remove(&victim);
        }
        let xi = self.x[i].as_ref();
        let row: Vec<f64> = self
            .x
            .iter()
            .map(|xj| rbf(xi, xj.as_ref(), self.gamma))
            .collect();
        let row = Rc::new(row);
        self.rows.insert(i, (Rc::clone(&row), self.clock));
        row
    }
}

#[inline]
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

#[inline]
fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Train a binary RBF machine. Labels must be +1 or -1 with both present.
pub fn smo_train<F: AsRef<[f32]>>(
    features: &[F],
    labels: &[i8],
    cfg: &TrainConfig,
) -> Result<BinaryFit, SvmError> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(SvmError::InvalidLabel(bad));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(SvmError::SingleClassInput);
    }
    let dim = features[0].as_ref().len();
    if let Some(f) = features.iter().find(|f| f.as_ref().len() != dim) {
        return Err(SvmError::DimensionMismatch {
            expected: dim,
            actual: f.as_ref().len(),
        });
    }

    let n = features.len();
    let c = cfg.c;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut alpha = vec![0.0f64; n];
    // gradient of the minimization objective; starts at -e
    let mut grad = vec![-1.0f64; n];
    let mut kernel = KernelRows::new(features, cfg.gamma);
    let cap = cfg.iteration_cap(n);
    let mut iterations = 0;

    loop {
        // i: maximal -y_t G_t over the "up" set
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t], c) {
                let v = -y[t] * grad[t];
                if v > m {
                    m = v;
                    i = t;
                }
            }
        }
        // M over the "low" set, and j by second-order gain among violators of i
        let mut big_m = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::INFINITY;
        let ki = if i != usize::MAX {
            Some(kernel.row(i))
        } else {
            None
        };
        for t in 0..n {
            if !in_low(alpha[t], y[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            if v < big_m {
                big_m = v;
            }
            if let Some(ki) = &ki {
                let b = m - v;
                if b > 0.0 {
                    let a = (2.0 - 2.0 * ki[t]).max(TAU);
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        }
        if m - big_m <= cfg.tol || j == usize::MAX || iterations >= cap {
            break;
        }
        iterations += 1;

        let ki = ki.expect("i selected");
        let kj = kernel.row(j);
        let curvature = (2.0 - 2.0 * ki[j]).max(TAU);
        // box limits along the direction (+y_i for a_i, -y_j for a_j)
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = ((m + y[j] * grad[j]) / curvature).min(room_i).min(room_j);
        if step <= 0.0 {
            break;
        }
        let old_i = alpha[i];
        let old_j = alpha[j];
        alpha[i] = if step == room_i {
            if y[i] > 0.0 {
                c
            } else {
                0.0
            }
        } else {
            old_i + y[i] * step
        };
        alpha[j] = if step == room_j {
            if y[j] > 0.0 {
                0.0
            } else {
                c
            }
        } else {
            old_j - y[j] * step
        };
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * di * ki[t] + y[j] * dj * kj[t]);
        }
    }

    // bias: mean over free multipliers, else the midpoint of the feasible range
    let (mut m, mut big_m) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..n {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) {
            m = m.max(v);
        }
        if in_low(alpha[t], y[t], c) {
            big_m = big_m.min(v);
        }
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else if m.is_finite() && big_m.is_finite() {
        (m + big_m) / 2.0
    } else if m.is_finite() {
        m
    } else {
        big_m
    };

    // y_t f(x_t) - 1 = G_t + y_t b
    let max_violation = (0..n)
        .map(|t| {
            let r = grad[t] + y[t] * bias;
            let low = if alpha[t] < c { (-r).max(0.0) } else { 0.0 };
            let high = if alpha[t] > 0.0 { r.max(0.0) } else { 0.0 };
            low.max(high)
        })
        .fold(0.0, f64::max);
    let converged = iterations < cap || max_violation <= 10.0 * cfg.tol;
    // sum a - 1/2 a'Qa, using Qa = G + e
    let dual_objective = (0..n)
        .map(|t| alpha[t] - 0.5 * alpha[t] * (grad[t] + 1.0))
        .sum();

    let mut sv = Vec::new();
    let mut coeffs = Vec::new();
    for t in 0..n {
        if alpha[t] > SV_THRESHOLD {
            sv.extend_from_slice(features[t].as_ref());
            coeffs.push(alpha[t] * y[t]);
        }
    }
    let model = BinaryModel::new(dim, sv, coeffs, bias, cfg.gamma)?;
    Ok(BinaryFit {
        model,
        alphas: alpha,
        stats: SolveStats {
            iterations,
            max_violation,
            converged,
            dual_objective,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(xs: &[f32]) -> Vec<Vec<f32>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn symmetric_two_points() {
        let fit = smo_train(&rows(&[0.0, 1.0]), &[-1, 1], &TrainConfig::new(1000.0, 1.0)).unwrap();
        assert!((fit.alphas[0] - fit.alphas[1]).abs() < 1e-9);
        assert!(fit.model.decision_value(&[0.5]).unwrap().abs() < 1e-6);
        // hard margin: f(0) = -1, f(1) = 1
        assert!((fit.model.decision_value(&[1.0]).unwrap() - 1.0).abs() < 1e-3);
        // closed form a = 1 / (1 - e^-1)
        let expected = 1.0 / (1.0 - (-1.0f64).exp());
        assert!((fit.alphas[0] - expected).abs() < 1e-6, "{}", fit.alphas[0]);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            smo_train(&rows(&[0.0, 1.0]), &[1, 1], &TrainConfig::new(1.0, 1.0)),
            Err(SvmError::SingleClassInput)
        ));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            smo_train(&rows(&[0.0, 1.0]), &[1], &TrainConfig::new(1.0, 1.0)),
            Err(SvmError::LengthMismatch { .. })
        ));
        assert!(matches!(
            smo_train(&rows(&[0.0, 1.0]), &[1, 0], &TrainConfig::new(1.0, 1.0)),
            Err(SvmError::InvalidLabel(0))
        ));
        let ragged = vec![vec![0.0f32], vec![1.0, 2.0]];
        assert!(matches!(
            smo_train(&ragged, &[1, -1], &TrainConfig::new(1.0, 1.0)),
            Err(SvmError::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn separable_points_classified() {
        let xs = rows(&[-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]);
        let ys = [1, 1, 1, -1, -1, -1];
        let fit = smo_train(&xs, &ys, &TrainConfig::new(10.0, 0.5)).unwrap();
        for (x, &l) in xs.iter().zip(&ys) {
            assert!(fit.model.decision_value(x).unwrap() * l as f64 > 0.0);
        }
        assert!(fit.stats.converged);
        assert!(fit.stats.max_violation <= 1e-3);
        let balance: f64 = fit.alphas.iter().zip(&ys).map(|(a, &l)| a * l as f64).sum();
        assert!(balance.abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_flags_model() {
        let xs: Vec<Vec<f32>> = (0..40)
            .map(|i| vec![(i as f32 * 0.37).sin(), (i as f32 * 0.91).cos()])
            .collect();
        let ys: Vec<i8> = (0..40)
            .map(|i| if (i * 7) % 3 == 0 { 1 } else { -1 })
            .collect();
        let cfg = TrainConfig {
            max_iters: Some(1),
            ..TrainConfig::new(100.0, 2.0)
        };
        let fit = smo_train(&xs, &ys, &cfg).unwrap();
        assert_eq!(fit.stats.iterations, 1);
        assert!(!fit.stats.converged);
        assert!(fit.model.sv_count() >= 1);
    }

    #[test]
    fn cache_eviction_does_not_change_results() {
        let xs: Vec<Vec<f32>> = (0..30)
            .map(|i| vec![(i as f32 * 0.3).sin(), (i as f32 * 0.7).cos()])
            .collect();
        let ys: Vec<i8> = (0..30).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let mut small = KernelRows::new(&xs, 1.0);
        small.capacity = 2;
        let mut big = KernelRows::new(&xs, 1.0);
        for i in [0, 5, 9, 0, 3, 5, 29, 0] {
            assert_eq!(small.row(i), big.row(i));
        }
        assert!(small.rows.len() <= 2);
        let _ = smo_train(&xs, &ys, &TrainConfig::new(5.0, 1.0)).unwrap();
    }
}
