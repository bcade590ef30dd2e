//! RBF-kernel support vector classification.
//!
//! Binary problems are solved by SMO ([`smo_train`]); multiclass models are a
//! one-vs-one set of binary models combined by voting ([`train_multiclass`],
//! [`predict`]).

mod io;
mod multiclass;
mod smo;

pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use multiclass::{
    predict, train_multiclass, CompiledModel, MulticlassFit, MulticlassSvmModel, PairModel,
    PairStats,
};
pub use smo::{smo_train, BinaryFit, SolveStats};

use thiserror::Error;

/// Multipliers at or below this are treated as zero.
pub const SV_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training data must contain both +1 and -1 labels")]
    SingleClassInput,
    #[error("labels must be +1 or -1, got {0}")]
    InvalidLabel(i8),
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("need at least two classes, got {0}")]
    FewerThanTwoClasses(usize),
    #[error("pair ({a}, {b}): {source}")]
    Pair {
        a: u32,
        b: u32,
        #[source]
        source: Box<SvmError>,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model version {0}")]
    VersionMismatch(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated model payload")]
    TruncatedPayload,
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal KKT violation gap drops to this.
    pub tol: f64,
    /// Hard cap on pair updates; `None` means 10 × training set size.
    pub max_iters: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 20.5557,
            gamma: 0.2167,
            tol: 1e-3,
            max_iters: None,
        }
    }
}

impl TrainConfig {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.gamma > 0.0 && self.tol > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "c, gamma and tol must be positive (c={}, gamma={}, tol={})",
                self.c, self.gamma, self.tol
            )));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(10 * n)
    }
}

/// `exp(-gamma * |x - y|^2)` without length checks.
#[inline]
pub(crate) fn rbf(x: &[f32], y: &[f32], gamma: f64) -> f64 {
    let d2: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    (-gamma * d2).exp()
}

pub fn rbf_kernel(x: &[f32], y: &[f32], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(rbf(x, y, gamma))
}

/// A trained two-class RBF machine. Positive decision values mean label +1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    dim: usize,
    /// Row-major, `dual_coeffs.len()` rows of `dim` values.
    support_vectors: Vec<f32>,
    /// `alpha_i * y_i` for each support vector.
    dual_coeffs: Vec<f64>,
    bias: f64,
    gamma: f64,
}

impl BinaryModel {
    pub fn new(
        dim: usize,
        support_vectors: Vec<f32>,
        dual_coeffs: Vec<f64>,
        bias: f64,
        gamma: f64,
    ) -> Result<Self, SvmError> {
        if dual_coeffs.is_empty() || support_vectors.len() != dual_coeffs.len() * dim {
            return Err(SvmError::Malformed(format!(
                "{} coefficients do not match {} sv values of dim {dim}",
                dual_coeffs.len(),
                support_vectors.len()
            )));
        }
        Ok(Self {
            dim,
            support_vectors,
            dual_coeffs,
            bias,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sv_count(&self) -> usize {
        self.dual_coeffs.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f32] {
        &self.support_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn support_vectors(&self) -> &[f32] {
        &self.support_vectors
    }

    pub fn dual_coeffs(&self) -> &[f64] {
        &self.dual_coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `sum_i coeff_i * K(sv_i, x) + bias`.
    pub fn decision_value(&self, x: &[f32]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let sum: f64 = self
            .dual_coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| a * rbf(self.support_vector(i), x, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }
}
