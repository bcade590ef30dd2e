//! Histogram-of-oriented-gradients descriptor for a single detection window.
//!
//! Cells vote magnitude-weighted into unsigned orientation bins with linear
//! interpolation between the two nearest bin centers. Blocks of cells are
//! L2-Hys normalized and concatenated block-major, then cell-major, then by
//! bin. There is no spatial interpolation and no Gaussian block weighting.

use thiserror::Error;

use crate::imgcore::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HogError {
    #[error("window must be {expected}x{expected}, got {width}x{height}")]
    WrongWindowSize {
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid HOG config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogConfig {
    pub window: usize,
    pub block: usize,
    pub stride: usize,
    pub cell: usize,
    pub bins: usize,
    pub hys_clip: f64,
    pub epsilon: f64,
}

impl Default for HogConfig {
    /// 32 px window, 16 px blocks at stride 8, 8 px cells, 9 bins.
    fn default() -> Self {
        Self {
            window: 32,
            block: 16,
            stride: 8,
            cell: 8,
            bins: 9,
            hys_clip: 0.2,
            epsilon: 1e-5,
        }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<(), HogError> {
        let bad = |msg: String| Err(HogError::InvalidConfig(msg));
        if self.cell == 0 || self.bins == 0 || self.stride == 0 {
            return bad("cell, stride and bins must be positive".into());
        }
        if !self.window.is_multiple_of(self.cell)
            || !self.block.is_multiple_of(self.cell)
            || !self.stride.is_multiple_of(self.cell)
        {
            return bad(format!(
                "window {}, block {} and stride {} must be multiples of cell {}",
                self.window, self.block, self.stride, self.cell
            ));
        }
        if self.block == 0 || self.block > self.window {
            return bad(format!(
                "block {} must be in 1..=window {}",
                self.block, self.window
            ));
        }
        if !(self.window - self.block).is_multiple_of(self.stride) {
            return bad("blocks must tile the window exactly at the given stride".into());
        }
        let positive = |v: f64| v > 0.0;
        if !positive(self.hys_clip) || !positive(self.epsilon) {
            return bad("hys_clip and epsilon must be positive".into());
        }
        Ok(())
    }

    pub fn blocks_per_side(&self) -> usize {
        (self.window - self.block) / self.stride + 1
    }

    pub fn cells_per_side(&self) -> usize {
        self.window / self.cell
    }

    pub fn cells_per_block_side(&self) -> usize {
        self.block / self.cell
    }

    pub fn descriptor_len(&self) -> usize {
        let b = self.blocks_per_side();
        let c = self.cells_per_block_side();
        b * b * c * c * self.bins
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

impl From<Vec<f32>> for FeatureVector {
    fn from(values: Vec<f32>) -> Self {
        Self::new(values)
    }
}

impl AsRef<[f32]> for FeatureVector {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

/// Per-pixel gradient magnitude and unsigned orientation in degrees `[0, 180)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
}

/// Centered differences with replicated borders. On multi-channel input each
/// pixel takes the channel with the largest magnitude (lowest index on ties).
pub fn compute_gradients(img: &Image) -> GradientField {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut magnitude = Vec::with_capacity(w * h);
    let mut angle = Vec::with_capacity(w * h);
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let mut best = (0.0f64, 0.0f64, -1.0f64);
            for c in 0..ch {
                let dx = img.get(xr, y, c) as f64 - img.get(xl, y, c) as f64;
                let dy = img.get(x, yd, c) as f64 - img.get(x, yu, c) as f64;
                let mag2 = dx * dx + dy * dy;
                if mag2 > best.2 {
                    best = (dx, dy, mag2);
                }
            }
            let (dx, dy, mag2) = best;
            let mut deg = dy.atan2(dx).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            if deg >= 180.0 {
                deg -= 180.0;
            }
            magnitude.push(mag2.sqrt());
            angle.push(deg);
        }
    }
    GradientField {
        width: w,
        height: h,
        magnitude,
        angle,
    }
}

fn check_window(img: &Image, cfg: &HogConfig) -> Result<(), HogError> {
    cfg.validate()?;
    if img.width() != cfg.window || img.height() != cfg.window {
        return Err(HogError::WrongWindowSize {
            expected: cfg.window,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Unnormalized orientation histograms, row-major over cells, `bins` per cell.
pub fn cell_histograms(img: &Image, cfg: &HogConfig) -> Result<Vec<f64>, HogError> {
    check_window(img, cfg)?;
    let grad = compute_gradients(img);
    let cells = cfg.cells_per_side();
    let bin_width = 180.0 / cfg.bins as f64;
    let mut hist = vec![0.0f64; cells * cells * cfg.bins];
    for y in 0..cfg.window {
        for x in 0..cfg.window {
            let i = y * cfg.window + x;
            let mag = grad.magnitude[i];
            if mag == 0.0 {
                continue;
            }
            // bin centers sit at (k + 0.5) * bin_width
            let pos = grad.angle[i] / bin_width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = (lo as isize).rem_euclid(cfg.bins as isize) as usize;
            let hi = (lo + 1) % cfg.bins;
            let base = ((y / cfg.cell) * cells + x / cfg.cell) * cfg.bins;
            hist[base + lo] += mag * (1.0 - frac);
            hist[base + hi] += mag * frac;
        }
    }
    Ok(hist)
}

fn l2_hys(block: &mut [f64], clip: f64, eps: f64) {
    let scale = |v: &[f64]| 1.0 / (v.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
    let s = scale(block);
    for v in block.iter_mut() {
        *v = (*v * s).min(clip);
    }
    let s = scale(block);
    for v in block.iter_mut() {
        *v *= s;
    }
}

pub fn hog_descriptor(img: &Image, cfg: &HogConfig) -> Result<FeatureVector, HogError> {
    let hist = cell_histograms(img, cfg)?;
    let cells = cfg.cells_per_side();
    let per_block = cfg.cells_per_block_side();
    let step = cfg.stride / cfg.cell;
    let blocks = cfg.blocks_per_side();

    let mut out = Vec::with_capacity(cfg.descriptor_len());
    let mut block = Vec::with_capacity(per_block * per_block * cfg.bins);
    for by in 0..blocks {
        for bx in 0..blocks {
            block.clear();
            for cy in by * step..by * step + per_block {
                for cx in bx * step..bx * step + per_block {
                    let base = (cy * cells + cx) * cfg.bins;
                    block.extend_from_slice(&hist[base..base + cfg.bins]);
                }
            }
            l2_hys(&mut block, cfg.hys_clip, cfg.epsilon);
            out.extend(block.iter().map(|&v| v as f32));
        }
    }
    debug_assert_eq!(out.len(), cfg.descriptor_len());
    Ok(FeatureVector::new(out))
}
