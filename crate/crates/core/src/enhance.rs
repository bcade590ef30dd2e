//! Global histogram equalization and contrast-limited adaptive equalization.

use thiserror::Error;

use crate::imgcore::{self, luminance_stddev, ColorSpace, Image, ImageError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnhanceError {
    #[error("expected a single-channel image, got {0} channels")]
    NotSingleChannel(usize),
    #[error("image {width}x{height} is smaller than the {cols}x{rows} tile grid")]
    ImageSmallerThanGrid {
        width: usize,
        height: usize,
        cols: usize,
        rows: usize,
    },
    #[error("invalid CLAHE config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Histogram = [u32; 256];

pub fn histogram(samples: impl IntoIterator<Item = u8>) -> Histogram {
    let mut hist = [0u32; 256];
    for v in samples {
        hist[v as usize] += 1;
    }
    hist
}

fn require_single(img: &Image) -> Result<(), EnhanceError> {
    match img.channels() {
        1 => Ok(()),
        n => Err(EnhanceError::NotSingleChannel(n)),
    }
}

/// Classic equalization onto `0..=255`.
///
/// A constant input maps to all zeros.
pub fn equalize_hist(channel: &Image) -> Result<Image, EnhanceError> {
    equalize_hist_to(channel, 255)
}

/// Equalization onto `0..=out_max`, used for the 180-level hue plane.
pub fn equalize_hist_to(channel: &Image, out_max: u8) -> Result<Image, EnhanceError> {
    require_single(channel)?;
    let lut = equalization_lut(&histogram(channel.data().iter().copied()), out_max);
    let data = channel.data().iter().map(|&v| lut[v as usize]).collect();
    Ok(Image::new(
        channel.width(),
        channel.height(),
        channel.color_space(),
        data,
    )?)
}

/// `round((cdf(v) - cdf_min) / (N - cdf_min) * out_max)`.
pub fn equalization_lut(hist: &Histogram, out_max: u8) -> [u8; 256] {
    let total: u64 = hist.iter().map(|&c| c as u64).sum();
    let cdf_min = hist.iter().find(|&&c| c > 0).copied().unwrap_or(0) as u64;
    let mut lut = [0u8; 256];
    if total == cdf_min {
        return lut;
    }
    let scale = out_max as f64 / (total - cdf_min) as f64;
    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count as u64;
        lut[v] = imgcore::round_u8(cdf.saturating_sub(cdf_min) as f64 * scale);
    }
    lut
}

/// Clip limit chosen from the luminance standard deviation.
pub fn dynamic_clip_limit(stddev: f64) -> f64 {
    if stddev < 50.0 {
        4.0
    } else if stddev < 100.0 {
        2.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheConfig {
    clip_limit: f64,
    /// (columns, rows)
    tile_grid: (usize, usize),
}

impl ClaheConfig {
    pub const DEFAULT_GRID: (usize, usize) = (8, 8);

    pub fn new(clip_limit: f64, tile_grid: (usize, usize)) -> Result<Self, EnhanceError> {
        if clip_limit.is_nan() || clip_limit <= 0.0 {
            return Err(EnhanceError::InvalidConfig(format!(
                "clip limit must be positive, got {clip_limit}"
            )));
        }
        if tile_grid.0 == 0 || tile_grid.1 == 0 {
            return Err(EnhanceError::InvalidConfig(format!(
                "tile grid must be at least 1x1, got {}x{}",
                tile_grid.0, tile_grid.1
            )));
        }
        Ok(Self {
            clip_limit,
            tile_grid,
        })
    }

    pub fn with_clip_limit(clip_limit: f64) -> Result<Self, EnhanceError> {
        Self::new(clip_limit, Self::DEFAULT_GRID)
    }

    pub fn clip_limit(&self) -> f64 {
        self.clip_limit
    }

    pub fn tile_grid(&self) -> (usize, usize) {
        self.tile_grid
    }
}

/// Absolute per-bin cap for a tile of `tile_pixels` samples, never below 1.
pub fn clip_count(clip_limit: f64, tile_pixels: usize) -> u32 {
    let raw = (clip_limit * tile_pixels as f64 / 256.0).floor();
    if raw >= u32::MAX as f64 {
        u32::MAX
    } else {
        (raw as u32).max(1)
    }
}

/// Clip every bin at `limit` and hand the excess back: an even share to every
/// bin, then the remainder one count per bin starting at bin 0.
pub fn clip_and_redistribute(hist: &mut Histogram, limit: u32) {
    let mut excess = 0u64;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += (*bin - limit) as u64;
            *bin = limit;
        }
    }
    let share = (excess / 256) as u32;
    let remainder = (excess % 256) as usize;
    for (i, bin) in hist.iter_mut().enumerate() {
        *bin += share + u32::from(i < remainder);
    }
}

/// `round(cdf(v) / tile_pixels * 255)` over an already clipped histogram.
fn tile_lut(hist: &Histogram, tile_pixels: usize) -> [u8; 256] {
    let scale = 255.0 / tile_pixels as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count as u64;
        lut[v] = imgcore::round_u8(cdf as f64 * scale);
    }
    lut
}

/// Tile boundaries along one axis; the last tile absorbs the remainder.
fn tile_spans(len: usize, tiles: usize) -> Vec<(usize, usize)> {
    let base = len / tiles;
    (0..tiles)
        .map(|i| {
            let start = i * base;
            let end = if i + 1 == tiles { len } else { start + base };
            (start, end)
        })
        .collect()
}

/// For each coordinate: (tile before, tile after, weight of the tile after).
fn blend_weights(len: usize, spans: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = spans
        .iter()
        .map(|&(s, e)| s as f64 + (e - s - 1) as f64 / 2.0)
        .collect();
    let last = centers.len() - 1;
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centers[0] {
                (0, 0, 0.0)
            } else if p >= centers[last] {
                (last, last, 0.0)
            } else {
                let i = centers.partition_point(|&c| c <= p) - 1;
                (i, i + 1, (p - centers[i]) / (centers[i + 1] - centers[i]))
            }
        })
        .collect()
}

/// Per-tile clipped histograms in row-major tile order.
pub fn clahe_tile_histograms(
    channel: &Image,
    cfg: &ClaheConfig,
) -> Result<Vec<(Histogram, usize)>, EnhanceError> {
    require_single(channel)?;
    let (w, h) = (channel.width(), channel.height());
    let (cols, rows) = cfg.tile_grid;
    if w < cols || h < rows {
        return Err(EnhanceError::ImageSmallerThanGrid {
            width: w,
            height: h,
            cols,
            rows,
        });
    }
    let xs = tile_spans(w, cols);
    let ys = tile_spans(h, rows);
    let mut out = Vec::with_capacity(cols * rows);
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let pixels = (x1 - x0) * (y1 - y0);
            let mut hist =
                histogram((y0..y1).flat_map(|y| (x0..x1).map(move |x| channel.get(x, y, 0))));
            clip_and_redistribute(&mut hist, clip_count(cfg.clip_limit, pixels));
            out.push((hist, pixels));
        }
    }
    Ok(out)
}

/// Contrast-limited adaptive histogram equalization of one plane.
pub fn clahe(channel: &Image, cfg: &ClaheConfig) -> Result<Image, EnhanceError> {
    let tiles = clahe_tile_histograms(channel, cfg)?;
    let luts: Vec<[u8; 256]> = tiles.iter().map(|(h, n)| tile_lut(h, *n)).collect();
    let (w, h) = (channel.width(), channel.height());
    let (cols, rows) = cfg.tile_grid;
    let wx = blend_weights(w, &tile_spans(w, cols));
    let wy = blend_weights(h, &tile_spans(h, rows));

    let mut data = Vec::with_capacity(w * h);
    for (y, &(ty0, ty1, fy)) in wy.iter().enumerate() {
        for (x, &(tx0, tx1, fx)) in wx.iter().enumerate() {
            let v = channel.get(x, y, 0) as usize;
            let m = |ty: usize, tx: usize| luts[ty * cols + tx][v] as f64;
            let top = m(ty0, tx0) * (1.0 - fx) + m(ty0, tx1) * fx;
            let bot = m(ty1, tx0) * (1.0 - fx) + m(ty1, tx1) * fx;
            data.push(imgcore::round_u8(top * (1.0 - fy) + bot * fy));
        }
    }
    Ok(Image::new(w, h, channel.color_space(), data)?)
}

/// CLAHE settings picked from the image's own luminance contrast.
pub fn dynamic_clahe_config(img: &Image) -> ClaheConfig {
    ClaheConfig::with_clip_limit(dynamic_clip_limit(luminance_stddev(img)))
        .expect("dynamic clip limits are positive")
}

/// CLAHE on the luminance with the contrast-dependent clip limit and an 8×8 grid.
///
/// Color input is equalized on the Y plane of YUV and converted back.
pub fn apply_clahe_dynamic(img: &Image) -> Result<Image, EnhanceError> {
    let cfg = dynamic_clahe_config(img);
    match img.color_space() {
        ColorSpace::Gray => clahe(img, &cfg),
        ColorSpace::Bgr => {
            let yuv = imgcore::bgr_to_yuv(img)?;
            let y = clahe(&yuv.channel(0), &cfg)?;
            let merged = Image::merge([&y, &yuv.channel(1), &yuv.channel(2)], ColorSpace::Yuv)?;
            Ok(imgcore::yuv_to_bgr(&merged)?)
        }
        other => Err(ImageError::WrongColorSpace {
            expected: ColorSpace::Bgr,
            actual: other,
        }
        .into()),
    }
}
