//! The seven preprocessing chains, each ending in blur + HOG.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::enhance::{self, EnhanceError};
use crate::hog::{self, FeatureVector, HogConfig, HogError};
use crate::imgcore::{self, ColorSpace, Image, ImageError};

/// Side length every pipeline expects its input to be resized to.
pub const INPUT_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("pipeline input must be {INPUT_SIZE}x{INPUT_SIZE}, got {width}x{height}")]
    WrongInputSize { width: usize, height: usize },
    #[error("unknown pipeline {name:?}; valid names: {}", PipelineKind::ALL.map(|k| k.name()).join(", "))]
    UnknownPipelineName { name: String },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Enhance(#[from] EnhanceError),
    #[error(transparent)]
    Hog(#[from] HogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PipelineKind {
    Hog,
    ClaheHog,
    YuvHog,
    HueHog,
    ClaheYuvHog,
    HueYuvHog,
    ClaheHueYuvHog,
}

/// A preprocessing step applied before blur and HOG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    ClaheDynamic,
    HueEqualize,
    Yuv,
}

impl PipelineKind {
    /// Report row order.
    pub const ALL: [PipelineKind; 7] = [
        PipelineKind::Hog,
        PipelineKind::ClaheHog,
        PipelineKind::YuvHog,
        PipelineKind::HueHog,
        PipelineKind::ClaheYuvHog,
        PipelineKind::HueYuvHog,
        PipelineKind::ClaheHueYuvHog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Hog => "HOG",
            PipelineKind::ClaheHog => "CLAHE-HOG",
            PipelineKind::YuvHog => "YUV-HOG",
            PipelineKind::HueHog => "HUE-HOG",
            PipelineKind::ClaheYuvHog => "CLAHE-YUV-HOG",
            PipelineKind::HueYuvHog => "HUE-YUV-HOG",
            PipelineKind::ClaheHueYuvHog => "CLAHE-HUE-YUV-HOG",
        }
    }

    pub fn stages(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            PipelineKind::Hog => &[],
            PipelineKind::ClaheHog => &[ClaheDynamic],
            PipelineKind::YuvHog => &[Yuv],
            PipelineKind::HueHog => &[HueEqualize],
            PipelineKind::ClaheYuvHog => &[ClaheDynamic, Yuv],
            PipelineKind::HueYuvHog => &[HueEqualize, Yuv],
            PipelineKind::ClaheHueYuvHog => &[ClaheDynamic, HueEqualize, Yuv],
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PipelineError::UnknownPipelineName {
                name: s.to_string(),
            })
    }
}

/// Equalize the hue plane (onto its 0..=179 scale) and go back to BGR.
pub fn hue_equalize(img: &Image) -> Result<Image, PipelineError> {
    let hsv = imgcore::bgr_to_hsv(img)?;
    let hue = enhance::equalize_hist_to(&hsv.channel(0), 179)?;
    let merged = Image::merge([&hue, &hsv.channel(1), &hsv.channel(2)], ColorSpace::Hsv)?;
    Ok(imgcore::hsv_to_bgr(&merged)?)
}

pub fn apply_stage(stage: Stage, img: &Image) -> Result<Image, PipelineError> {
    Ok(match stage {
        Stage::ClaheDynamic => enhance::apply_clahe_dynamic(img)?,
        Stage::HueEqualize => hue_equalize(img)?,
        Stage::Yuv => imgcore::bgr_to_yuv(img)?,
    })
}

/// Run the named stages, then blur, returning the image HOG sees.
pub fn preprocess(kind: PipelineKind, img: &Image) -> Result<Image, PipelineError> {
    if img.width() != INPUT_SIZE || img.height() != INPUT_SIZE {
        return Err(PipelineError::WrongInputSize {
            width: img.width(),
            height: img.height(),
        });
    }
    let mut cur = img.clone();
    for &stage in kind.stages() {
        cur = apply_stage(stage, &cur)?;
    }
    Ok(imgcore::gaussian_blur_3x3(&cur))
}

pub fn apply_pipeline(
    kind: PipelineKind,
    img: &Image,
    hog_cfg: &HogConfig,
) -> Result<FeatureVector, PipelineError> {
    let ready = preprocess(kind, img)?;
    Ok(hog::hog_descriptor(&ready, hog_cfg)?)
}
