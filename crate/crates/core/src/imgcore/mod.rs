//! 8-bit raster type and the pixel primitives every pipeline stage is built from.

mod blur;
mod color;
mod ppm;
mod resize;

pub use blur::gaussian_blur_3x3;
pub use color::{bgr_to_gray, bgr_to_hsv, bgr_to_yuv, hsv_to_bgr, luminance_stddev, yuv_to_bgr};
pub use ppm::{decode_ppm, encode_ppm};
pub use resize::resize_bilinear;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("unsupported PNM magic {0:?} (expected P5 or P6)")]
    UnsupportedMagic(String),
    #[error("maxval {0} is not supported (only 255)")]
    MaxvalNot255(u32),
    #[error("truncated payload: expected {expected} samples, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("zero output dimension {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("expected color space {expected}, got {actual}")]
    WrongColorSpace {
        expected: ColorSpace,
        actual: ColorSpace,
    },
    #[error("invalid image: {0}")]
    InvalidLayout(String),
}

/// Declared interpretation of the channels of an [`Image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Gray,
    Bgr,
    Yuv,
    /// Hue is stored as degrees / 2, in `0..=179`.
    Hsv,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ColorSpace::Gray => "GRAY",
            ColorSpace::Bgr => "BGR",
            ColorSpace::Yuv => "YUV",
            ColorSpace::Hsv => "HSV",
        };
        f.write_str(name)
    }
}

/// Row-major, channel-interleaved 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    color_space: ColorSpace,
    data: Vec<u8>,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        color_space: ColorSpace,
        data: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidLayout(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width * height * color_space.channels();
        if data.len() != expected {
            return Err(ImageError::InvalidLayout(format!(
                "{width}x{height} {color_space} needs {expected} samples, got {}",
                data.len()
            )));
        }
        if color_space == ColorSpace::Hsv {
            if let Some(h) = data.iter().step_by(3).find(|&&h| h > 179) {
                return Err(ImageError::InvalidLayout(format!("hue {h} exceeds 179")));
            }
        }
        Ok(Self {
            width,
            height,
            color_space,
            data,
        })
    }

    /// Image with every sample of every channel set to `value`.
    pub fn filled(width: usize, height: usize, color_space: ColorSpace, value: u8) -> Self {
        let n = width * height * color_space.channels();
        Self::new(width, height, color_space, vec![value; n]).expect("filled image is valid")
    }

    /// Build a 3-channel image from a per-pixel closure returning channel triples.
    pub fn from_fn3(
        width: usize,
        height: usize,
        color_space: ColorSpace,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        assert_eq!(color_space.channels(), 3);
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, color_space, data).expect("from_fn3 image is valid")
    }

    pub fn from_fn_gray(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, ColorSpace::Gray, data).expect("from_fn_gray image is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.color_space.channels()
    }

    pub fn color_space(&self) -> ColorSpace {
        self.color_space
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels() + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let ch = self.channels();
        let i = (y * self.width + x) * ch;
        &self.data[i..i + ch]
    }

    pub(crate) fn expect_space(&self, expected: ColorSpace) -> Result<(), ImageError> {
        if self.color_space == expected {
            Ok(())
        } else {
            Err(ImageError::WrongColorSpace {
                expected,
                actual: self.color_space,
            })
        }
    }

    /// Extract channel `c` as a GRAY image.
    pub fn channel(&self, c: usize) -> Image {
        let ch = self.channels();
        assert!(c < ch, "channel {c} out of range for {ch}-channel image");
        let data = self.data.iter().skip(c).step_by(ch).copied().collect();
        Image {
            width: self.width,
            height: self.height,
            color_space: ColorSpace::Gray,
            data,
        }
    }

    /// Interleave three single-channel planes into one image tagged `color_space`.
    pub fn merge(planes: [&Image; 3], color_space: ColorSpace) -> Result<Image, ImageError> {
        let (w, h) = (planes[0].width, planes[0].height);
        for p in planes {
            if p.channels() != 1 || p.width != w || p.height != h {
                return Err(ImageError::InvalidLayout(
                    "merge needs three single-channel planes of equal size".into(),
                ));
            }
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for i in 0..w * h {
            data.extend(planes.iter().map(|p| p.data[i]));
        }
        Image::new(w, h, color_space, data)
    }

    /// Crop to the half-open box `[x1, x2) × [y1, y2)`.
    pub fn crop(&self, x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Image, ImageError> {
        if x1 >= x2 || y1 >= y2 || x2 > self.width || y2 > self.height {
            return Err(ImageError::InvalidLayout(format!(
                "crop box ({x1},{y1})-({x2},{y2}) outside {}x{}",
                self.width, self.height
            )));
        }
        let ch = self.channels();
        let mut data = Vec::with_capacity((x2 - x1) * (y2 - y1) * ch);
        for y in y1..y2 {
            let row = (y * self.width + x1) * ch;
            data.extend_from_slice(&self.data[row..row + (x2 - x1) * ch]);
        }
        Image::new(x2 - x1, y2 - y1, self.color_space, data)
    }
}

/// Round half-up and clamp into the 8-bit range.
#[inline]
pub(crate) fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
