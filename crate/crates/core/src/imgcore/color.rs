//! BT.601 full-range conversions between BGR, GRAY, YUV and 8-bit HSV.

use super::{round_u8, ColorSpace, Image, ImageError};

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

#[inline]
fn luma(b: f64, g: f64, r: f64) -> f64 {
    KR * r + KG * g + KB * b
}

fn map_pixels(
    img: &Image,
    from: ColorSpace,
    to: ColorSpace,
    f: impl Fn(&[u8]) -> [u8; 3],
) -> Result<Image, ImageError> {
    img.expect_space(from)?;
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        data.extend_from_slice(&f(px));
    }
    Image::new(img.width(), img.height(), to, data)
}

pub fn bgr_to_gray(img: &Image) -> Result<Image, ImageError> {
    img.expect_space(ColorSpace::Bgr)?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| round_u8(luma(px[0] as f64, px[1] as f64, px[2] as f64)))
        .collect();
    Image::new(img.width(), img.height(), ColorSpace::Gray, data)
}

/// Channel order of the result is (Y, U, V).
pub fn bgr_to_yuv(img: &Image) -> Result<Image, ImageError> {
    map_pixels(img, ColorSpace::Bgr, ColorSpace::Yuv, |px| {
        let (b, g, r) = (px[0] as f64, px[1] as f64, px[2] as f64);
        [
            round_u8(luma(b, g, r)),
            round_u8(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0),
            round_u8(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0),
        ]
    })
}

pub fn yuv_to_bgr(img: &Image) -> Result<Image, ImageError> {
    map_pixels(img, ColorSpace::Yuv, ColorSpace::Bgr, |px| {
        let y = px[0] as f64;
        let u = px[1] as f64 - 128.0;
        let v = px[2] as f64 - 128.0;
        [
            round_u8(y + 1.772 * u),
            round_u8(y - 0.344136 * u - 0.714136 * v),
            round_u8(y + 1.402 * v),
        ]
    })
}

/// Hexcone HSV with hue stored as degrees / 2. Achromatic pixels get hue 0.
pub fn bgr_to_hsv(img: &Image) -> Result<Image, ImageError> {
    map_pixels(img, ColorSpace::Bgr, ColorSpace::Hsv, |px| {
        let (b, g, r) = (px[0] as i32, px[1] as i32, px[2] as i32);
        let v = b.max(g).max(r);
        let diff = v - b.min(g).min(r);
        let s = if v == 0 {
            0
        } else {
            round_u8(255.0 * diff as f64 / v as f64)
        };
        let h = if diff == 0 {
            0.0
        } else {
            let d = diff as f64;
            let deg = if v == r {
                60.0 * (g - b) as f64 / d
            } else if v == g {
                120.0 + 60.0 * (b - r) as f64 / d
            } else {
                240.0 + 60.0 * (r - g) as f64 / d
            };
            if deg < 0.0 {
                deg + 360.0
            } else {
                deg
            }
        };
        let h = round_u8(h / 2.0) % 180;
        [h, s, v as u8]
    })
}

pub fn hsv_to_bgr(img: &Image) -> Result<Image, ImageError> {
    map_pixels(img, ColorSpace::Hsv, ColorSpace::Bgr, |px| {
        let h = px[0] as f64 * 2.0 / 60.0;
        let s = px[1] as f64 / 255.0;
        let v = px[2] as f64;
        let c = v * s;
        let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
        let m = v - c;
        let (r, g, b) = match h as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        [round_u8(b + m), round_u8(g + m), round_u8(r + m)]
    })
}

/// Population standard deviation of the luminance plane.
///
/// BGR uses the Y plane of [`bgr_to_yuv`], YUV its channel 0, GRAY its only
/// channel and HSV is first taken back to BGR.
pub fn luminance_stddev(img: &Image) -> f64 {
    let y = match img.color_space() {
        ColorSpace::Gray => img.clone(),
        ColorSpace::Yuv => img.channel(0),
        ColorSpace::Bgr => bgr_to_yuv(img).expect("bgr").channel(0),
        ColorSpace::Hsv => bgr_to_yuv(&hsv_to_bgr(img).expect("hsv"))
            .expect("bgr")
            .channel(0),
    };
    let n = y.data().len() as f64;
    let mean = y.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = y
        .data()
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    var.sqrt()
}
