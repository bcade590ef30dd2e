use super::{round_u8, Image, ImageError};

/// Per-axis sampling plan: left index, right index and right-hand weight.
fn axis_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    let max = (input - 1) as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Center-aligned bilinear resampling, channel by channel.
pub fn resize_bilinear(img: &Image, out_w: usize, out_h: usize) -> Result<Image, ImageError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroDimension {
            width: out_w,
            height: out_h,
        });
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let xs = axis_taps(img.width(), out_w);
    let ys = axis_taps(img.height(), out_h);
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = img.get(x0, y0, c) as f64 * (1.0 - fx) + img.get(x1, y0, c) as f64 * fx;
                let bot = img.get(x0, y1, c) as f64 * (1.0 - fx) + img.get(x1, y1, c) as f64 * fx;
                data.push(round_u8(top * (1.0 - fy) + bot * fy));
            }
        }
    }
    Image::new(out_w, out_h, img.color_space(), data)
}
