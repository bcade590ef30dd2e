use super::Image;

/// 3×3 Gaussian blur with the fixed `[1, 2, 1] / 4` taps on both axes.
///
/// Accumulates in integers and rounds half-up once, so a constant image is
/// reproduced exactly. Borders replicate the edge pixel.
pub fn gaussian_blur_3x3(img: &Image) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();
    let idx = |x: usize, y: usize, c: usize| (y * w + x) * ch + c;

    let mut horiz = vec![0u16; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            for c in 0..ch {
                horiz[idx(x, y, c)] = src[idx(xl, y, c)] as u16
                    + 2 * src[idx(x, y, c)] as u16
                    + src[idx(xr, y, c)] as u16;
            }
        }
    }

    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            for c in 0..ch {
                let sum = horiz[idx(x, yu, c)] as u32
                    + 2 * horiz[idx(x, y, c)] as u32
                    + horiz[idx(x, yd, c)] as u32;
                out[idx(x, y, c)] = ((sum + 8) >> 4) as u8;
            }
        }
    }
    Image::new(w, h, img.color_space(), out).expect("blur preserves layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ColorSpace;
    use proptest::prelude::*;

    #[test]
    fn impulse_response() {
        let mut data = vec![0u8; 9];
        data[4] = 255;
        let img = Image::new(3, 3, ColorSpace::Gray, data).unwrap();
        let out = gaussian_blur_3x3(&img);
        assert_eq!(out.get(1, 1, 0), 64);
        for (x, y) in [(1, 0), (0, 1), (2, 1), (1, 2)] {
            assert_eq!(out.get(x, y, 0), 32);
        }
        for (x, y) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(out.get(x, y, 0), 16);
        }
    }

    #[test]
    fn single_pixel_unchanged() {
        let img = Image::new(1, 1, ColorSpace::Bgr, vec![9, 100, 250]).unwrap();
        assert_eq!(gaussian_blur_3x3(&img), img);
    }

    #[test]
    fn constant_preserved() {
        let img = Image::filled(7, 5, ColorSpace::Bgr, 200);
        assert_eq!(gaussian_blur_3x3(&img), img);
    }

    proptest! {
        #[test]
        fn never_leaves_channel_range(w in 1usize..12, h in 1usize..12, data in proptest::collection::vec(any::<u8>(), 432)) {
            let img = Image::new(w, h, ColorSpace::Bgr, data[..w * h * 3].to_vec()).unwrap();
            let out = gaussian_blur_3x3(&img);
            for c in 0..3 {
                let (a, b) = (img.channel(c), out.channel(c));
                let lo = *a.data().iter().min().unwrap();
                let hi = *a.data().iter().max().unwrap();
                prop_assert!(b.data().iter().all(|&s| s >= lo && s <= hi));
            }
        }
    }
}
