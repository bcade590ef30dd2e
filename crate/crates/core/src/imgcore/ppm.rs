//! Binary PGM (P5) and PPM (P6) with maxval 255.

use super::{ColorSpace, Image, ImageError};

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decode a binary P5/P6 file. Color images come back in BGR order.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::MalformedHeader(
            "file shorter than magic".into(),
        ));
    }
    let color_space = match &bytes[..2] {
        b"P6" => ColorSpace::Bgr,
        b"P5" => ColorSpace::Gray,
        other => {
            return Err(ImageError::UnsupportedMagic(
                String::from_utf8_lossy(other).into_owned(),
            ))
        }
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")? as usize;
    let height = r.number("height")? as usize;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(ImageError::MaxvalNot255(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader(
                "no whitespace after maxval".into(),
            ))
        }
    }

    let ch = color_space.channels();
    let expected = width * height * ch;
    let payload = &bytes[r.pos..];
    if payload.len() < expected {
        return Err(ImageError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    let mut data = payload[..expected].to_vec();
    if ch == 3 {
        for px in data.chunks_exact_mut(3) {
            px.swap(0, 2);
        }
    }
    Image::new(width, height, color_space, data)
}

/// Encode GRAY as P5 and BGR as P6 (written in file RGB order).
pub fn encode_ppm(img: &Image) -> Result<Vec<u8>, ImageError> {
    let magic = match img.color_space() {
        ColorSpace::Gray => "P5",
        ColorSpace::Bgr => "P6",
        other => {
            return Err(ImageError::WrongColorSpace {
                expected: ColorSpace::Bgr,
                actual: other,
            })
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    if img.channels() == 3 {
        for px in img.data().chunks_exact(3) {
            out.extend_from_slice(&[px[2], px[1], px[0]]);
        }
    } else {
        out.extend_from_slice(img.data());
    }
    Ok(out)
}
