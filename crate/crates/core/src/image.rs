//! Grayscale images, PGM (P2/P5) codec and nearest-neighbor resampling.
//!
//! Intensities are real numbers in `[0, 1]`. Quantization only happens when
//! reading or writing files. Row index `x` runs top-down over `0..height`,
//! column index `y` runs left-right over `0..width`.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {height}x{width}")]
    ZeroDimension { height: usize, width: usize },
    #[error("pixel buffer has {found} values, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("pixel {index} has intensity {value} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum PgmError {
    #[error("bad magic number {found:?}, expected P2 or P5")]
    BadMagic { found: String },
    #[error("malformed header field `{field}`")]
    BadHeader { field: &'static str },
    #[error("header field `{field}` is zero")]
    ZeroDimension { field: &'static str },
    #[error("header field `maxval` is zero")]
    ZeroMaxval,
    #[error("header field `maxval` is {0}, larger than 65535")]
    MaxvalTooLarge(u64),
    #[error("truncated pixel data: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample {index} is {value}, larger than maxval {maxval}")]
    SampleTooLarge { index: usize, value: u32, maxval: u32 },
    #[error("sample {index} is not a decimal integer")]
    BadSample { index: usize },
}

#[derive(Debug, Error)]
pub enum PgmFileError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}")]
    Parse {
        path: String,
        #[source]
        source: PgmError,
    },
}

/// Row-major grid of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Validates dimensions, buffer length and intensity range.
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::ZeroDimension { height, width });
        }
        if pixels.len() != height * width {
            return Err(ImageError::LengthMismatch {
                expected: height * width,
                found: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel. Values are
    /// clamped into `[0, 1]`; NaN maps to 0.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be nonzero");
        let mut pixels = Vec::with_capacity(height * width);
        for x in 0..height {
            for y in 0..width {
                let v = f(x, y);
                pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[x * self.width + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.pixels[x * self.width..(x + 1) * self.width]
    }

    /// Mean absolute per-pixel difference. Panics on mismatched dimensions.
    pub fn mean_abs_diff(&self, other: &GrayImage) -> f64 {
        assert_eq!(
            (self.height, self.width),
            (other.height, other.width),
            "mean_abs_diff on images of different size"
        );
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.pixels.len() as f64
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
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

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn header_number(&mut self, field: &'static str) -> Result<u64, PgmError> {
        let tok = self.token().ok_or(PgmError::BadHeader { field })?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or(PgmError::BadHeader { field })
    }
}

/// Parses a binary (P5) or ASCII (P2) PGM stream, scaling samples by
/// `1 / maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 {
        return Err(PgmError::BadMagic {
            found: String::from_utf8_lossy(bytes).into_owned(),
        });
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(PgmError::BadMagic {
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    let mut cur = Cursor {
        data: bytes,
        pos: 2,
    };
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if width == 0 {
        return Err(PgmError::ZeroDimension { field: "width" });
    }
    if height == 0 {
        return Err(PgmError::ZeroDimension { field: "height" });
    }
    if maxval == 0 {
        return Err(PgmError::ZeroMaxval);
    }
    if maxval > 65535 {
        return Err(PgmError::MaxvalTooLarge(maxval));
    }
    let (height, width) = (height as usize, width as usize);
    let maxval = maxval as u32;
    let count = height
        .checked_mul(width)
        .ok_or(PgmError::BadHeader { field: "height" })?;
    let scale = 1.0 / maxval as f64;

    let mut pixels = Vec::with_capacity(count.min(1 << 24));
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        let data = bytes.get(start..).unwrap_or(&[]);
        let sample_bytes = if maxval > 255 { 2 } else { 1 };
        let available = data.len() / sample_bytes;
        if available < count {
            return Err(PgmError::Truncated {
                expected: count,
                found: available,
            });
        }
        for index in 0..count {
            let value = if sample_bytes == 2 {
                u16::from_be_bytes([data[2 * index], data[2 * index + 1]]) as u32
            } else {
                data[index] as u32
            };
            if value > maxval {
                return Err(PgmError::SampleTooLarge {
                    index,
                    value,
                    maxval,
                });
            }
            pixels.push(value as f64 * scale);
        }
    } else {
        for index in 0..count {
            let tok = cur.token().ok_or(PgmError::Truncated {
                expected: count,
                found: index,
            })?;
            let value = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or(PgmError::BadSample { index })?;
            if value > maxval {
                return Err(PgmError::SampleTooLarge {
                    index,
                    value,
                    maxval,
                });
            }
            pixels.push(value as f64 * scale);
        }
    }
    Ok(GrayImage {
        height,
        width,
        pixels,
    })
}

/// Encodes `img` as binary P5, quantizing each intensity to
/// `round(p * maxval)`. Two bytes per sample (big-endian) when `maxval > 255`.
///
/// Panics if `maxval` is zero.
pub fn write_pgm(img: &GrayImage, maxval: u16) -> Vec<u8> {
    assert!(maxval > 0, "maxval must be positive");
    let header = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval);
    let wide = maxval > 255;
    let mut out = Vec::with_capacity(header.len() + img.pixels.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    let m = maxval as f64;
    for &p in &img.pixels {
        let q = (p * m).round().clamp(0.0, m) as u16;
        if wide {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<GrayImage, PgmFileError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| PgmFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_pgm(&bytes).map_err(|source| PgmFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_pgm_file(
    path: impl AsRef<Path>,
    img: &GrayImage,
    maxval: u16,
) -> Result<(), PgmFileError> {
    let path = path.as_ref();
    fs::write(path, write_pgm(img, maxval)).map_err(|source| PgmFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Index of the nearest source sample for output index `i`, using pixel
/// centers: `floor((i + 0.5) * src / dst)`, clamped.
#[inline]
pub(crate) fn nearest_index(i: usize, src: usize, dst: usize) -> usize {
    // (2i + 1) * src / (2 * dst) in exact integer arithmetic
    let idx = ((2 * i + 1) as u128 * src as u128) / (2 * dst as u128);
    (idx as usize).min(src - 1)
}

/// Nearest-neighbor resampling to `out_h x out_w`.
pub fn resize_nearest(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage, ImageError> {
    if out_h == 0 || out_w == 0 {
        return Err(ImageError::ZeroDimension {
            height: out_h,
            width: out_w,
        });
    }
    let cols: Vec<usize> = (0..out_w)
        .map(|j| nearest_index(j, img.width, out_w))
        .collect();
    let mut pixels = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let row = img.row(nearest_index(i, img.height, out_h));
        pixels.extend(cols.iter().map(|&c| row[c]));
    }
    Ok(GrayImage {
        height: out_h,
        width: out_w,
        pixels,
    })
}
