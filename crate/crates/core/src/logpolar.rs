//! Cartesian to log-polar conversion with a fixed square output.
//!
//! The reference circle is centered at `(⌊M/2⌋, ⌊N/2⌋)` with the largest
//! radius `R` that stays inside the image. The output is `S x S` with
//! `S = Z^q`, `q = ⌈log_Z R⌉`. Rows sample the log radius uniformly over
//! `[ln 1, ln R]` (row 0 innermost) and columns sample the angle uniformly over
//! `[0°, 360°)`, so rotating the input about the center circularly shifts the
//! output columns and scaling about the center shifts the rows.
//!
//! Each output cell is filled by inverse mapping: the cell's `(r, θ)` is
//! mapped back to Cartesian coordinates and the nearest source pixel is taken.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{resize_nearest, GrayImage};

/// Innermost sampled radius; `ln r` is undefined at the center.
pub const MIN_RADIUS: f64 = 1.0;

pub const DEFAULT_BASE: u32 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PolarError {
    #[error("image {height}x{width} is too small for a log-polar transform (need at least 3x3)")]
    TooSmall { height: usize, width: usize },
    #[error("resize base must be at least 2, got {0}")]
    BaseTooSmall(u32),
    #[error("output side {base}^{exponent} overflows")]
    SideOverflow { base: u32, exponent: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGeometry {
    pub center_row: usize,
    pub center_col: usize,
    pub radius: f64,
    pub base: u32,
    pub exponent: u32,
    pub side: usize,
}

/// Center, reference radius and output side for an `height x width` image.
pub fn compute_geometry(height: usize, width: usize, base: u32) -> Result<PolarGeometry, PolarError> {
    if base < 2 {
        return Err(PolarError::BaseTooSmall(base));
    }
    if height < 3 || width < 3 {
        return Err(PolarError::TooSmall { height, width });
    }
    let m = height / 2;
    let n = width / 2;
    let radius = m.min(n).min(height - 1 - m).min(width - 1 - n);

    // smallest q >= 1 with base^q >= radius
    let mut exponent = 1u32;
    let mut side = base as u64;
    while side < radius as u64 {
        exponent += 1;
        side = side
            .checked_mul(base as u64)
            .filter(|s| *s <= usize::MAX as u64)
            .ok_or(PolarError::SideOverflow { base, exponent })?;
    }
    Ok(PolarGeometry {
        center_row: m,
        center_col: n,
        radius: radius as f64,
        base,
        exponent,
        side: side as usize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoord {
    pub r: f64,
    /// Degrees in `[0, 360)`, measured from the row axis toward the column axis.
    pub theta_deg: f64,
}

impl PolarCoord {
    /// `ln r`; `-inf` at the center.
    pub fn log_radius(&self) -> f64 {
        self.r.ln()
    }
}

pub fn cart_to_polar(x: f64, y: f64, geom: &PolarGeometry) -> PolarCoord {
    let dx = x - geom.center_row as f64;
    let dy = y - geom.center_col as f64;
    let r = dx.hypot(dy);
    let mut theta = dy.atan2(dx).to_degrees();
    if theta < 0.0 {
        theta += 360.0;
    }
    if theta >= 360.0 {
        theta = 0.0;
    }
    PolarCoord {
        r,
        theta_deg: theta,
    }
}

/// Radius sampled by output row `i` of an `side`-row grid.
pub fn row_radius(i: usize, geom: &PolarGeometry) -> f64 {
    let lo = MIN_RADIUS.ln();
    let hi = geom.radius.ln();
    if geom.side <= 1 {
        return geom.radius;
    }
    (lo + (hi - lo) * i as f64 / (geom.side - 1) as f64).exp()
}

/// Angle in degrees sampled by output column `j`.
pub fn column_angle_deg(j: usize, geom: &PolarGeometry) -> f64 {
    360.0 * j as f64 / geom.side as f64
}

pub fn log_polar_transform(img: &GrayImage, base: u32) -> Result<GrayImage, PolarError> {
    let geom = compute_geometry(img.height(), img.width(), base)?;
    Ok(log_polar_with(img, &geom))
}

/// Transform with a precomputed geometry. `geom` must come from
/// [`compute_geometry`] for this image's dimensions.
pub fn log_polar_with(img: &GrayImage, geom: &PolarGeometry) -> GrayImage {
    let s = geom.side;
    let (m, n) = (geom.center_row as f64, geom.center_col as f64);
    let (h, w) = (img.height() as f64, img.width() as f64);
    let angles: Vec<(f64, f64)> = (0..s)
        .map(|j| (TAU * j as f64 / s as f64).sin_cos())
        .collect();
    let radii: Vec<f64> = (0..s).map(|i| row_radius(i, geom)).collect();
    GrayImage::from_fn(s, s, |i, j| {
        let r = radii[i];
        let (sin, cos) = angles[j];
        let x = (m + r * cos).round().clamp(0.0, h - 1.0) as usize;
        let y = (n + r * sin).round().clamp(0.0, w - 1.0) as usize;
        img.get(x, y)
    })
}

/// Log-polar transform resampled to a fixed `side x side`, so images of
/// different sizes land on a common grid.
pub fn log_polar_fixed(img: &GrayImage, base: u32, side: usize) -> Result<GrayImage, PolarError> {
    let out = log_polar_transform(img, base)?;
    if out.height() == side {
        return Ok(out);
    }
    Ok(resize_nearest(&out, side, side).expect("side checked nonzero by caller"))
}

/// Column `j` of the result is column `(j - k) mod width` of `img`.
pub fn circular_column_shift(img: &GrayImage, k: i64) -> GrayImage {
    let w = img.width() as i64;
    let shift = k.rem_euclid(w) as usize;
    let width = img.width();
    GrayImage::from_fn(img.height(), width, |x, y| {
        img.get(x, (y + width - shift) % width)
    })
}

/// Shift `k` in `0..width` minimizing the mean absolute difference between
/// `circular_column_shift(reference, k)` and `target`, with the residual.
/// Ties go to the smallest `k`.
pub fn best_column_shift(reference: &GrayImage, target: &GrayImage) -> (i64, f64) {
    let mut best = (0i64, f64::INFINITY);
    for k in 0..reference.width() as i64 {
        let d = circular_column_shift(reference, k).mean_abs_diff(target);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}
