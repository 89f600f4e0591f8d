//! Deterministic synthetic thermal-face generator.
//!
//! A face is an elliptical warm head on a cold background plus a handful of
//! anisotropic Gaussian blobs (periorbital hot spots, a cold nose, mouth,
//! cheeks and a few subject-specific vascular features). Geometry is given in
//! units of the inscribed radius of the frame, so rendering the same
//! parameters at a larger size scales content and frame together.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{write_pgm_file, GrayImage, PgmFileError};

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// Center in normalized (row, column) units.
    pub center: (f64, f64),
    /// Standard deviations along the blob's own axes.
    pub sigma: (f64, f64),
    /// Orientation of the first axis, degrees from the row axis.
    pub angle_deg: f64,
    /// Signed intensity added at the blob center.
    pub amplitude: f64,
}

impl Blob {
    fn eval(&self, u: f64, v: f64) -> f64 {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let du = u - self.center.0;
        let dv = v - self.center.1;
        let a = (c * du + s * dv) / self.sigma.0;
        let b = (-s * du + c * dv) / self.sigma.1;
        self.amplitude * (-0.5 * (a * a + b * b)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    pub background: f64,
    pub face_level: f64,
    /// Head semi-axes (rows, columns) in normalized units.
    pub head_axes: (f64, f64),
    /// Width of the smooth head boundary.
    pub edge_width: f64,
    pub blobs: Vec<Blob>,
}

impl FaceParams {
    /// Per-subject parameters derived from `(seed, subject)`.
    pub fn for_subject(seed: u64, subject: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, subject.wrapping_add(1)));
        let mut blobs = Vec::new();

        let eye_row = rng.random_range(-0.36..-0.16);
        let eye_sep = rng.random_range(0.18..0.36);
        let eye_amp = rng.random_range(0.12..0.35);
        let eye_sigma = (rng.random_range(0.05..0.09), rng.random_range(0.08..0.14));
        for side in [-1.0, 1.0] {
            blobs.push(Blob {
                center: (eye_row, side * eye_sep),
                sigma: eye_sigma,
                angle_deg: 0.0,
                amplitude: eye_amp,
            });
        }
        blobs.push(Blob {
            center: (rng.random_range(-0.05..0.12), 0.0),
            sigma: (rng.random_range(0.10..0.18), rng.random_range(0.05..0.09)),
            angle_deg: 0.0,
            amplitude: -rng.random_range(0.08..0.28),
        });
        blobs.push(Blob {
            center: (rng.random_range(0.30..0.48), 0.0),
            sigma: (rng.random_range(0.04..0.07), rng.random_range(0.12..0.24)),
            angle_deg: 0.0,
            amplitude: rng.random_range(-0.15..0.2),
        });
        let cheek_amp = rng.random_range(-0.15..0.15);
        let cheek_row = rng.random_range(0.05..0.25);
        let cheek_col = rng.random_range(0.3..0.45);
        for side in [-1.0, 1.0] {
            blobs.push(Blob {
                center: (cheek_row, side * cheek_col),
                sigma: (0.12, 0.1),
                angle_deg: 0.0,
                amplitude: cheek_amp,
            });
        }
        blobs.push(Blob {
            center: (rng.random_range(-0.65..-0.45), rng.random_range(-0.15..0.15)),
            sigma: (rng.random_range(0.08..0.15), rng.random_range(0.2..0.35)),
            angle_deg: rng.random_range(-20.0..20.0),
            amplitude: rng.random_range(-0.2..0.2),
        });
        for _ in 0..3 {
            let r = rng.random_range(0.1..0.6);
            let phi = rng.random_range(0.0..2.0 * PI);
            blobs.push(Blob {
                center: (r * phi.cos(), r * phi.sin()),
                sigma: (rng.random_range(0.04..0.12), rng.random_range(0.04..0.12)),
                angle_deg: rng.random_range(0.0..180.0),
                amplitude: rng.random_range(-0.2..0.2),
            });
        }

        Self {
            background: rng.random_range(0.02..0.08),
            face_level: rng.random_range(0.4..0.6),
            head_axes: (rng.random_range(0.74..0.9), rng.random_range(0.56..0.74)),
            edge_width: 0.04,
            blobs,
        }
    }

    /// Intensity at normalized coordinates, before clipping.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let s = ((u / self.head_axes.0).powi(2) + (v / self.head_axes.1).powi(2)).sqrt();
        let head = 1.0 / (1.0 + ((s - 1.0) / self.edge_width).exp());
        let features: f64 = self.blobs.iter().map(|b| b.eval(u, v)).sum();
        self.background + head * (self.face_level - self.background + features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Render {
    pub height: usize,
    pub width: usize,
    /// Content rotation in degrees, from the row axis toward the column axis.
    pub rotation_deg: f64,
    /// Content scale about the center, frame unchanged.
    pub scale: f64,
    pub noise_sigma: f64,
}

impl Default for Render {
    fn default() -> Self {
        Self {
            height: 96,
            width: 96,
            rotation_deg: 0.0,
            scale: 1.0,
            noise_sigma: 0.0,
        }
    }
}

/// Renders `params` rotated and scaled about the pixel `(⌊M/2⌋, ⌊N/2⌋)` with
/// additive Gaussian noise drawn from `seed`, clipped to `[0, 1]`.
///
/// Panics if the frame is smaller than 3x3, `scale <= 0` or
/// `noise_sigma < 0`.
pub fn synth_face(seed: u64, params: &FaceParams, render: &Render) -> GrayImage {
    let (h, w) = (render.height, render.width);
    assert!(h >= 3 && w >= 3, "frame must be at least 3x3");
    assert!(render.scale > 0.0, "scale must be positive");
    assert!(render.noise_sigma >= 0.0, "noise_sigma must be nonnegative");
    let (m, n) = (h / 2, w / 2);
    let unit = m.min(n).min(h - 1 - m).min(w - 1 - n) as f64;
    let (s, c) = render.rotation_deg.to_radians().sin_cos();
    let inv = 1.0 / (unit * render.scale);

    let clean = GrayImage::from_fn(h, w, |x, y| {
        let dx = x as f64 - m as f64;
        let dy = y as f64 - n as f64;
        // inverse rotation maps the output point back onto the pattern
        let u = (c * dx + s * dy) * inv;
        let v = (-s * dx + c * dy) * inv;
        params.eval(u, v)
    });
    if render.noise_sigma == 0.0 {
        return clean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, render.noise_sigma).expect("finite sigma");
    let pixels = clean.pixels();
    GrayImage::from_fn(h, w, |x, y| pixels[x * w + y] + normal.sample(&mut rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub images_per_subject: usize,
    pub height: usize,
    pub width: usize,
    /// Rotations are drawn uniformly from `[-max_rotation_deg, max_rotation_deg]`.
    pub max_rotation_deg: f64,
    /// Scales are drawn uniformly from `[1 - scale_jitter, 1 + scale_jitter]`.
    pub scale_jitter: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subjects: 8,
            images_per_subject: 20,
            height: 96,
            width: 96,
            max_rotation_deg: 20.0,
            scale_jitter: 0.1,
            noise_sigma: 0.02,
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot create directory {path}")]
    CreateDir {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Write(#[from] PgmFileError),
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |field, reason: &str| {
            Err(CorpusError::Invalid {
                field,
                reason: reason.to_owned(),
            })
        };
        if self.subjects == 0 {
            return bad("subjects", "must be at least 1");
        }
        if self.images_per_subject == 0 {
            return bad("images_per_subject", "must be at least 1");
        }
        if self.height < 3 || self.width < 3 {
            return bad("size", "frame must be at least 3x3");
        }
        if !(self.max_rotation_deg.is_finite() && self.max_rotation_deg >= 0.0) {
            return bad("max_rotation_deg", "must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.scale_jitter) {
            return bad("scale_jitter", "must lie in [0, 1)");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma", "must be finite and nonnegative");
        }
        Ok(())
    }

    /// Pose of image `index` of `subject`: (rotation degrees, scale, noise seed).
    pub fn pose(&self, subject: usize, index: usize) -> (f64, f64, u64) {
        let tag = ((subject as u64) << 32) | index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed ^ 0x005e_ed0f_f4ce, tag));
        let rot = if self.max_rotation_deg > 0.0 {
            rng.random_range(-self.max_rotation_deg..=self.max_rotation_deg)
        } else {
            0.0
        };
        let scale = if self.scale_jitter > 0.0 {
            rng.random_range(1.0 - self.scale_jitter..=1.0 + self.scale_jitter)
        } else {
            1.0
        };
        (rot, scale, rng.random())
    }

    pub fn render(&self, subject: usize, index: usize) -> GrayImage {
        let params = FaceParams::for_subject(self.seed, subject as u64);
        let (rotation_deg, scale, noise_seed) = self.pose(subject, index);
        synth_face(
            noise_seed,
            &params,
            &Render {
                height: self.height,
                width: self.width,
                rotation_deg,
                scale,
                noise_sigma: self.noise_sigma,
            },
        )
    }

    /// Writes `<out>/s%02d/i%03d.pgm` for every subject and image. Returns the
    /// written paths in order.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>, CorpusError> {
        self.validate()?;
        let mut written = Vec::with_capacity(self.subjects * self.images_per_subject);
        for subject in 0..self.subjects {
            let dir = out.join(format!("s{subject:02}"));
            fs::create_dir_all(&dir).map_err(|source| CorpusError::CreateDir {
                path: dir.display().to_string(),
                source,
            })?;
            for index in 0..self.images_per_subject {
                let path = dir.join(format!("i{index:03}.pgm"));
                write_pgm_file(&path, &self.render(subject, index), 255)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
