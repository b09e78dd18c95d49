use std::io::Write;
use std::path::Path;

use ndarray::{s, Array3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_INTENSITY: f64 = 255.0;

/// `height × width × bands` intensities, nominally in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultispectralImage {
    pub data: Array3<f64>,
}

impl MultispectralImage {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("image has non-finite intensities".into()));
        }
        Ok(Self { data })
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn bands(&self) -> usize {
        self.data.dim().2
    }

    /// Writes one band as an 8-bit binary PGM.
    pub fn write_pgm(&self, band: usize, path: &Path) -> Result<()> {
        if band >= self.bands() {
            return Err(Error::InvalidArgument(format!(
                "band {band} out of range for a {}-band image",
                self.bands()
            )));
        }
        let mut out = Vec::with_capacity(self.height() * self.width() + 32);
        write!(out, "P5\n{} {}\n255\n", self.width(), self.height())?;
        out.extend(
            self.data
                .slice(s![.., .., band])
                .iter()
                .map(|&v| v.round().clamp(0.0, MAX_INTENSITY) as u8),
        );
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Fraction of pixels corrupted in each band.
    pub sparsity: f64,
    /// Standard deviation of the additive Gaussian, in intensity units.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::InvalidArgument(format!(
                "noise sparsity must lie in [0, 1], got {}",
                self.sparsity
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn corrupted_per_band(&self, height: usize, width: usize) -> usize {
        (self.sparsity * (height * width) as f64).round() as usize
    }
}

struct Shape {
    disk: bool,
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    level: f64,
    spectral_slope: f64,
    spectral_bend: f64,
    shade_y: f64,
    shade_x: f64,
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        let dy = (y - self.cy) / self.ry;
        let dx = (x - self.cx) / self.rx;
        if self.disk {
            dy * dy + dx * dx <= 1.0
        } else {
            dy.abs() <= 1.0 && dx.abs() <= 1.0
        }
    }
}

/// Deterministic piecewise-smooth multispectral scene.
///
/// A shaded background carries a handful of overlapping rectangles and
/// ellipses. Each region has its own smooth spectral curve, so every band
/// shares the same edges while intensities drift slowly from band to band.
pub fn synth_image(height: usize, width: usize, bands: usize, seed: u64) -> Result<MultispectralImage> {
    if height < 8 || width < 8 || bands == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic image needs at least 8×8 pixels and one band, got {height}×{width}×{bands}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let shape_count = 5 + (height * width / 1024).min(10);
    let shapes: Vec<Shape> = (0..shape_count)
        .map(|_| Shape {
            disk: rng.random_bool(0.5),
            cy: rng.random_range(0.0..h),
            cx: rng.random_range(0.0..w),
            ry: rng.random_range(0.08..0.3) * h,
            rx: rng.random_range(0.08..0.3) * w,
            level: rng.random_range(40.0..215.0),
            spectral_slope: rng.random_range(-50.0..50.0),
            spectral_bend: rng.random_range(-15.0..15.0),
            shade_y: rng.random_range(-15.0..15.0),
            shade_x: rng.random_range(-15.0..15.0),
        })
        .collect();
    let bg_level = rng.random_range(70.0..130.0);
    let bg_slope = rng.random_range(-30.0..30.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);

    let mut data = Array3::zeros((height, width, bands));
    for y in 0..height {
        let fy = y as f64 / h;
        for x in 0..width {
            let fx = x as f64 / w;
            let owner = shapes.iter().rev().find(|s| s.contains(y as f64, x as f64));
            for b in 0..bands {
                let t = if bands > 1 { b as f64 / (bands - 1) as f64 } else { 0.0 };
                let value = match owner {
                    Some(s) => {
                        s.level
                            + s.spectral_slope * t
                            + s.spectral_bend * (4.0 * t * (1.0 - t))
                            + s.shade_y * (fy - s.cy / h)
                            + s.shade_x * (fx - s.cx / w)
                    }
                    None => {
                        bg_level
                            + bg_slope * t
                            + 40.0 * fx
                            + 20.0 * (std::f64::consts::TAU * fy + phase + 0.5 * t).sin()
                    }
                };
                data[[y, x, b]] = value.clamp(0.0, MAX_INTENSITY);
            }
        }
    }
    MultispectralImage::new(data)
}

/// Sparse Gaussian corruption: in every band, exactly
/// `round(sparsity·H·W)` distinct pixels receive `N(0, sigma²)` noise, then
/// the image is clipped back to `[0, 255]`.
pub fn add_noise(img: &MultispectralImage, spec: &NoiseSpec) -> Result<MultispectralImage> {
    spec.validate()?;
    let (height, width, bands) = img.data.dim();
    let count = spec.corrupted_per_band(height, width);
    let mut out = img.clone();
    if count == 0 || spec.sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, spec.sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for b in 0..bands {
        let mut chosen = index::sample(&mut rng, height * width, count).into_vec();
        chosen.sort_unstable();
        for p in chosen {
            let v = &mut out.data[[p / width, p % width, b]];
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, MAX_INTENSITY);
        }
    }
    Ok(out)
}

/// Pearson correlation between two bands.
pub fn band_correlation(img: &MultispectralImage, a: usize, b: usize) -> f64 {
    let x = img.data.slice(s![.., .., a]);
    let y = img.data.slice(s![.., .., b]);
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&u, &v) in x.iter().zip(y.iter()) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx) * (u - mx);
        syy += (v - my) * (v - my);
    }
    sxy / (sxx * syy).sqrt()
}
