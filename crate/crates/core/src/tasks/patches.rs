use ndarray::{s, Array2, ArrayView2};

use super::image::{MultispectralImage, MAX_INTENSITY};
use crate::error::{Error, Result};
use crate::network::Sample;

/// Aligned noisy/clean patch pairs, normalized to `[0, 1]`.
///
/// Each sample holds `patch²` rows (row-major pixel order inside the patch)
/// and one column per band.
#[derive(Clone, Debug)]
pub struct PatchSet {
    pub patches: Vec<Sample>,
    /// Top-left `(row, col)` of every patch.
    pub origins: Vec<(usize, usize)>,
    pub patch: usize,
    pub bands: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Back to `[0, 255]` intensity units.
    pub fn denormalize(normalized: ArrayView2<'_, f64>) -> Array2<f64> {
        normalized.mapv(|v| v * MAX_INTENSITY)
    }
}

pub fn patch_count(height: usize, width: usize, patch: usize, hop: usize) -> usize {
    if patch > height || patch > width || hop == 0 {
        return 0;
    }
    ((height - patch) / hop + 1) * ((width - patch) / hop + 1)
}

fn patch_matrix(img: &MultispectralImage, row: usize, col: usize, patch: usize) -> Array2<f64> {
    let block = img.data.slice(s![row..row + patch, col..col + patch, ..]);
    let mut out = Array2::zeros((patch * patch, img.bands()));
    for (dst, &src) in out.iter_mut().zip(block.iter()) {
        *dst = src / MAX_INTENSITY;
    }
    out
}

/// Every overlapping `patch × patch × bands` block at stride `hop`.
pub fn extract_patches(
    clean: &MultispectralImage,
    noisy: &MultispectralImage,
    patch: usize,
    hop: usize,
) -> Result<PatchSet> {
    if clean.data.dim() != noisy.data.dim() {
        return Err(Error::shape("noisy image", clean.data.shape(), noisy.data.shape()));
    }
    if patch == 0 || hop == 0 || patch > clean.height() || patch > clean.width() {
        return Err(Error::InvalidArgument(format!(
            "patch {patch} with hop {hop} does not fit a {}×{} image",
            clean.height(),
            clean.width()
        )));
    }
    let mut patches = Vec::with_capacity(patch_count(clean.height(), clean.width(), patch, hop));
    let mut origins = Vec::with_capacity(patches.capacity());
    for row in (0..=clean.height() - patch).step_by(hop) {
        for col in (0..=clean.width() - patch).step_by(hop) {
            patches.push(Sample {
                input: patch_matrix(noisy, row, col, patch),
                target: patch_matrix(clean, row, col, patch),
            });
            origins.push((row, col));
        }
    }
    Ok(PatchSet {
        patches,
        origins,
        patch,
        bands: clean.bands(),
    })
}
