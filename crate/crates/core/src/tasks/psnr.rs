use ndarray::{ArrayView, Dimension};
use serde::{Serialize, Serializer};

use super::image::MAX_INTENSITY;
use crate::error::{Error, Result};

/// Peak signal-to-noise ratio with peak 255; identical inputs have no finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Decibels(f64),
    Identical,
}

impl Psnr {
    pub fn decibels(self) -> Option<f64> {
        match self {
            Psnr::Decibels(db) => Some(db),
            Psnr::Identical => None,
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Decibels(db) => s.serialize_f64(*db),
            Psnr::Identical => s.serialize_str("identical"),
        }
    }
}

/// `10·log10(255² / MSE)` over every element, in intensity units.
pub fn psnr<D: Dimension>(reference: ArrayView<'_, f64, D>, test: ArrayView<'_, f64, D>) -> Result<Psnr> {
    if reference.shape() != test.shape() {
        return Err(Error::shape("psnr operands", reference.shape(), test.shape()));
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument("psnr of an empty array".into()));
    }
    let mse = reference
        .iter()
        .zip(test.iter())
        .map(|(r, t)| (r - t) * (r - t))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Decibels(10.0 * (MAX_INTENSITY * MAX_INTENSITY / mse).log10()))
}

/// Mean of the finite values, plus how many were [`Psnr::Identical`].
pub fn mean_psnr(values: &[Psnr]) -> (Psnr, usize) {
    let finite: Vec<f64> = values.iter().filter_map(|p| p.decibels()).collect();
    let identical = values.len() - finite.len();
    if finite.is_empty() {
        return (Psnr::Identical, identical);
    }
    (Psnr::Decibels(finite.iter().sum::<f64>() / finite.len() as f64), identical)
}
