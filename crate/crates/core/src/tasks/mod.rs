//! Multispectral denoising: synthetic scenes, sparse noise, patches and PSNR.

pub mod experiment;
pub mod image;
pub mod patches;
pub mod psnr;

pub use experiment::{
    full_scale_reference, matched_hidden_width, run_denoise_experiment, DenoiseConfig, DenoiseOutcome, DenoiseReport,
    ImageConfig, Method, MethodReport, NetConfig, PatchConfig, ReferencePsnr, FULL_SCALE_REFERENCE,
};
pub use image::{add_noise, band_correlation, synth_image, MultispectralImage, NoiseSpec, MAX_INTENSITY};
pub use patches::{extract_patches, patch_count, PatchSet};
pub use psnr::{mean_psnr, psnr, Psnr};
