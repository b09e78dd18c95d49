//! Patch-based multispectral denoising, comparing the vector network with
//! two scalar baselines trained on the same patches.
//!
//! - `abipnn`: one network with `N = bands` vector neurons.
//! - `dnn_concat`: one scalar network on the `64·bands` concatenated pixels,
//!   hidden width chosen as the smallest giving at least as many parameters
//!   as `abipnn`.
//! - `dnn_parallel`: `bands` independent scalar networks, one per band, each
//!   with the `abipnn` topology.

use ndarray::{s, Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::{add_noise, synth_image, MultispectralImage, NoiseSpec, MAX_INTENSITY};
use super::patches::{extract_patches, PatchSet};
use super::psnr::{mean_psnr, psnr, Psnr};
use crate::bilinear::{BilinearProduct, ProductRegistry};
use crate::error::{Error, Result};
use crate::network::{Activation, Network, Sample};
use crate::train::{train, EpochRecord, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Abipnn,
    DnnConcat,
    DnnParallel,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Abipnn => "abipnn",
            Method::DnnConcat => "dnn_concat",
            Method::DnnParallel => "dnn_parallel",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    pub h: usize,
    pub w: usize,
    pub bands: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub topology: Vec<usize>,
    /// Product name; its dimension is the band count.
    pub product: String,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub init_seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            topology: vec![64, 64, 64, 64],
            product: "circular".into(),
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Sigmoid,
            init_seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    pub size: usize,
    pub hop: usize,
    /// Patches used for training, validation included.
    pub train_count: usize,
    /// Held-out patches scored for PSNR; `None` scores every remaining patch.
    pub test_count: Option<usize>,
    pub seed: u64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            size: 8,
            hop: 1,
            train_count: 500,
            test_count: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseConfig {
    pub image: ImageConfig,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub patches: PatchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub baselines: Vec<Method>,
    /// Reassemble full denoised images (overlap-averaged) for inspection.
    #[serde(default)]
    pub reconstruct_images: bool,
}

impl DenoiseConfig {
    /// 64×64×10 synthetic scene, 10% sparsity, sigma 100, `64-64-64-64` circular net.
    pub fn desk_scale() -> Self {
        Self {
            image: ImageConfig { h: 64, w: 64, bands: 10, seed: 2024 },
            noise: NoiseSpec { sparsity: 0.10, sigma: 100.0, seed: 7 },
            net: NetConfig::default(),
            patches: PatchConfig::default(),
            train: TrainConfig {
                max_epochs: 200,
                patience: 100,
                minibatch_size: 32,
                seed: 0,
                validation_fraction: 0.1,
                adam: Default::default(),
            },
            baselines: vec![Method::DnnConcat, Method::DnnParallel],
            reconstruct_images: false,
        }
    }
}

/// Full-scale reference PSNRs for one noise setting (noisy, DNN-concat, DNN-parallel, ABIPNN).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferencePsnr {
    pub sparsity: f64,
    pub sigma: f64,
    pub noisy: f64,
    pub dnn_concat: f64,
    pub dnn_parallel: f64,
    pub abipnn: f64,
}

/// Published full-scale results on a 205×205×10 real scene, kept for context.
pub const FULL_SCALE_REFERENCE: [ReferencePsnr; 5] = [
    ReferencePsnr { sparsity: 0.05, sigma: 100.0, noisy: 20.92, dnn_concat: 25.06, dnn_parallel: 30.18, abipnn: 33.92 },
    ReferencePsnr { sparsity: 0.10, sigma: 100.0, noisy: 18.16, dnn_concat: 24.80, dnn_parallel: 28.88, abipnn: 32.47 },
    ReferencePsnr { sparsity: 0.15, sigma: 100.0, noisy: 16.35, dnn_concat: 24.93, dnn_parallel: 28.06, abipnn: 31.74 },
    ReferencePsnr { sparsity: 0.10, sigma: 150.0, noisy: 14.64, dnn_concat: 24.59, dnn_parallel: 27.17, abipnn: 31.01 },
    ReferencePsnr { sparsity: 0.10, sigma: 200.0, noisy: 12.10, dnn_concat: 24.03, dnn_parallel: 25.88, abipnn: 29.55 },
];

pub fn full_scale_reference(noise: &NoiseSpec) -> Option<ReferencePsnr> {
    FULL_SCALE_REFERENCE
        .iter()
        .copied()
        .find(|r| (r.sparsity - noise.sparsity).abs() < 1e-9 && (r.sigma - noise.sigma).abs() < 1e-9)
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub product: String,
    /// Topology of one network (each of the per-band networks for `dnn_parallel`).
    pub topology: Vec<usize>,
    pub networks: usize,
    pub param_count: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub psnr: Psnr,
    pub psnr_gain_db: Option<f64>,
    pub diverged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history_csv: Vec<String>,
    /// Per-network training histories.
    #[serde(skip)]
    pub histories: Vec<Vec<EpochRecord>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DenoiseReport {
    pub config: DenoiseConfig,
    pub psnr_noisy: Psnr,
    pub psnr_abipnn: Option<Psnr>,
    pub degenerate: bool,
    pub train_patches: usize,
    pub test_patches: usize,
    /// Test patches whose PSNR is infinite (excluded from the averages).
    pub identical_noisy_patches: usize,
    pub methods: Vec<MethodReport>,
    pub full_scale_reference: Option<ReferencePsnr>,
}

/// Everything a run produces; images are kept out of the JSON report.
pub struct DenoiseOutcome {
    pub report: DenoiseReport,
    pub clean: MultispectralImage,
    pub noisy: MultispectralImage,
    /// Overlap-averaged reconstruction from the vector network, if requested.
    pub denoised: Option<MultispectralImage>,
    pub networks: Vec<(Method, Vec<Network>)>,
}

/// Smallest hidden width `h` such that a scalar `[in, h, …, h, out]` network
/// has at least `target` parameters.
pub fn matched_hidden_width(input: usize, output: usize, hidden_layers: usize, target: usize) -> usize {
    let params = |h: usize| {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(h, hidden_layers));
        widths.push(output);
        widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>()
    };
    let mut h = 1;
    while params(h) < target {
        h += 1;
    }
    h
}

fn flatten_sample(s: &Sample) -> Sample {
    let len = s.input.len();
    Sample {
        input: s.input.to_shape((len, 1)).unwrap().to_owned(),
        target: s.target.to_shape((len, 1)).unwrap().to_owned(),
    }
}

fn band_sample(s: &Sample, band: usize) -> Sample {
    Sample {
        input: s.input.slice(s![.., band..band + 1]).to_owned(),
        target: s.target.slice(s![.., band..band + 1]).to_owned(),
    }
}

/// Predicts normalized `64×bands` patches for `method`.
fn predict_patches(method: Method, nets: &[Network], inputs: &[&Sample]) -> Result<Vec<Array2<f64>>> {
    match method {
        Method::Abipnn => {
            let views: Vec<_> = inputs.iter().map(|s| s.input.view()).collect();
            nets[0].compile().predict_batch(&views)
        }
        Method::DnnConcat => {
            let flat: Vec<Sample> = inputs.iter().map(|s| flatten_sample(s)).collect();
            let views: Vec<_> = flat.iter().map(|s| s.input.view()).collect();
            let shape = inputs[0].input.raw_dim();
            Ok(nets[0]
                .compile()
                .predict_batch(&views)?
                .into_iter()
                .map(|p| p.into_shape_with_order(shape).unwrap())
                .collect())
        }
        Method::DnnParallel => {
            let shape = inputs[0].input.raw_dim();
            let mut out: Vec<Array2<f64>> = inputs.iter().map(|_| Array2::zeros(shape)).collect();
            for (band, net) in nets.iter().enumerate() {
                let per_band: Vec<Sample> = inputs.iter().map(|s| band_sample(s, band)).collect();
                let views: Vec<_> = per_band.iter().map(|s| s.input.view()).collect();
                for (o, p) in out.iter_mut().zip(net.compile().predict_batch(&views)?) {
                    o.column_mut(band).assign(&p.column(0));
                }
            }
            Ok(out)
        }
    }
}

fn patch_psnr(prediction: &Array2<f64>, clean: &Sample) -> Result<Psnr> {
    let pred = PatchSet::denormalize(prediction.mapv(|v| v.clamp(0.0, 1.0)).view());
    let reference = PatchSet::denormalize(clean.target.view());
    psnr(reference.view(), pred.view())
}

struct Trained {
    nets: Vec<Network>,
    histories: Vec<Vec<EpochRecord>>,
    best_epochs: Vec<usize>,
    diverged: bool,
}

fn train_networks(nets: Vec<Network>, datasets: Vec<Vec<Sample>>, cfg: &TrainConfig) -> Result<Trained> {
    let mut out = Trained {
        nets: Vec::new(),
        histories: Vec::new(),
        best_epochs: Vec::new(),
        diverged: false,
    };
    for (net, data) in nets.into_iter().zip(datasets) {
        match train(net.clone(), &data, cfg) {
            Ok(t) => {
                out.nets.push(t.network);
                out.histories.push(t.history);
                out.best_epochs.push(t.best_epoch);
            }
            Err(Error::Diverged { history, .. }) => {
                out.diverged = true;
                out.nets.push(net);
                out.histories.push(history);
                out.best_epochs.push(0);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Generates data, trains every requested method and scores held-out patches.
pub fn run_denoise_experiment(config: &DenoiseConfig, registry: &ProductRegistry) -> Result<DenoiseOutcome> {
    config.noise.validate()?;
    config.train.validate()?;
    let bands = config.image.bands;
    let topology = &config.net.topology;
    let area = config.patches.size * config.patches.size;
    if topology.len() < 2 || topology[0] != area || *topology.last().unwrap() != area {
        return Err(Error::InvalidArgument(format!(
            "topology must start and end with the patch area {area}, got {topology:?}"
        )));
    }
    let product = registry.resolve(&config.net.product, bands)?;

    let clean = synth_image(config.image.h, config.image.w, bands, config.image.seed)?;
    let noisy = add_noise(&clean, &config.noise)?;
    let all = extract_patches(&clean, &noisy, config.patches.size, config.patches.hop)?;

    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.patches.seed));
    let train_count = config.patches.train_count.min(all.len().saturating_sub(1));
    if train_count == 0 {
        return Err(Error::InvalidArgument("no patches left for training".into()));
    }
    let test_end = config
        .patches
        .test_count
        .map_or(all.len(), |n| (train_count + n).min(all.len()));
    let train_set: Vec<Sample> = order[..train_count].iter().map(|&i| all.patches[i].clone()).collect();
    let test_set: Vec<&Sample> = order[train_count..test_end].iter().map(|&i| &all.patches[i]).collect();
    if test_set.is_empty() {
        return Err(Error::InvalidArgument("no patches left for testing".into()));
    }

    let noisy_scores = test_set
        .iter()
        .map(|s| patch_psnr(&s.input, s))
        .collect::<Result<Vec<_>>>()?;
    let (psnr_noisy, identical) = mean_psnr(&noisy_scores);
    let degenerate = psnr_noisy == Psnr::Identical;

    let mut report = DenoiseReport {
        config: config.clone(),
        psnr_noisy,
        psnr_abipnn: None,
        degenerate,
        train_patches: train_count,
        test_patches: test_set.len(),
        identical_noisy_patches: identical,
        methods: Vec::new(),
        full_scale_reference: full_scale_reference(&config.noise),
    };
    let mut outcome_nets = Vec::new();
    if degenerate {
        return Ok(DenoiseOutcome {
            report,
            clean,
            noisy,
            denoised: None,
            networks: outcome_nets,
        });
    }

    let (hidden, output) = (config.net.hidden_activation, config.net.output_activation);
    let seed = config.net.init_seed;
    let abipnn = Network::init(topology, product.clone(), hidden, output, seed)?;
    let abipnn_params = abipnn.param_count();
    let hidden_layers = topology.len() - 2;

    let mut methods = vec![Method::Abipnn];
    for &b in &config.baselines {
        if !methods.contains(&b) {
            methods.push(b);
        }
    }

    let mut denoised = None;
    for method in methods {
        let (nets, datasets, net_topology, product_name) = match method {
            Method::Abipnn => (vec![abipnn.clone()], vec![train_set.clone()], topology.clone(), product.name().to_string()),
            Method::DnnConcat => {
                let (r, g) = (topology[0] * bands, topology.last().unwrap() * bands);
                let h = matched_hidden_width(r, g, hidden_layers, abipnn_params);
                let mut t = vec![r];
                t.extend(std::iter::repeat_n(h, hidden_layers));
                t.push(g);
                let scalar = BilinearProduct::builtin("scalar", 1)?;
                let net = Network::init(&t, scalar, hidden, output, seed)?;
                (vec![net], vec![train_set.iter().map(flatten_sample).collect()], t, "scalar".to_string())
            }
            Method::DnnParallel => {
                let scalar = BilinearProduct::builtin("scalar", 1)?;
                let nets = (0..bands)
                    .map(|b| Network::init(topology, scalar.clone(), hidden, output, seed + b as u64))
                    .collect::<Result<Vec<_>>>()?;
                let data = (0..bands)
                    .map(|b| train_set.iter().map(|s| band_sample(s, b)).collect())
                    .collect();
                (nets, data, topology.clone(), "scalar".to_string())
            }
        };
        let networks = nets.len();
        let param_count = nets.iter().map(Network::param_count).sum();
        let trained = train_networks(nets, datasets, &config.train)?;
        let predictions = predict_patches(method, &trained.nets, &test_set)?;
        let scores = predictions
            .iter()
            .zip(&test_set)
            .map(|(p, s)| patch_psnr(p, s))
            .collect::<Result<Vec<_>>>()?;
        let (score, _) = mean_psnr(&scores);
        let gain = match (score, psnr_noisy) {
            (Psnr::Decibels(a), Psnr::Decibels(b)) => Some(a - b),
            _ => None,
        };
        if method == Method::Abipnn {
            report.psnr_abipnn = Some(score);
            if config.reconstruct_images {
                denoised = Some(reconstruct(&trained.nets, &all, clean.data.dim())?);
            }
        }
        report.methods.push(MethodReport {
            method,
            product: product_name,
            topology: net_topology,
            networks,
            param_count,
            epochs_run: trained.histories.iter().map(Vec::len).sum(),
            best_epoch: trained.best_epochs.iter().copied().max().unwrap_or(0),
            psnr: score,
            psnr_gain_db: gain,
            diverged: trained.diverged,
            history_csv: Vec::new(),
            histories: trained.histories,
        });
        outcome_nets.push((method, trained.nets));
    }

    Ok(DenoiseOutcome {
        report,
        clean,
        noisy,
        denoised,
        networks: outcome_nets,
    })
}

/// Overlap-averaged full image from per-patch predictions of the vector network.
fn reconstruct(nets: &[Network], all: &PatchSet, dim: (usize, usize, usize)) -> Result<MultispectralImage> {
    let refs: Vec<&Sample> = all.patches.iter().collect();
    let preds = predict_patches(Method::Abipnn, nets, &refs)?;
    let mut sum = Array3::<f64>::zeros(dim);
    let mut count = Array3::<f64>::zeros(dim);
    let p = all.patch;
    for (pred, &(row, col)) in preds.iter().zip(&all.origins) {
        for (idx, patch_row) in pred.axis_iter(Axis(0)).enumerate() {
            let (r, c) = (row + idx / p, col + idx % p);
            for (b, &v) in patch_row.iter().enumerate() {
                sum[[r, c, b]] += v.clamp(0.0, 1.0) * MAX_INTENSITY;
                count[[r, c, b]] += 1.0;
            }
        }
    }
    MultispectralImage::new(sum / count.mapv(|c: f64| c.max(1.0)))
}
