use std::path::Path;

use abip::train::{grad_check_against, sample_gradient, GradCheckReport};
use abip::{Activation, Network, ProductKind, Sample};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::failure::{CmdResult, Failure};
use crate::train::registry_with;

pub const MAX_PARAMS: usize = 10_000;
pub const THRESHOLD: f64 = 1e-4;

pub struct GradcheckArgs<'a> {
    pub product: &'a str,
    pub dim: Option<usize>,
    pub topology: &'a [usize],
    pub seed: u64,
    pub eps: f64,
    pub product_file: Option<&'a Path>,
    pub corrupt_gradient: bool,
}

#[derive(Serialize)]
struct Output<'a> {
    product: &'a str,
    dim: usize,
    topology: &'a [usize],
    seed: u64,
    eps: f64,
    param_count: usize,
    threshold: f64,
    passed: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    corrupted: bool,
    report: GradCheckReport,
}

pub fn cmd_gradcheck(args: &GradcheckArgs<'_>) -> CmdResult {
    let registry = registry_with(args.product_file)?;
    let dim = match (args.dim, ProductKind::fixed_dim(args.product)) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => registry
            .custom_products()
            .find(|p| p.name() == args.product)
            .map(|p| p.dim())
            .ok_or_else(|| Failure::config(format!("--dim is required for product `{}`", args.product)))?,
    };
    if !(args.eps > 0.0 && args.eps.is_finite()) {
        return Err(Failure::config(format!("eps must be positive, got {}", args.eps)));
    }
    let product = registry.resolve(args.product, dim)?;
    let net = Network::init(args.topology, product, Activation::Sigmoid, Activation::Sigmoid, args.seed)?;
    if net.param_count() >= MAX_PARAMS {
        return Err(Failure::config(format!(
            "gradcheck is limited to fewer than {MAX_PARAMS} parameters, topology has {}",
            net.param_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5eed);
    let sample = Sample {
        input: Array2::from_shape_simple_fn((net.input_width(), dim), || rng.random_range(-1.0..1.0)),
        target: Array2::from_shape_simple_fn((net.output_width(), dim), || rng.random_range(0.0..1.0)),
    };
    let (_, mut grads) = sample_gradient(&net, &sample)?;
    if args.corrupt_gradient {
        let g = &mut grads.d_weights[0][[0, 0, 0]];
        *g += g.abs().max(1e-3);
    }
    let report = grad_check_against(&net, &sample, args.eps, &grads)?;
    let passed = report.max_rel_err < THRESHOLD;
    let out = Output {
        product: args.product,
        dim,
        topology: args.topology,
        seed: args.seed,
        eps: args.eps,
        param_count: net.param_count(),
        threshold: THRESHOLD,
        passed,
        corrupted: args.corrupt_gradient,
        report,
    };
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    if passed {
        Ok(())
    } else {
        Err(Failure::Numeric(anyhow::anyhow!(
            "max relative error {:.3e} exceeds {THRESHOLD:e}",
            out.report.max_rel_err
        )))
    }
}
