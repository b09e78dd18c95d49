use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use abip::io::{load_checkpoint, load_tensor, save_checkpoint, CHECKPOINT_VERSION};
use abip::train::{evaluate, train, EpochRecord, TrainConfig};
use abip::{Activation, Network, ProductRegistry, Sample};
use ndarray::{Array2, Axis, Ix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{self, resolve_path};
use crate::failure::{write_output, CmdResult, Failure};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub topology: Vec<usize>,
    pub product: String,
    pub dim: usize,
    #[serde(default = "sigmoid")]
    pub hidden_activation: Activation,
    #[serde(default = "sigmoid")]
    pub output_activation: Activation,
    #[serde(default)]
    pub init_seed: u64,
}

fn sigmoid() -> Activation {
    Activation::Sigmoid
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// ABTN files shaped `(M, R, N)` and `(M, G, N)`.
    Tensors { inputs: PathBuf, targets: PathBuf },
    /// One random input/target pair sized to the network.
    OneSample { seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub net: NetSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub train: TrainConfig,
    /// Custom product definition, needed when `net.product` is not builtin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_file: Option<PathBuf>,
}

impl TrainRunConfig {
    /// Makes every path absolute so the manifest works from any directory.
    fn resolve_paths(&mut self, base: &Path) {
        if let DataSpec::Tensors { inputs, targets } = &mut self.data {
            *inputs = resolve_path(base, inputs);
            *targets = resolve_path(base, targets);
        }
        if let Some(p) = &mut self.product_file {
            *p = resolve_path(base, p);
        }
    }
}

#[derive(Serialize)]
pub struct Versions {
    pub abip: &'static str,
    pub abip_cli: &'static str,
    pub checkpoint_format: u32,
}

pub fn versions() -> Versions {
    Versions {
        abip: abip::VERSION,
        abip_cli: env!("CARGO_PKG_VERSION"),
        checkpoint_format: CHECKPOINT_VERSION,
    }
}

#[derive(Serialize)]
struct TrainResults {
    samples: usize,
    param_count: usize,
    epochs_run: usize,
    best_epoch: usize,
    best_val_mse: f64,
    final_train_mse: f64,
    final_val_mse: f64,
    /// MSE of the saved (best-validation) network over the whole dataset.
    checkpoint_mse: f64,
    stopped_early: bool,
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    command: &'static str,
    config: &'a TrainRunConfig,
    seed: u64,
    versions: Versions,
    results: TrainResults,
}

pub fn registry_with(product_file: Option<&Path>) -> CmdResult<ProductRegistry> {
    let mut reg = ProductRegistry::new();
    if let Some(path) = product_file {
        reg.load_json(path).map_err(|e| match e {
            abip::Error::Io(io) => Failure::data_at(path, io),
            other => Failure::config(format!("{}: {other}", path.display())),
        })?;
    }
    Ok(reg)
}

fn load_samples(path: &Path, which: &str) -> CmdResult<Vec<Array2<f64>>> {
    let t = load_tensor(path).map_err(|e| Failure::data_at(path, e))?;
    if t.ndim() != 3 {
        return Err(Failure::data_at(path, format!("{which} tensor must have rank 3, found {:?}", t.shape())));
    }
    Ok(t.axis_iter(Axis(0))
        .map(|s| s.into_dimensionality::<Ix2>().unwrap().to_owned())
        .collect())
}

pub fn load_dataset(spec: &DataSpec, net: &Network) -> CmdResult<Vec<Sample>> {
    match spec {
        DataSpec::Tensors { inputs, targets } => {
            let xs = load_samples(inputs, "input")?;
            let ys = load_samples(targets, "target")?;
            if xs.len() != ys.len() {
                return Err(Failure::data_at(
                    targets,
                    format!("{} targets for {} inputs", ys.len(), xs.len()),
                ));
            }
            let samples: Vec<Sample> = xs.into_iter().zip(ys).map(|(input, target)| Sample { input, target }).collect();
            let wanted = |rows: usize| [rows, net.dim()];
            if let Some(s) = samples.first() {
                if s.input.shape() != wanted(net.input_width()) {
                    return Err(Failure::data_at(inputs, format!("samples are {:?}, network wants {:?}", s.input.shape(), wanted(net.input_width()))));
                }
                if s.target.shape() != wanted(net.output_width()) {
                    return Err(Failure::data_at(targets, format!("samples are {:?}, network wants {:?}", s.target.shape(), wanted(net.output_width()))));
                }
            }
            Ok(samples)
        }
        DataSpec::OneSample { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let input = Array2::from_shape_simple_fn((net.input_width(), net.dim()), || rng.random_range(-1.0..1.0));
            let target = Array2::from_shape_simple_fn((net.output_width(), net.dim()), || rng.random_range(0.2..0.8));
            Ok(vec![Sample { input, target }])
        }
    }
}

pub fn build_network(spec: &NetSpec, registry: &ProductRegistry) -> CmdResult<Network> {
    let product = registry.resolve(&spec.product, spec.dim)?;
    Ok(Network::init(&spec.topology, product, spec.hidden_activation, spec.output_activation, spec.init_seed)?)
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_mse,val_mse\n");
    for r in history {
        writeln!(s, "{},{},{}", r.epoch, r.train_mse, r.val_mse).unwrap();
    }
    s
}

pub fn timing_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,elapsed_seconds\n");
    for r in history {
        writeln!(s, "{},{:.6}", r.epoch, r.elapsed_seconds).unwrap();
    }
    s
}

pub fn cmd_train(config_path: &Path, overrides: &[String], out: &Path) -> CmdResult {
    let loaded = config::load::<TrainRunConfig>(config_path, "train", overrides)?;
    let mut cfg = loaded.config;
    cfg.resolve_paths(&loaded.base_dir);
    cfg.train.validate()?;
    let registry = registry_with(cfg.product_file.as_deref())?;
    let net = build_network(&cfg.net, &registry)?;
    let data = load_dataset(&cfg.data, &net)?;

    let outcome = match train(net, &data, &cfg.train) {
        Ok(o) => o,
        Err(abip::Error::Diverged { epoch, history }) => {
            write_output(&out.join("history.csv"), history_csv(&history))?;
            write_output(&out.join("timing.csv"), timing_csv(&history))?;
            return Err(Failure::Numeric(anyhow::anyhow!("training diverged at epoch {epoch}")));
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(&outcome.network, &out.join("checkpoint.abip")).map_err(|e| Failure::data_at(out, e))?;
    write_output(&out.join("history.csv"), history_csv(&outcome.history))?;
    write_output(&out.join("timing.csv"), timing_csv(&outcome.history))?;

    let refs: Vec<&Sample> = data.iter().collect();
    let last = outcome.history.last().expect("at least one epoch");
    let manifest = TrainManifest {
        command: "train",
        config: &cfg,
        seed: cfg.train.seed,
        versions: versions(),
        results: TrainResults {
            samples: data.len(),
            param_count: outcome.network.param_count(),
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_mse: outcome.best_val_mse,
            final_train_mse: last.train_mse,
            final_val_mse: last.val_mse,
            checkpoint_mse: evaluate(&outcome.network, &refs)?,
            stopped_early: outcome.stopped_early,
        },
    };
    let text = serde_json::to_string_pretty(&manifest).unwrap();
    write_output(&out.join("manifest.json"), &text)?;
    println!(
        "trained {} epochs (best {}), final train MSE {:.3e}, val MSE {:.3e}; outputs in {}",
        manifest.results.epochs_run,
        manifest.results.best_epoch,
        manifest.results.final_train_mse,
        manifest.results.final_val_mse,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    checkpoint: PathBuf,
    samples: usize,
    mse: f64,
}

pub fn cmd_eval(config_path: &Path, overrides: &[String], checkpoint: Option<&Path>, out: &Path) -> CmdResult {
    let loaded = config::load::<TrainRunConfig>(config_path, "train", overrides)?;
    let mut cfg = loaded.config;
    cfg.resolve_paths(&loaded.base_dir);
    let registry = registry_with(cfg.product_file.as_deref())?;
    let path = checkpoint.map_or_else(|| out.join("checkpoint.abip"), Path::to_path_buf);
    let net = load_checkpoint(&path, &registry).map_err(|e| match e {
        abip::Error::UnknownProduct(_) | abip::Error::DimensionMismatch { .. } => Failure::Config(e.into()),
        other => Failure::data_at(&path, other),
    })?;
    let data = load_dataset(&cfg.data, &net)?;
    let refs: Vec<&Sample> = data.iter().collect();
    let report = EvalReport {
        checkpoint: std::path::absolute(&path).unwrap_or(path),
        samples: data.len(),
        mse: evaluate(&net, &refs)?,
    };
    let text = serde_json::to_string_pretty(&report).unwrap();
    write_output(&out.join("eval.json"), &text)?;
    println!("{text}");
    Ok(())
}
