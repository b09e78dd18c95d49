//! `abip`: train, evaluate and check bilinear-product networks.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 divergence or a
//! failed gradient check.

mod config;
mod denoise;
mod failure;
mod gradcheck;
mod products;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abip::tasks::Method;
use clap::{Parser, Subcommand, ValueEnum};

use failure::{CmdResult, Failure};

#[derive(Parser)]
#[command(name = "abip", version, about = "Vector-neuron networks over arbitrary bilinear products")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory receiving every output file.
    #[arg(long, global = true, env = "ABIP_OUTPUT_DIR", default_value = "abip-out")]
    output_dir: PathBuf,

    /// Worker threads for minibatch gradients. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Baseline {
    DnnConcat,
    DnnParallel,
}

impl From<Baseline> for Method {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::DnnConcat => Method::DnnConcat,
            Baseline::DnnParallel => Method::DnnParallel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write checkpoint, history and manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dotted override, e.g. `train.seed=7`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Report the MSE of a checkpoint on a training config's dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Defaults to `checkpoint.abip` in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare backpropagated gradients with central differences.
    Gradcheck {
        #[arg(long)]
        product: String,
        /// Vector dimension; implied for fixed-size products.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3,5,5,2")]
        topology: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = abip::train::DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        product_file: Option<PathBuf>,
        /// Perturbs one analytic gradient entry; the check must then fail.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Run the multispectral denoising experiment.
    Denoise {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Baselines to train alongside the vector network, replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<Baseline>>,
        /// Write clean, noisy and denoised bands as PGM images.
        #[arg(long)]
        dump_images: bool,
    },
    /// List the available products with symmetry and identity element.
    Products {
        /// Size used for the convolution families.
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long)]
        product_file: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn ensure_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(anyhow::anyhow!("cannot create output directory {}: {e}", dir.display())))
}

fn run(cli: Cli) -> CmdResult {
    let out = cli.output_dir.as_path();
    match cli.command {
        Command::Train { config, overrides } => {
            ensure_dir(out)?;
            train::cmd_train(&config, &overrides, out)
        }
        Command::Eval { config, overrides, checkpoint } => {
            ensure_dir(out)?;
            train::cmd_eval(&config, &overrides, checkpoint.as_deref(), out)
        }
        Command::Gradcheck { product, dim, topology, seed, eps, product_file, corrupt_gradient } => {
            gradcheck::cmd_gradcheck(&gradcheck::GradcheckArgs {
                product: &product,
                dim,
                topology: &topology,
                seed,
                eps,
                product_file: product_file.as_deref(),
                corrupt_gradient,
            })
        }
        Command::Denoise { config, overrides, baselines, dump_images } => {
            ensure_dir(out)?;
            let methods: Option<Vec<Method>> = baselines.map(|b| b.into_iter().map(Method::from).collect());
            denoise::cmd_denoise(&config, &overrides, methods.as_deref(), dump_images, out)
        }
        Command::Products { dim, product_file, json } => products::cmd_products(dim, product_file.as_deref(), json),
    }
}

fn main() -> ExitCode {
    // Usage errors count as config errors.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.threads == 0 {
        eprintln!("config error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("abip: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
