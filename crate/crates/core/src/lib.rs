//! Vector-valued neural networks whose connections are arbitrary bilinear
//! products.
//!
//! Each neuron holds an `N`-dimensional vector. A bilinear product, given by
//! its `N×N×N` structure tensor, replaces scalar multiplication on every
//! connection; with `N = 1` and the scalar product the network is an ordinary
//! multilayer perceptron.
//!
//! - [`bilinear`]: structure tensors, builtin products, matrix and transmuted
//!   representations.
//! - [`network`]: layers, activations, the feedforward pass.
//! - [`train`]: backpropagation, Adam, the minibatch loop, gradient checks.
//! - [`tasks`]: synthetic multispectral denoising with PSNR evaluation.
//! - [`io`]: binary checkpoint and tensor formats.

pub mod bilinear;
pub mod error;
pub mod io;
pub mod network;
pub mod tasks;
pub mod train;

pub use bilinear::{builtin_product, BilinearProduct, ProductKind, ProductRegistry, StructureTensor, Symmetry};
pub use error::{Error, Result};
pub use network::{mse_loss, Activation, ForwardTrace, Layer, Network, Sample};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
