//! Vector-neuron multilayer networks and the feedforward pass.
//!
//! Every neuron carries an `N`-vector. A connection multiplies the incoming
//! activation by its weight vector through the network's bilinear product:
//! `z_i = Σ_j w_ij • a_j + b_i`, then `a_i = φ(z_i)` elementwise.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bilinear::BilinearProduct;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Identity => x,
        }
    }

    /// `φ̇(x)`, evaluated at the pre-activation.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.apply(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One fully connected layer of vector neurons.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `outputs × inputs × N`; `weights[[i, j, ..]]` is `w_ij`.
    pub weights: Array3<f64>,
    /// `outputs × N`; row `i` is `b_i`.
    pub biases: Array2<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.dim().1
    }

    pub fn outputs(&self) -> usize {
        self.weights.dim().0
    }

    pub fn dim(&self) -> usize {
        self.weights.dim().2
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Dense `(outputs·N) × (inputs·N)` operator whose `(i, j)` block is `[w_ij]_•`.
    pub fn block_matrix(&self, product: &BilinearProduct) -> Array2<f64> {
        let (outs, ins, dim) = self.weights.dim();
        let mut block = Array2::zeros((outs * dim, ins * dim));
        let nonzeros = structure_nonzeros(product);
        for i in 0..outs {
            for j in 0..ins {
                let w = self.weights.slice(s![i, j, ..]);
                let mut view = block.slice_mut(s![i * dim..(i + 1) * dim, j * dim..(j + 1) * dim]);
                for &(m, n, k, c) in &nonzeros {
                    view[[k, n]] += w[m] * c;
                }
            }
        }
        block
    }
}

/// Nonzero entries `(m, n, k, c)` of a product's structure tensor.
pub(crate) fn structure_nonzeros(product: &BilinearProduct) -> Vec<(usize, usize, usize, f64)> {
    let dim = product.dim();
    let st = product.structure();
    let mut out = Vec::new();
    for m in 0..dim {
        for n in 0..dim {
            for (k, &c) in st.basis_product(m, n).iter().enumerate() {
                if c != 0.0 {
                    out.push((m, n, k, c));
                }
            }
        }
    }
    out
}

/// Per-layer pre-activations and activations of one forward pass.
///
/// `a[0]` is the input and `a[l + 1] = φ(z[l])`, so `z` has one entry per
/// layer and `a` one more.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub z: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.a.last().expect("trace always holds the input")
    }
}

/// One training pair; rows are neurons, columns the `N` vector components.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Array2<f64>,
    pub target: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    product: BilinearProduct,
    topology: Vec<usize>,
    pub layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl Network {
    /// Glorot-style uniform init on `[-r, r]`, `r = sqrt(6 / (N (fan_in + fan_out)))`, zero biases.
    pub fn init(
        topology: &[usize],
        product: BilinearProduct,
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        validate_topology(topology)?;
        let dim = product.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = topology
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let r = init_radius(dim, fan_in, fan_out);
                let weights =
                    Array3::from_shape_simple_fn((fan_out, fan_in, dim), || rng.random_range(-r..=r));
                Layer {
                    weights,
                    biases: Array2::zeros((fan_out, dim)),
                }
            })
            .collect();
        Ok(Self {
            product,
            topology: topology.to_vec(),
            layers,
            hidden_activation,
            output_activation,
        })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(
        product: BilinearProduct,
        layers: Vec<Layer>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        let dim = product.dim();
        let mut topology = vec![layers[0].inputs()];
        for layer in &layers {
            let expected = *topology.last().unwrap();
            if layer.inputs() != expected || layer.dim() != dim {
                return Err(Error::shape(
                    "layer weights",
                    &[layer.outputs(), expected, dim],
                    layer.weights.shape(),
                ));
            }
            if layer.biases.dim() != (layer.outputs(), dim) {
                return Err(Error::shape(
                    "layer biases",
                    &[layer.outputs(), dim],
                    layer.biases.shape(),
                ));
            }
            if layer.weights.iter().chain(layer.biases.iter()).any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite network parameter".into()));
            }
            topology.push(layer.outputs());
        }
        validate_topology(&topology)?;
        Ok(Self {
            product,
            topology,
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn product(&self) -> &BilinearProduct {
        &self.product
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }

    pub fn topology(&self) -> &[usize] {
        &self.topology
    }

    pub fn input_width(&self) -> usize {
        self.topology[0]
    }

    pub fn output_width(&self) -> usize {
        *self.topology.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Activation used by layer `l` (0-based).
    pub fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub(crate) fn check_input(&self, input: &ArrayView2<'_, f64>) -> Result<()> {
        if input.dim() != (self.input_width(), self.dim()) {
            return Err(Error::shape(
                "network input",
                &[self.input_width(), self.dim()],
                input.shape(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_target(&self, target: &ArrayView2<'_, f64>) -> Result<()> {
        if target.dim() != (self.output_width(), self.dim()) {
            return Err(Error::shape(
                "network target",
                &[self.output_width(), self.dim()],
                target.shape(),
            ));
        }
        Ok(())
    }

    /// Feedforward pass for one sample, keeping every `z` and `a`.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
        self.check_input(&input)?;
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite network input".into()));
        }
        let dim = self.dim();
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![input.to_owned()];
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().unwrap();
            let mut z = layer.biases.clone();
            let mut rep = Array2::zeros((dim, dim));
            for i in 0..layer.outputs() {
                let mut zi = z.row_mut(i);
                for j in 0..layer.inputs() {
                    let w = layer.weights.slice(s![i, j, ..]);
                    self.product
                        .fill_matrix_rep(w.as_slice().unwrap(), rep.view_mut());
                    zi += &rep.dot(&prev.row(j));
                }
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericOverflow { layer: l + 1 });
            }
            let act = self.activation(l);
            acts.push(z.mapv(|x| act.apply(x)));
            zs.push(z);
        }
        Ok(ForwardTrace { z: zs, a: acts })
    }

    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward(input)?.a.pop().unwrap())
    }

    /// Per-layer block operators for the batched path.
    pub fn compile(&self) -> CompiledNetwork<'_> {
        CompiledNetwork {
            net: self,
            blocks: self
                .layers
                .iter()
                .map(|l| l.block_matrix(&self.product))
                .collect(),
        }
    }
}

fn validate_topology(topology: &[usize]) -> Result<()> {
    if topology.len() < 2 {
        return Err(Error::InvalidArgument(
            "topology needs at least an input and an output width".into(),
        ));
    }
    if topology.contains(&0) {
        return Err(Error::InvalidArgument("layer widths must be at least 1".into()));
    }
    Ok(())
}

pub fn init_radius(dim: usize, fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (dim as f64 * (fan_in + fan_out) as f64)).sqrt()
}

/// A network with every layer materialized as one dense block matrix.
///
/// Samples are laid out as columns of length `width·N` (neuron-major), so a
/// whole batch goes through each layer as a single matrix product.
pub struct CompiledNetwork<'a> {
    pub(crate) net: &'a Network,
    pub(crate) blocks: Vec<Array2<f64>>,
}

/// Column-stacked activations of a batch; `a[0]` is the input.
pub struct BatchTrace {
    pub z: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
}

impl CompiledNetwork<'_> {
    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn forward_columns(&self, input: Array2<f64>) -> Result<BatchTrace> {
        let net = self.net;
        let mut zs = Vec::with_capacity(self.blocks.len());
        let mut acts = vec![input];
        for (l, (block, layer)) in self.blocks.iter().zip(&net.layers).enumerate() {
            let mut z = block.dot(acts.last().unwrap());
            let bias = layer.biases.view().into_shape_with_order(block.nrows()).unwrap();
            for mut col in z.axis_iter_mut(Axis(1)) {
                col += &bias;
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericOverflow { layer: l + 1 });
            }
            let act = net.activation(l);
            acts.push(z.mapv(|x| act.apply(x)));
            zs.push(z);
        }
        Ok(BatchTrace { z: zs, a: acts })
    }

    /// Predictions for a batch of inputs, one `G×N` matrix each.
    pub fn predict_batch(&self, inputs: &[ArrayView2<'_, f64>]) -> Result<Vec<Array2<f64>>> {
        for x in inputs {
            self.net.check_input(x)?;
        }
        let trace = self.forward_columns(stack_columns(inputs))?;
        let out = trace.a.last().unwrap();
        let shape = (self.net.output_width(), self.net.dim());
        Ok(out
            .axis_iter(Axis(1))
            .map(|col| col.to_owned().into_shape_with_order(shape).unwrap())
            .collect())
    }
}

/// Flattens each `width×N` matrix into one column.
pub(crate) fn stack_columns(mats: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    let rows = mats.first().map_or(0, |m| m.len());
    let mut out = Array2::zeros((rows, mats.len()));
    for (b, m) in mats.iter().enumerate() {
        out.column_mut(b)
            .iter_mut()
            .zip(m.iter())
            .for_each(|(o, &v)| *o = v);
    }
    out
}

/// `(1/(G·N)) Σ (pred − target)²`.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::shape("mse loss", target.shape(), pred.shape()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}
