//! Backpropagation through bilinear-product layers.
//!
//! The per-sample functions follow the local-gradient recursion directly:
//! the output delta, `d_i = Σ_k d_k [w_ki]_• ∘ φ̇(z_i)` for hidden layers,
//! `∂C/∂w_ij = d_i [a_j]_•†` for weights, and `∂C/∂b_i = d_i` for biases.
//! [`batch_gradient`] computes the same quantities for a whole minibatch
//! with block matrices; tests hold the two paths to 1e-12 of each other.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::bilinear::BilinearProduct;
use crate::error::{Error, Result};
use crate::network::{stack_columns, structure_nonzeros, Activation, ForwardTrace, Layer, Network, Sample};

/// Gradients of the per-sample (or minibatch-mean) loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub d_weights: Vec<Array3<f64>>,
    pub d_biases: Vec<Array2<f64>>,
    /// Local gradient vectors `d_i` per layer, one row per neuron.
    pub deltas: Vec<Array2<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            d_weights: net.layers.iter().map(|l| Array3::zeros(l.weights.raw_dim())).collect(),
            d_biases: net.layers.iter().map(|l| Array2::zeros(l.biases.raw_dim())).collect(),
            deltas: net.layers.iter().map(|l| Array2::zeros(l.biases.raw_dim())).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.d_weights {
            *w *= c;
        }
        for b in &mut self.d_biases {
            *b *= c;
        }
        for d in &mut self.deltas {
            *d *= c;
        }
    }

    /// Largest absolute entrywise difference over weights and biases.
    pub fn max_abs_diff(&self, other: &GradientSet) -> f64 {
        let w = self
            .d_weights
            .iter()
            .zip(&other.d_weights)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        let b = self
            .d_biases
            .iter()
            .zip(&other.d_biases)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        w.chain(b).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn debug_check_bias_delta(&self) {
        debug_assert!(
            self.d_biases
                .iter()
                .zip(&self.deltas)
                .all(|(b, d)| b.iter().zip(d.iter()).all(|(x, y)| x.to_bits() == y.to_bits())),
            "bias gradient must equal the local gradient bit for bit"
        );
    }
}

/// `d_g[n] = ∂C/∂y_gn · φ̇(z_gn)` with `∂C/∂y = 2(y − t)/(G·N)`.
pub fn output_delta(trace: &ForwardTrace, target: ArrayView2<'_, f64>, net: &Network) -> Result<Array2<f64>> {
    net.check_target(&target)?;
    let z = trace.z.last().ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let y = trace.output();
    if y.dim() != target.dim() || z.dim() != target.dim() {
        return Err(Error::shape("output delta", target.shape(), y.shape()));
    }
    let act = net.output_activation();
    let scale = 2.0 / target.len() as f64;
    let mut delta = Array2::zeros(target.raw_dim());
    Zip::from(&mut delta)
        .and(y)
        .and(&target)
        .and(z)
        .for_each(|d, &y, &t, &z| *d = scale * (y - t) * act.derivative(z));
    Ok(delta)
}

/// `d_i = Σ_k d_k [w_ki]_• ∘ φ̇(z_i)` for every neuron `i` of the current layer.
pub fn backprop_delta(
    delta_next: ArrayView2<'_, f64>,
    layer_next: &Layer,
    z_cur: ArrayView2<'_, f64>,
    act: Activation,
    product: &BilinearProduct,
) -> Result<Array2<f64>> {
    let (k_count, i_count, dim) = layer_next.weights.dim();
    if dim != product.dim() {
        return Err(Error::DimensionMismatch {
            context: "backprop product",
            expected: dim,
            found: product.dim(),
        });
    }
    if delta_next.dim() != (k_count, dim) {
        return Err(Error::shape("next-layer delta", &[k_count, dim], delta_next.shape()));
    }
    if z_cur.dim() != (i_count, dim) {
        return Err(Error::shape("current pre-activation", &[i_count, dim], z_cur.shape()));
    }
    let mut out = Array2::zeros((i_count, dim));
    let mut rep = Array2::zeros((dim, dim));
    for i in 0..i_count {
        let mut acc = Array1::<f64>::zeros(dim);
        for k in 0..k_count {
            let w = layer_next.weights.slice(s![k, i, ..]);
            product.fill_matrix_rep(w.as_slice().unwrap(), rep.view_mut());
            acc += &delta_next.row(k).dot(&rep);
        }
        Zip::from(out.row_mut(i))
            .and(&acc)
            .and(z_cur.row(i))
            .for_each(|o, &a, &z| *o = a * act.derivative(z));
    }
    Ok(out)
}

/// `∂C/∂w_ij = d_i [a_j]_•†`.
pub fn weight_grad(delta: ArrayView1<'_, f64>, a_prev: ArrayView1<'_, f64>, product: &BilinearProduct) -> Result<Array1<f64>> {
    if delta.len() != product.dim() {
        return Err(Error::DimensionMismatch {
            context: "weight gradient delta",
            expected: product.dim(),
            found: delta.len(),
        });
    }
    let a = a_prev.to_vec();
    Ok(delta.dot(&product.transmuted_rep(&a)?))
}

/// Full backward pass for one sample.
pub fn backward(net: &Network, trace: &ForwardTrace, target: ArrayView2<'_, f64>) -> Result<GradientSet> {
    let layers = net.layers.len();
    if trace.z.len() != layers || trace.a.len() != layers + 1 {
        return Err(Error::InvalidArgument("trace does not belong to this network".into()));
    }
    let product = net.product();
    let mut deltas = vec![Array2::zeros((0, 0)); layers];
    deltas[layers - 1] = output_delta(trace, target, net)?;
    for l in (0..layers - 1).rev() {
        deltas[l] = backprop_delta(
            deltas[l + 1].view(),
            &net.layers[l + 1],
            trace.z[l].view(),
            net.activation(l),
            product,
        )?;
    }
    let mut d_weights = Vec::with_capacity(layers);
    for (l, layer) in net.layers.iter().enumerate() {
        let mut dw = Array3::zeros(layer.weights.raw_dim());
        let prev = &trace.a[l];
        for i in 0..layer.outputs() {
            for j in 0..layer.inputs() {
                let g = weight_grad(deltas[l].row(i), prev.row(j), product)?;
                dw.slice_mut(s![i, j, ..]).assign(&g);
            }
        }
        d_weights.push(dw);
    }
    let grads = GradientSet {
        d_weights,
        d_biases: deltas.clone(),
        deltas,
    };
    grads.debug_check_bias_delta();
    Ok(grads)
}

/// Per-sample loss plus its gradient through the literal recursion.
pub fn sample_gradient(net: &Network, sample: &Sample) -> Result<(f64, GradientSet)> {
    let trace = net.forward(sample.input.view())?;
    let loss = crate::network::mse_loss(trace.output().view(), sample.target.view())?;
    Ok((loss, backward(net, &trace, sample.target.view())?))
}

/// Samples per independent unit of work in [`batch_gradient`]. Partial sums
/// are reduced in chunk order, so results do not depend on the thread count.
pub const GRADIENT_CHUNK: usize = 32;

struct ChunkSums {
    loss: f64,
    /// `(I·N) × (J·N)` outer-product sums `Σ_b d_b a_bᵀ` per layer.
    outer: Vec<Array2<f64>>,
    delta: Vec<Array1<f64>>,
}

/// Mean loss and mean gradient over a minibatch.
pub fn batch_gradient(net: &Network, samples: &[&Sample]) -> Result<(f64, GradientSet)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in samples {
        net.check_input(&s.input.view())?;
        net.check_target(&s.target.view())?;
    }
    let compiled = net.compile();
    let out_len = (net.output_width() * net.dim()) as f64;
    let out_act = net.output_activation();

    let chunks: Vec<ChunkSums> = samples
        .par_chunks(GRADIENT_CHUNK)
        .map(|chunk| -> Result<ChunkSums> {
            let inputs: Vec<_> = chunk.iter().map(|s| s.input.view()).collect();
            let targets: Vec<_> = chunk.iter().map(|s| s.target.view()).collect();
            let trace = compiled.forward_columns(stack_columns(&inputs))?;
            let targets = stack_columns(&targets);
            let y = trace.a.last().unwrap();
            let loss = y
                .iter()
                .zip(targets.iter())
                .map(|(y, t)| (y - t) * (y - t))
                .sum::<f64>()
                / out_len;

            let layers = net.layers.len();
            let mut d = Array2::zeros(y.raw_dim());
            Zip::from(&mut d)
                .and(y)
                .and(&targets)
                .and(&trace.z[layers - 1])
                .for_each(|d, &y, &t, &z| *d = 2.0 * (y - t) / out_len * out_act.derivative(z));
            let mut outer = vec![Array2::zeros((0, 0)); layers];
            let mut delta = vec![Array1::zeros(0); layers];
            for l in (0..layers).rev() {
                outer[l] = d.dot(&trace.a[l].t());
                delta[l] = d.sum_axis(Axis(1));
                if l > 0 {
                    let act = net.activation(l - 1);
                    let mut prev = compiled.blocks[l].t().dot(&d);
                    Zip::from(&mut prev)
                        .and(&trace.z[l - 1])
                        .for_each(|p, &z| *p *= act.derivative(z));
                    d = prev;
                }
            }
            Ok(ChunkSums { loss, outer, delta })
        })
        .collect::<Result<_>>()?;

    let mut iter = chunks.into_iter();
    let mut total = iter.next().unwrap();
    for c in iter {
        total.loss += c.loss;
        for (a, b) in total.outer.iter_mut().zip(&c.outer) {
            *a += b;
        }
        for (a, b) in total.delta.iter_mut().zip(&c.delta) {
            *a += b;
        }
    }
    let inv = 1.0 / samples.len() as f64;
    let nonzeros = structure_nonzeros(net.product());
    let dim = net.dim();
    let mut grads = GradientSet::zeros_like(net);
    for (l, layer) in net.layers.iter().enumerate() {
        let outer = &total.outer[l];
        let dw = &mut grads.d_weights[l];
        for i in 0..layer.outputs() {
            for j in 0..layer.inputs() {
                let block = outer.slice(s![i * dim..(i + 1) * dim, j * dim..(j + 1) * dim]);
                let mut g = dw.slice_mut(s![i, j, ..]);
                for &(m, n, k, c) in &nonzeros {
                    g[m] += c * block[[k, n]];
                }
                g *= inv;
            }
        }
        let mean_delta = (&total.delta[l] * inv)
            .into_shape_with_order((layer.outputs(), dim))
            .unwrap();
        grads.d_biases[l] = mean_delta.clone();
        grads.deltas[l] = mean_delta;
    }
    grads.debug_check_bias_delta();
    Ok((total.loss * inv, grads))
}

/// Mean per-sample MSE over a dataset, without gradients.
pub fn evaluate(net: &Network, samples: &[&Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let compiled = net.compile();
    let sums: Vec<f64> = samples
        .par_chunks(GRADIENT_CHUNK)
        .map(|chunk| -> Result<f64> {
            let inputs: Vec<_> = chunk.iter().map(|s| s.input.view()).collect();
            let preds = compiled.predict_batch(&inputs)?;
            preds
                .iter()
                .zip(chunk)
                .map(|(p, s)| crate::network::mse_loss(p.view(), s.target.view()))
                .sum()
        })
        .collect::<Result<_>>()?;
    Ok(sums.iter().sum::<f64>() / samples.len() as f64)
}
