//! Binary formats: network checkpoints (`ABIP`) and dense tensors (`ABTN`).
//!
//! All integers are little-endian `u32`, all payloads little-endian `f64`
//! in row-major order.
//!
//! Checkpoint layout:
//!
//! ```text
//! "ABIP" | version u32 | name_len u32 | name bytes | N u32 | layer_count u32
//!        | widths u32 × (layer_count + 1) | hidden_act u8 | output_act u8
//!        | per layer: weights (out × in × N) f64, biases (out × N) f64
//! ```
//!
//! Tensor layout: `"ABTN" | rank u32 | dims u32 × rank | payload f64`.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3, ArrayD, IxDyn};

use crate::bilinear::ProductRegistry;
use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ABIP";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const TENSOR_MAGIC: &[u8; 4] = b"ABTN";

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s<'a>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            what: self.what,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.fail(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| self.fail("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + net.param_count() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION as usize);
    let name = net.product().name().as_bytes();
    put_u32(&mut buf, name.len());
    buf.extend_from_slice(name);
    put_u32(&mut buf, net.dim());
    put_u32(&mut buf, net.layers.len());
    for &w in net.topology() {
        put_u32(&mut buf, w);
    }
    buf.push(net.hidden_activation().code());
    buf.push(net.output_activation().code());
    for layer in &net.layers {
        put_f64s(&mut buf, layer.weights.iter());
        put_f64s(&mut buf, layer.biases.iter());
    }
    buf
}

/// Decodes a checkpoint; the product is resolved by name through `registry`.
pub fn decode_checkpoint(bytes: &[u8], registry: &ProductRegistry) -> Result<Network> {
    let mut r = Reader::new(bytes, "checkpoint");
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(r.fail("bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let name_len = r.u32()?;
    let name = std::str::from_utf8(r.take(name_len)?)
        .map_err(|_| r.fail("product name is not UTF-8"))?
        .to_string();
    let dim = r.u32()?;
    let layer_count = r.u32()?;
    let topology = (0..=layer_count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut activation = || -> Result<Activation> {
        let code = r.u8()?;
        Activation::from_code(code).ok_or_else(|| Error::Format {
            what: "checkpoint",
            reason: format!("unknown activation code {code}"),
        })
    };
    let hidden = activation()?;
    let output = activation()?;
    let product = registry.resolve(&name, dim)?;
    let mut layers = Vec::with_capacity(layer_count);
    for w in topology.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = Array3::from_shape_vec((fan_out, fan_in, dim), r.f64s(fan_out * fan_in * dim)?)
            .map_err(|e| r.fail(e.to_string()))?;
        let biases = Array2::from_shape_vec((fan_out, dim), r.f64s(fan_out * dim)?)
            .map_err(|e| r.fail(e.to_string()))?;
        layers.push(Layer { weights, biases });
    }
    r.finish()?;
    Network::from_parts(product, layers, hidden, output)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, registry: &ProductRegistry) -> Result<Network> {
    decode_checkpoint(&fs::read(path)?, registry)
}

pub fn encode_tensor(tensor: &ArrayD<f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 4 * tensor.ndim() + 8 * tensor.len());
    buf.extend_from_slice(TENSOR_MAGIC);
    put_u32(&mut buf, tensor.ndim());
    for &d in tensor.shape() {
        put_u32(&mut buf, d);
    }
    put_f64s(&mut buf, tensor.iter());
    buf
}

pub fn decode_tensor(bytes: &[u8]) -> Result<ArrayD<f64>> {
    let mut r = Reader::new(bytes, "tensor");
    if r.take(4)? != TENSOR_MAGIC {
        return Err(r.fail("bad magic"));
    }
    let rank = r.u32()?;
    let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| r.fail("size overflow"))?;
    let data = r.f64s(count)?;
    r.finish()?;
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| r.fail(e.to_string()))
}

pub fn save_tensor(tensor: &ArrayD<f64>, path: &Path) -> Result<()> {
    fs::write(path, encode_tensor(tensor))?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<ArrayD<f64>> {
    decode_tensor(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::{BilinearProduct, StructureTensor};
    use ndarray::Dimension;
    use proptest::prelude::*;

    fn net(name: &str, dim: usize) -> Network {
        let p = BilinearProduct::builtin(name, dim).unwrap();
        Network::init(&[3, 4, 2], p, Activation::Sigmoid, Activation::Identity, 5).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let reg = ProductRegistry::new();
        for (name, dim) in [("circular", 5), ("quaternion", 4), ("scalar", 1)] {
            let n = net(name, dim);
            let bytes = encode_checkpoint(&n);
            let back = decode_checkpoint(&bytes, &reg).unwrap();
            assert_eq!(back, n);
            assert_eq!(encode_checkpoint(&back), bytes);
        }
    }

    #[test]
    fn checkpoint_header_layout() {
        let n = net("circular", 5);
        let b = encode_checkpoint(&n);
        assert_eq!(&b[..4], b"ABIP");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(&b[12..20], b"circular");
        assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(b[24..28].try_into().unwrap()), 2);
        let first_weight = f64::from_le_bytes(b[42..50].try_into().unwrap());
        assert_eq!(first_weight, n.layers[0].weights[[0, 0, 0]]);
        assert_eq!(b.len(), 42 + 8 * n.param_count());
    }

    #[test]
    fn checkpoint_with_custom_product_needs_registry() {
        let p = BilinearProduct::custom("twisted", StructureTensor::from_nested(&[vec![vec![-2.0]]]).unwrap()).unwrap();
        let n = Network::init(&[2, 2], p.clone(), Activation::Sigmoid, Activation::Sigmoid, 0).unwrap();
        let bytes = encode_checkpoint(&n);
        assert!(matches!(decode_checkpoint(&bytes, &ProductRegistry::new()), Err(Error::UnknownProduct(_))));
        let mut reg = ProductRegistry::new();
        reg.register(p).unwrap();
        assert_eq!(decode_checkpoint(&bytes, &reg).unwrap(), n);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let reg = ProductRegistry::new();
        let bytes = encode_checkpoint(&net("circular", 3));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], &reg).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra, &reg).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_checkpoint(&magic, &reg).is_err());
        let mut version = bytes;
        version[4] = 9;
        assert!(decode_checkpoint(&version, &reg).is_err());
    }

    #[test]
    fn tensor_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.abtn");
        let t = ArrayD::from_shape_fn(IxDyn(&[2, 3, 4]), |i| (i[0] * 12 + i[1] * 4 + i[2]) as f64 * 0.5 - 3.0);
        save_tensor(&t, &path).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
        let raw = fs::read(&path).unwrap();
        assert_eq!(&raw[..4], b"ABTN");
        assert_eq!(raw.len(), 4 + 4 + 12 + 8 * 24);
        assert!(decode_tensor(&raw[..raw.len() - 3]).is_err());
    }

    proptest! {
        #[test]
        fn tensor_round_trip(dims in proptest::collection::vec(0usize..4, 0..4), seed in any::<u32>()) {
            let t = ArrayD::from_shape_fn(IxDyn(&dims), |i| {
                i.slice().iter().copied().fold(seed as f64, |a, x| a * 1.5 - x as f64)
            });
            let bytes = encode_tensor(&t);
            prop_assert_eq!(decode_tensor(&bytes).unwrap(), t);
        }
    }
}
