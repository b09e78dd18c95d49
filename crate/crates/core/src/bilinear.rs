//! Bilinear products defined by structure tensors.
//!
//! A product `•: R^N × R^N → R^N` is fully described by the coefficients
//! `c[m][n][k]`, the `k`-th component of `e_m • e_n`. Everything downstream
//! (feedforward, backpropagation, gradient checks) only ever touches a
//! product through [`BilinearProduct::product`], [`BilinearProduct::matrix_rep`]
//! and [`BilinearProduct::transmuted_rep`], so a custom tensor is exactly as
//! capable as a builtin one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `N×N×N` coefficient array, stored with `k` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor {
    dim: usize,
    coeffs: Vec<f64>,
}

impl StructureTensor {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "structure tensor dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            coeffs: vec![0.0; dim * dim * dim],
        })
    }

    /// Builds a tensor from a flat `[m][n][k]` row-major buffer.
    pub fn from_flat(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "structure tensor dimension must be at least 1".into(),
            ));
        }
        if coeffs.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                context: "structure tensor coefficients",
                expected: dim * dim * dim,
                found: coeffs.len(),
            });
        }
        Ok(Self { dim, coeffs })
    }

    /// Builds a tensor from nested `[N][N][N]` vectors.
    pub fn from_nested(coeffs: &[Vec<Vec<f64>>]) -> Result<Self> {
        let dim = coeffs.len();
        let mut flat = Vec::with_capacity(dim * dim * dim);
        for plane in coeffs {
            if plane.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "structure tensor plane",
                    expected: dim,
                    found: plane.len(),
                });
            }
            for row in plane {
                if row.len() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "structure tensor row",
                        expected: dim,
                        found: row.len(),
                    });
                }
                flat.extend_from_slice(row);
            }
        }
        Self::from_flat(dim, flat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, m: usize, n: usize, k: usize) -> usize {
        (m * self.dim + n) * self.dim + k
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, k: usize) -> f64 {
        self.coeffs[self.offset(m, n, k)]
    }

    fn set(&mut self, m: usize, n: usize, k: usize, value: f64) {
        let at = self.offset(m, n, k);
        self.coeffs[at] = value;
    }

    /// Components of `e_m • e_n`.
    #[inline]
    pub fn basis_product(&self, m: usize, n: usize) -> &[f64] {
        let start = self.offset(m, n, 0);
        &self.coeffs[start..start + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|m| {
                (0..self.dim)
                    .map(|n| self.basis_product(m, n).to_vec())
                    .collect()
            })
            .collect()
    }

    fn first_non_finite(&self) -> Option<(usize, usize, usize)> {
        let pos = self.coeffs.iter().position(|c| !c.is_finite())?;
        let n2 = self.dim * self.dim;
        Some((pos / n2, (pos / self.dim) % self.dim, pos % self.dim))
    }
}

/// The builtin product families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProductKind {
    /// Ordinary real multiplication, `N = 1`.
    Scalar,
    Circular(usize),
    SkewCircular(usize),
    ReverseTimeCircular(usize),
    /// Three-dimensional cross product.
    Vector3,
    Quaternion,
    SevenDimVector,
}

impl ProductKind {
    pub const NAMES: [&'static str; 7] = [
        "scalar",
        "circular",
        "skew_circular",
        "reverse_time_circular",
        "vector3",
        "quaternion",
        "seven_dim_vector",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProductKind::Scalar => "scalar",
            ProductKind::Circular(_) => "circular",
            ProductKind::SkewCircular(_) => "skew_circular",
            ProductKind::ReverseTimeCircular(_) => "reverse_time_circular",
            ProductKind::Vector3 => "vector3",
            ProductKind::Quaternion => "quaternion",
            ProductKind::SevenDimVector => "seven_dim_vector",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ProductKind::Scalar => 1,
            ProductKind::Circular(n)
            | ProductKind::SkewCircular(n)
            | ProductKind::ReverseTimeCircular(n) => n,
            ProductKind::Vector3 => 3,
            ProductKind::Quaternion => 4,
            ProductKind::SevenDimVector => 7,
        }
    }

    /// Dimension the kind forces, if any.
    pub fn fixed_dim(name: &str) -> Option<usize> {
        match name {
            "scalar" => Some(1),
            "vector3" => Some(3),
            "quaternion" => Some(4),
            "seven_dim_vector" => Some(7),
            _ => None,
        }
    }

    pub fn is_builtin_name(name: &str) -> bool {
        Self::NAMES.contains(&name)
    }

    /// Resolves a builtin by name. Fixed-dimension kinds reject any other `dim`.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        if let Some(fixed) = Self::fixed_dim(name) {
            if dim != fixed {
                return Err(Error::DimensionMismatch {
                    context: "builtin product dimension",
                    expected: fixed,
                    found: dim,
                });
            }
        } else if dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "product `{name}` needs a dimension of at least 1"
            )));
        }
        Ok(match name {
            "scalar" => ProductKind::Scalar,
            "circular" => ProductKind::Circular(dim),
            "skew_circular" => ProductKind::SkewCircular(dim),
            "reverse_time_circular" => ProductKind::ReverseTimeCircular(dim),
            "vector3" => ProductKind::Vector3,
            "quaternion" => ProductKind::Quaternion,
            "seven_dim_vector" => ProductKind::SevenDimVector,
            other => return Err(Error::UnknownProduct(other.to_string())),
        })
    }

    fn structure(&self) -> Result<StructureTensor> {
        let dim = self.dim();
        let mut t = StructureTensor::zeros(dim)?;
        match *self {
            ProductKind::Scalar => t.set(0, 0, 0, 1.0),
            ProductKind::Circular(n) => {
                for a in 0..n {
                    for b in 0..n {
                        t.set(a, b, (a + b) % n, 1.0);
                    }
                }
            }
            ProductKind::SkewCircular(n) => {
                // wrapped terms pick up a minus sign
                for a in 0..n {
                    for b in 0..n {
                        let s = a + b;
                        if s < n {
                            t.set(a, b, s, 1.0);
                        } else {
                            t.set(a, b, s - n, -1.0);
                        }
                    }
                }
            }
            ProductKind::ReverseTimeCircular(n) => {
                // circulant flipped upside down: output index runs backwards
                for a in 0..n {
                    for b in 0..n {
                        t.set(a, b, (2 * n - 1 - a - b) % n, 1.0);
                    }
                }
            }
            ProductKind::Vector3 => {
                for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                    t.set(a, b, k, 1.0);
                    t.set(b, a, k, -1.0);
                }
            }
            ProductKind::Quaternion => {
                // basis order 1, i, j, k
                const TABLE: [[(f64, usize); 4]; 4] = [
                    [(1.0, 0), (1.0, 1), (1.0, 2), (1.0, 3)],
                    [(1.0, 1), (-1.0, 0), (1.0, 3), (-1.0, 2)],
                    [(1.0, 2), (-1.0, 3), (-1.0, 0), (1.0, 1)],
                    [(1.0, 3), (1.0, 2), (-1.0, 1), (-1.0, 0)],
                ];
                for (a, row) in TABLE.iter().enumerate() {
                    for (b, &(sign, k)) in row.iter().enumerate() {
                        t.set(a, b, k, sign);
                    }
                }
            }
            ProductKind::SevenDimVector => {
                // Entry (row k, column n) of the matrix representation [w]
                // is sign(v) * w_|v| (1-based), zero on the diagonal.
                const REP: [[i8; 7]; 7] = [
                    [0, -4, -7, 2, -6, 5, 3],
                    [4, 0, -5, -1, 3, -7, 6],
                    [7, 5, 0, -6, -2, 4, -1],
                    [-2, 1, 6, 0, -7, -3, 5],
                    [6, -3, 2, 7, 0, -1, -4],
                    [-5, 7, -4, 3, 1, 0, -2],
                    [-3, -6, 1, -5, 4, 2, 0],
                ];
                for (k, row) in REP.iter().enumerate() {
                    for (n, &v) in row.iter().enumerate() {
                        if v != 0 {
                            let m = v.unsigned_abs() as usize - 1;
                            t.set(m, n, k, f64::from(v.signum()));
                        }
                    }
                }
            }
        }
        Ok(t)
    }
}

impl fmt::Display for ProductKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.dim())
    }
}

/// Returns the builtin product of the given kind.
pub fn builtin_product(kind: ProductKind) -> Result<BilinearProduct> {
    Ok(BilinearProduct {
        name: kind.name().to_string(),
        structure: kind.structure()?,
    })
}

/// How a product behaves under swapping its arguments, judged on basis pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Commutative,
    Anticommutative,
    Noncommutative,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Symmetry::Commutative => "commutative",
            Symmetry::Anticommutative => "anticommutative",
            Symmetry::Noncommutative => "noncommutative",
        };
        f.write_str(s)
    }
}

/// A named bilinear product.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearProduct {
    name: String,
    structure: StructureTensor,
}

impl BilinearProduct {
    /// Resolves a builtin product by name and dimension.
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        builtin_product(ProductKind::from_name(name, dim)?)
    }

    /// Wraps an arbitrary structure tensor. Non-finite coefficients are rejected.
    pub fn custom(name: impl Into<String>, structure: StructureTensor) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidArgument("product name is empty".into()));
        }
        if let Some((m, n, k)) = structure.first_non_finite() {
            return Err(Error::NonFiniteCoefficient { name, m, n, k });
        }
        Ok(Self { name, structure })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.structure.dim
    }

    pub fn structure(&self) -> &StructureTensor {
        &self.structure
    }

    fn check_len(&self, context: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `p • q` as the double contraction `Σ_m Σ_n p_m q_n c[m][n][:]`.
    pub fn product(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check_len("product left operand", p)?;
        self.check_len("product right operand", q)?;
        let mut out = vec![0.0; self.dim()];
        self.product_into(p, q, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Self::product`]; accumulates into `out` after zeroing it.
    pub fn product_into(&self, p: &[f64], q: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        debug_assert!(p.len() == dim && q.len() == dim && out.len() == dim);
        out.fill(0.0);
        for (m, &pm) in p.iter().enumerate() {
            for (n, &qn) in q.iter().enumerate() {
                let w = pm * qn;
                for (o, &c) in out.iter_mut().zip(self.structure.basis_product(m, n)) {
                    *o += w * c;
                }
            }
        }
    }

    /// `[p]_• = [p•e_1, …, p•e_N]`, so that `[p]_• q = p • q`.
    pub fn matrix_rep(&self, p: &[f64]) -> Result<Array2<f64>> {
        self.check_len("matrix representation", p)?;
        let mut out = Array2::zeros((self.dim(), self.dim()));
        self.fill_matrix_rep(p, out.view_mut());
        Ok(out)
    }

    /// `[q]_•† = [e_1•q, …, e_N•q]`, so that `[q]_•† p = p • q`.
    pub fn transmuted_rep(&self, q: &[f64]) -> Result<Array2<f64>> {
        self.check_len("transmuted representation", q)?;
        let dim = self.dim();
        let mut out = Array2::zeros((dim, dim));
        for m in 0..dim {
            for (n, &qn) in q.iter().enumerate() {
                for (k, &c) in self.structure.basis_product(m, n).iter().enumerate() {
                    out[[k, m]] += qn * c;
                }
            }
        }
        Ok(out)
    }

    /// Writes `[p]_•` into an `N×N` view (overwrites).
    pub fn fill_matrix_rep(&self, p: &[f64], mut out: ArrayViewMut2<'_, f64>) {
        let dim = self.dim();
        debug_assert_eq!(out.dim(), (dim, dim));
        out.fill(0.0);
        for (m, &pm) in p.iter().enumerate() {
            for n in 0..dim {
                for (k, &c) in self.structure.basis_product(m, n).iter().enumerate() {
                    out[[k, n]] += pm * c;
                }
            }
        }
    }

    /// Compares `e_m•e_n` with `e_n•e_m` over every basis pair.
    pub fn symmetry(&self) -> Symmetry {
        let dim = self.dim();
        let pairs = || (0..dim).flat_map(|m| (0..dim).map(move |n| (m, n)));
        let s = &self.structure;
        if pairs().all(|(m, n)| s.basis_product(m, n) == s.basis_product(n, m)) {
            Symmetry::Commutative
        } else if pairs().all(|(m, n)| {
            s.basis_product(m, n)
                .iter()
                .zip(s.basis_product(n, m))
                .all(|(a, b)| *a == -*b)
        }) {
            Symmetry::Anticommutative
        } else {
            Symmetry::Noncommutative
        }
    }

    /// Index `n` of the first basis vector with `[e_n]_• = I`, if any.
    pub fn left_identity(&self) -> Option<usize> {
        let dim = self.dim();
        (0..dim).find(|&cand| {
            (0..dim).all(|n| {
                self.structure
                    .basis_product(cand, n)
                    .iter()
                    .enumerate()
                    .all(|(k, &c)| c == if k == n { 1.0 } else { 0.0 })
            })
        })
    }
}

/// On-disk form of a custom product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CustomProductFile {
    pub name: String,
    pub dim: usize,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl CustomProductFile {
    pub fn into_product(self) -> Result<BilinearProduct> {
        let structure = StructureTensor::from_nested(&self.coeffs)?;
        if structure.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "custom product `dim` field",
                expected: self.dim,
                found: structure.dim(),
            });
        }
        BilinearProduct::custom(self.name, structure)
    }

    pub fn from_product(product: &BilinearProduct) -> Self {
        Self {
            name: product.name().to_string(),
            dim: product.dim(),
            coeffs: product.structure().to_nested(),
        }
    }
}

/// Named custom products alongside the builtins.
///
/// Builtin names are reserved; a custom product can never shadow one.
#[derive(Clone, Debug, Default)]
pub struct ProductRegistry {
    custom: BTreeMap<String, BilinearProduct>,
}

impl ProductRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, product: BilinearProduct) -> Result<&BilinearProduct> {
        let name = product.name().to_string();
        if ProductKind::is_builtin_name(&name) || self.custom.contains_key(&name) {
            return Err(Error::DuplicateProduct(name));
        }
        Ok(self.custom.entry(name).or_insert(product))
    }

    /// Validates `coeffs` and registers the resulting product.
    pub fn custom_product(
        &mut self,
        name: &str,
        coeffs: &[Vec<Vec<f64>>],
    ) -> Result<&BilinearProduct> {
        let product = BilinearProduct::custom(name, StructureTensor::from_nested(coeffs)?)?;
        self.register(product)
    }

    pub fn load_json(&mut self, path: &Path) -> Result<&BilinearProduct> {
        let text = std::fs::read_to_string(path)?;
        let file: CustomProductFile =
            serde_json::from_str(&text).map_err(|e| Error::Format {
                what: "custom product file",
                reason: e.to_string(),
            })?;
        self.register(file.into_product()?)
    }

    /// Builtin kinds first, then registered customs. For customs `dim` must match.
    pub fn resolve(&self, name: &str, dim: usize) -> Result<BilinearProduct> {
        if ProductKind::is_builtin_name(name) {
            return BilinearProduct::builtin(name, dim);
        }
        let product = self
            .custom
            .get(name)
            .ok_or_else(|| Error::UnknownProduct(name.to_string()))?;
        if product.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "custom product dimension",
                expected: product.dim(),
                found: dim,
            });
        }
        Ok(product.clone())
    }

    pub fn custom_products(&self) -> impl Iterator<Item = &BilinearProduct> {
        self.custom.values()
    }
}
