use std::path::Path;

use abip::{BilinearProduct, ProductKind, Symmetry};
use serde::Serialize;

use crate::failure::CmdResult;
use crate::train::registry_with;

#[derive(Serialize)]
pub struct ProductInfo {
    pub name: String,
    pub dim: usize,
    pub builtin: bool,
    pub symmetry: Symmetry,
    /// 1-based index of the basis vector acting as a left identity.
    pub identity: Option<usize>,
}

impl ProductInfo {
    fn of(p: &BilinearProduct, builtin: bool) -> Self {
        Self {
            name: p.name().to_string(),
            dim: p.dim(),
            builtin,
            symmetry: p.symmetry(),
            identity: p.left_identity().map(|i| i + 1),
        }
    }
}

/// Builtins at their fixed size (or `dim` for the convolution families), then customs.
pub fn product_table(dim: usize, product_file: Option<&Path>) -> CmdResult<Vec<ProductInfo>> {
    let registry = registry_with(product_file)?;
    let mut rows = Vec::new();
    for name in ProductKind::NAMES {
        let n = ProductKind::fixed_dim(name).unwrap_or(dim);
        rows.push(ProductInfo::of(&BilinearProduct::builtin(name, n)?, true));
    }
    rows.extend(registry.custom_products().map(|p| ProductInfo::of(p, false)));
    Ok(rows)
}

pub fn cmd_products(dim: usize, product_file: Option<&Path>, json: bool) -> CmdResult {
    let rows = product_table(dim, product_file)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).unwrap());
        return Ok(());
    }
    println!("{:<24} {:>3}  {:<16} identity", "name", "N", "symmetry");
    for r in &rows {
        let id = r.identity.map_or_else(|| "none".to_string(), |i| format!("e{i}"));
        let name = if r.builtin { r.name.clone() } else { format!("{} (custom)", r.name) };
        println!("{:<24} {:>3}  {:<16} {id}", name, r.dim, r.symmetry.to_string());
    }
    Ok(())
}
