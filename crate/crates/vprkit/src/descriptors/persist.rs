//! Saving and loading codebooks and PCA bases: the numbers travel in the
//! VPRD matrix format, a small `key = value` sidecar (`<path>.meta`) carries
//! what the matrix alone cannot.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::kmeans::Codebook;
use super::project::PcaBasis;
use crate::data::DescriptorMatrix;
use crate::error::{Error, Result};
use crate::io::{read_descriptors, write_descriptors};

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    path.with_file_name(name)
}

fn write_sidecar(path: &Path, section: &str, keys: &[(&str, String)]) -> Result<()> {
    let mut text = format!("[{section}]\n");
    for (key, value) in keys {
        text.push_str(&format!("{key} = {value}\n"));
    }
    let sidecar = sidecar_path(path);
    std::fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))
}

fn read_sidecar(path: &Path, expected_section: &str) -> Result<BTreeMap<String, String>> {
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut keys = BTreeMap::new();
    let mut in_section = false;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            in_section = name.trim() == expected_section;
        } else if let Some((key, value)) = line.split_once('=') {
            if in_section {
                keys.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
    }
    if keys.is_empty() {
        return Err(Error::Param(format!(
            "sidecar {} has no [{expected_section}] section",
            sidecar.display()
        )));
    }
    Ok(keys)
}

fn sidecar_value<T: std::str::FromStr>(
    keys: &BTreeMap<String, String>,
    key: &str,
) -> Result<T> {
    keys.get(key)
        .ok_or_else(|| Error::Param(format!("sidecar misses '{key}'")))?
        .parse()
        .map_err(|_| Error::Param(format!("sidecar value for '{key}' does not parse")))
}

/// Writes the centroids as a VPRD matrix plus a `.meta` sidecar.
pub fn save_codebook(codebook: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_descriptors(&codebook.as_matrix(), path)?;
    write_sidecar(
        path,
        "codebook",
        &[
            ("k", codebook.k().to_string()),
            ("d", codebook.d().to_string()),
        ],
    )
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let matrix = read_descriptors(path)?;
    let keys = read_sidecar(path, "codebook")?;
    let k: usize = sidecar_value(&keys, "k")?;
    let d: usize = sidecar_value(&keys, "d")?;
    if matrix.n() != k || matrix.d() != d {
        return Err(Error::Shape(format!(
            "sidecar says {k}x{d}, matrix is {}x{}",
            matrix.n(),
            matrix.d()
        )));
    }
    Codebook::new(k, d, matrix.values().to_vec())
}

/// Writes the mean as row 0 and the components below it, plus a `.meta`
/// sidecar carrying the eigenvalues (full precision, so the explained
/// variance survives the trip).
pub fn save_pca_basis(basis: &PcaBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut values = basis.mean().to_vec();
    values.extend_from_slice(basis.components());
    let matrix = DescriptorMatrix::new(basis.m() + 1, basis.d(), values)?;
    write_descriptors(&matrix, path)?;
    let eigenvalues = basis
        .eigenvalues()
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(" ");
    write_sidecar(
        path,
        "pca",
        &[
            ("components", basis.m().to_string()),
            ("d", basis.d().to_string()),
            ("layout", "mean_then_components".to_string()),
            ("eigenvalues", eigenvalues),
            ("total_variance", format!("{:.17e}", basis.total_variance())),
        ],
    )
}

pub fn load_pca_basis(path: impl AsRef<Path>) -> Result<PcaBasis> {
    let path = path.as_ref();
    let matrix = read_descriptors(path)?;
    let keys = read_sidecar(path, "pca")?;
    let m: usize = sidecar_value(&keys, "components")?;
    let d: usize = sidecar_value(&keys, "d")?;
    if matrix.n() != m + 1 || matrix.d() != d {
        return Err(Error::Shape(format!(
            "sidecar says {m} components over {d} dims, matrix is {}x{}",
            matrix.n(),
            matrix.d()
        )));
    }
    let mean = matrix.row(0).to_vec();
    let components = matrix.values()[d..].to_vec();
    let eigenvalues: Vec<f64> = keys
        .get("eigenvalues")
        .map(|text| {
            text.split_whitespace()
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::Param(format!("bad eigenvalue '{f}'")))
                })
                .collect::<Result<_>>()
        })
        .transpose()?
        .unwrap_or_default();
    if eigenvalues.len() != m {
        return Err(Error::Shape(format!(
            "{} eigenvalues for {m} components",
            eigenvalues.len()
        )));
    }
    let total_variance: f64 = sidecar_value(&keys, "total_variance")?;
    PcaBasis::from_parts_full(mean, components, m, d, eigenvalues, total_variance)
}
