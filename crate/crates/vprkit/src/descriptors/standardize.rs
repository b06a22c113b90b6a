//! Per-group descriptor standardization.
//!
//! Each group (an appearance condition, or a cluster found on the data) is
//! normalized per dimension to zero mean and unit standard deviation. This
//! removes per-condition affine appearance shifts before descriptors from
//! different conditions are compared.

use std::collections::BTreeMap;

use super::kmeans::{assign_to_codebook, kmeans_fit};
use crate::data::DescriptorMatrix;
use crate::error::{Error, Result};

/// Standard deviations below this floor are clamped when applying the
/// transform.
const STD_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
struct GroupStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Per-group, per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    d: usize,
    groups: BTreeMap<String, GroupStats>,
}

impl StandardizationStats {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(|s| s.as_str())
    }

    pub fn mean(&self, group: &str) -> Option<&[f64]> {
        self.groups.get(group).map(|g| g.mean.as_slice())
    }

    pub fn std(&self, group: &str) -> Option<&[f64]> {
        self.groups.get(group).map(|g| g.std.as_slice())
    }
}

fn compute_stats(rows: &[&[f64]], d: usize) -> GroupStats {
    let n = rows.len() as f64;
    let mut mean = vec![0.0f64; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(*row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; d];
    for row in rows {
        for ((s, v), m) in var.iter_mut().zip(*row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    GroupStats { mean, std }
}

/// Fits per-group statistics. Every group needs at least two rows.
pub fn standardize_fit(
    descriptors: &DescriptorMatrix,
    group_labels: &[String],
) -> Result<StandardizationStats> {
    if group_labels.len() != descriptors.n() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            group_labels.len(),
            descriptors.n()
        )));
    }
    let mut members: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
    for (label, row) in group_labels.iter().zip(descriptors.rows()) {
        members.entry(label).or_default().push(row);
    }
    let mut groups = BTreeMap::new();
    for (label, rows) in members {
        if rows.len() < 2 {
            return Err(Error::GroupTooSmall {
                label: label.to_owned(),
                size: rows.len(),
            });
        }
        groups.insert(label.to_owned(), compute_stats(&rows, descriptors.d()));
    }
    Ok(StandardizationStats {
        d: descriptors.d(),
        groups,
    })
}

/// Applies fitted statistics: `(x - mean) / max(std, 1e-9)` per group and
/// dimension. Labels not present in the statistics are an error.
pub fn standardize_apply(
    descriptors: &DescriptorMatrix,
    stats: &StandardizationStats,
    group_labels: &[String],
) -> Result<DescriptorMatrix> {
    if group_labels.len() != descriptors.n() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            group_labels.len(),
            descriptors.n()
        )));
    }
    if descriptors.d() != stats.d {
        return Err(Error::Dim {
            expected: stats.d,
            actual: descriptors.d(),
        });
    }
    let mut values = Vec::with_capacity(descriptors.n() * descriptors.d());
    for (label, row) in group_labels.iter().zip(descriptors.rows()) {
        let group = stats
            .groups
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
        for ((v, m), s) in row.iter().zip(&group.mean).zip(&group.std) {
            values.push((v - m) / s.max(STD_FLOOR));
        }
    }
    let out = DescriptorMatrix::new(descriptors.n(), descriptors.d(), values)?;
    match descriptors.labels() {
        Some(labels) => out.with_labels(labels.to_vec()),
        None => Ok(out),
    }
}

/// Standardizes a whole set as a single group.
pub fn standardize_per_set(descriptors: &DescriptorMatrix) -> Result<DescriptorMatrix> {
    let labels = vec![String::from("set"); descriptors.n()];
    let stats = standardize_fit(descriptors, &labels)?;
    standardize_apply(descriptors, &stats, &labels)
}

/// Clusters the descriptors with k-means, then standardizes each cluster
/// independently. Clusters with fewer than two members fall back to the
/// global statistics of the whole set.
pub fn cluster_standardize(
    descriptors: &DescriptorMatrix,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<DescriptorMatrix> {
    if descriptors.n() < 2 * k {
        return Err(Error::Param(format!(
            "{} rows cannot support {k} standardization clusters (need >= 2k)",
            descriptors.n()
        )));
    }
    let codebook = kmeans_fit(descriptors, k, iters, seed)?;
    let assignments = assign_to_codebook(&codebook, descriptors)?;

    let all_rows: Vec<&[f64]> = descriptors.rows().collect();
    let global = compute_stats(&all_rows, descriptors.d());

    let mut per_cluster: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
    for (a, row) in assignments.iter().zip(descriptors.rows()) {
        per_cluster[*a].push(row);
    }
    let cluster_stats: Vec<GroupStats> = per_cluster
        .iter()
        .map(|rows| {
            if rows.len() < 2 {
                global.clone()
            } else {
                compute_stats(rows, descriptors.d())
            }
        })
        .collect();

    let mut values = Vec::with_capacity(descriptors.n() * descriptors.d());
    for (a, row) in assignments.iter().zip(descriptors.rows()) {
        let stats = &cluster_stats[*a];
        for ((v, m), s) in row.iter().zip(&stats.mean).zip(&stats.std) {
            values.push((v - m) / s.max(STD_FLOOR));
        }
    }
    let out = DescriptorMatrix::new(descriptors.n(), descriptors.d(), values)?;
    match descriptors.labels() {
        Some(labels) => out.with_labels(labels.to_vec()),
        None => Ok(out),
    }
}
