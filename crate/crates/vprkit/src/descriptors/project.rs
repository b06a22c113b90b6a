//! Dimensionality reduction: seeded random projections and PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DescriptorMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    /// Entries drawn from N(0, 1), scaled by `1/sqrt(m)`.
    Gaussian,
    /// Entries `+-1`, scaled by `1/sqrt(m)`.
    Sign,
}

/// Projects the rows onto `target_dim` dimensions with a random matrix drawn
/// row-major from the seeded generator, so the projection is exactly
/// reproducible.
pub fn random_projection(
    descriptors: &DescriptorMatrix,
    target_dim: usize,
    kind: ProjectionKind,
    seed: u64,
) -> Result<DescriptorMatrix> {
    if target_dim == 0 {
        return Err(Error::Param("target dimension must be at least 1".into()));
    }
    let d = descriptors.d();
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut projection = Vec::with_capacity(target_dim * d);
    for _ in 0..target_dim * d {
        let entry = match kind {
            ProjectionKind::Gaussian => {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            }
            ProjectionKind::Sign => {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
        };
        projection.push(entry);
    }

    let mut values = Vec::with_capacity(descriptors.n() * target_dim);
    for row in descriptors.rows() {
        for p_row in projection.chunks_exact(d) {
            values.push(row.iter().zip(p_row).map(|(x, p)| x * p).sum());
        }
    }
    let out = DescriptorMatrix::new(descriptors.n(), target_dim, values)?;
    match descriptors.labels() {
        Some(labels) => out.with_labels(labels.to_vec()),
        None => Ok(out),
    }
}

/// A fitted PCA projection: the data mean, the top principal axes as rows,
/// and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: Vec<f64>,
    components: Vec<f64>,
    m: usize,
    d: usize,
    eigenvalues: Vec<f64>,
    total_variance: f64,
}

impl PcaBasis {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Variance captured by each kept axis.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of the total variance captured by each kept axis.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|e| {
                if self.total_variance > 0.0 {
                    e / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Rebuilds a basis from its serialized parts.
    pub fn from_parts_full(
        mean: Vec<f64>,
        components: Vec<f64>,
        m: usize,
        d: usize,
        eigenvalues: Vec<f64>,
        total_variance: f64,
    ) -> Result<Self> {
        if mean.len() != d || components.len() != m * d || eigenvalues.len() != m {
            return Err(Error::Shape(format!(
                "mean of {}, {} component values, {} eigenvalues for m={m}, d={d}",
                mean.len(),
                components.len(),
                eigenvalues.len()
            )));
        }
        Ok(Self {
            mean,
            components,
            m,
            d,
            eigenvalues,
            total_variance,
        })
    }
}

/// Makes the entry of the largest magnitude positive (ties to the lowest
/// index), so eigenvector signs are reproducible.
fn fix_sign(component: &mut [f64]) {
    let mut idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, v) in component.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            idx = i;
        }
    }
    if component[idx] < 0.0 {
        for v in component.iter_mut() {
            *v = -*v;
        }
    }
}

/// Fits a PCA basis with `target_dim <= min(n - 1, d)` axes via the
/// eigendecomposition of the mean-centered covariance. When there are fewer
/// samples than dimensions, the Gram-matrix route computes the same axes.
pub fn pca_fit(descriptors: &DescriptorMatrix, target_dim: usize) -> Result<PcaBasis> {
    let n = descriptors.n();
    let d = descriptors.d();
    if n < 2 {
        return Err(Error::Param("PCA needs at least 2 samples".into()));
    }
    let limit = (n - 1).min(d);
    if target_dim == 0 || target_dim > limit {
        return Err(Error::Param(format!(
            "target dimension {target_dim} outside 1..={limit} (min of n-1 and d)"
        )));
    }

    let mut mean = vec![0.0f64; d];
    for row in descriptors.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<f64> = descriptors
        .rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect::<Vec<_>>())
        .collect();
    let x = DMatrix::from_row_slice(n, d, &centered);
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;

    // eigendecompose whichever of X'X/n (d x d) and XX'/n (n x n) is smaller
    let (mut pairs, from_gram): (Vec<(f64, Vec<f64>)>, bool) = if d <= n {
        let cov = (x.transpose() * &x) / n as f64;
        let eigen = SymmetricEigen::new(cov);
        let pairs = (0..d)
            .map(|i| (eigen.eigenvalues[i], eigen.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        (pairs, false)
    } else {
        let gram = (&x * x.transpose()) / n as f64;
        let eigen = SymmetricEigen::new(gram);
        let pairs = (0..n)
            .map(|i| (eigen.eigenvalues[i], eigen.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        (pairs, true)
    };

    // sort by descending eigenvalue, ties by original index for determinism
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[b].0
            .partial_cmp(&pairs[a].0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(target_dim * d);
    let mut eigenvalues = Vec::with_capacity(target_dim);
    for &idx in order.iter().take(target_dim) {
        let (lambda, ref vector) = pairs[idx];
        if from_gram {
            if lambda <= 1e-12 {
                return Err(Error::Param(
                    "data rank is too low for the requested dimension".into(),
                ));
            }
            // map a Gram eigenvector u to the covariance eigenvector
            // X'u / sqrt(n * lambda)
            let u = DMatrix::from_column_slice(n, 1, vector);
            let v = x.transpose() * u / (n as f64 * lambda).sqrt();
            let mut comp: Vec<f64> = v.iter().copied().collect();
            fix_sign(&mut comp);
            components.extend(comp);
        } else {
            let mut comp = vector.clone();
            fix_sign(&mut comp);
            components.extend(comp);
        }
        eigenvalues.push(lambda.max(0.0));
    }
    // drop the borrow before moving
    pairs.clear();

    Ok(PcaBasis {
        mean,
        components,
        m: target_dim,
        d,
        eigenvalues,
        total_variance,
    })
}

/// Projects descriptors onto a fitted basis: `(x - mean) . component` per
/// axis.
pub fn pca_apply(descriptors: &DescriptorMatrix, basis: &PcaBasis) -> Result<DescriptorMatrix> {
    if descriptors.d() != basis.d {
        return Err(Error::Dim {
            expected: basis.d,
            actual: descriptors.d(),
        });
    }
    let mut values = Vec::with_capacity(descriptors.n() * basis.m);
    for row in descriptors.rows() {
        let centered: Vec<f64> = row.iter().zip(&basis.mean).map(|(v, m)| v - m).collect();
        for i in 0..basis.m {
            values.push(
                centered
                    .iter()
                    .zip(basis.component(i))
                    .map(|(x, c)| x * c)
                    .sum(),
            );
        }
    }
    let out = DescriptorMatrix::new(descriptors.n(), basis.m, values)?;
    match descriptors.labels() {
        Some(labels) => out.with_labels(labels.to_vec()),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DescriptorMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DescriptorMatrix::new(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn projection_is_deterministic_and_maps_zero_to_zero() {
        let m = random_matrix(5, 16, 1);
        for kind in [ProjectionKind::Gaussian, ProjectionKind::Sign] {
            let a = random_projection(&m, 16, kind, 9).unwrap();
            let b = random_projection(&m, 16, kind, 9).unwrap();
            assert_eq!(a, b);
        }
        let zeros = DescriptorMatrix::new(2, 8, vec![0.0; 16]).unwrap();
        let out = random_projection(&zeros, 4, ProjectionKind::Sign, 0).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn projection_roughly_preserves_norms() {
        // Monte-Carlo check of the norm-preservation property on unit vectors
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let d = 256;
        let m = 64;
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let mut v: Vec<f64> =
                    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                v
            })
            .collect();
        let matrix = DescriptorMatrix::from_rows(&rows).unwrap();
        for kind in [ProjectionKind::Gaussian, ProjectionKind::Sign] {
            let projected = random_projection(&matrix, m, kind, 1234).unwrap();
            let mean_err: f64 = projected
                .rows()
                .map(|row| {
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (norm - 1.0).abs()
                })
                .sum::<f64>()
                / 100.0;
            assert!(mean_err < 0.15, "{kind:?} mean relative norm error {mean_err}");
        }
    }

    #[test]
    fn pca_on_a_line_captures_all_variance() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = DescriptorMatrix::from_rows(&rows).unwrap();
        let basis = pca_fit(&m, 1).unwrap();
        let ratio = basis.explained_variance_ratio();
        assert!((ratio[0] - 1.0).abs() < 1e-9);
        let projected = pca_apply(&m, &basis).unwrap();
        let proj_var: f64 =
            projected.values().iter().map(|v| v * v).sum::<f64>() / 10.0;
        assert!((proj_var - basis.eigenvalues()[0]).abs() < 1e-9);
    }

    #[test]
    fn pca_components_are_orthonormal() {
        let m = random_matrix(30, 6, 3);
        let basis = pca_fit(&m, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = basis
                    .component(i)
                    .iter()
                    .zip(basis.component(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9, "components {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        // more dimensions than samples forces the Gram path; orthonormality
        // and explained variance must still hold
        let tall = random_matrix(6, 12, 8);
        let basis = pca_fit(&tall, 3).unwrap();
        for i in 0..3 {
            let norm: f64 = basis.component(i).iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        let projected = pca_apply(&tall, &basis).unwrap();
        for (axis, lambda) in basis.eigenvalues().iter().enumerate() {
            let var: f64 = projected
                .rows()
                .map(|r| r[axis] * r[axis])
                .sum::<f64>()
                / 6.0;
            assert!((var - lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn components_are_covariance_eigenvectors() {
        // oracle: every kept component v must satisfy C v = lambda v for the
        // mean-centered covariance C, whichever route computed it
        for (n, d) in [(20usize, 5usize), (5, 12)] {
            let m = random_matrix(n, d, (n * d) as u64);
            let basis = pca_fit(&m, 3).unwrap();
            let mean = basis.mean();
            // C = X'X / n over centered rows, built by brute force
            let mut cov = vec![0.0f64; d * d];
            for row in m.rows() {
                for a in 0..d {
                    for b in 0..d {
                        cov[a * d + b] += (row[a] - mean[a]) * (row[b] - mean[b]) / n as f64;
                    }
                }
            }
            for (axis, lambda) in basis.eigenvalues().iter().enumerate() {
                let v = basis.component(axis);
                for a in 0..d {
                    let cv: f64 = (0..d).map(|b| cov[a * d + b] * v[b]).sum();
                    assert!(
                        (cv - lambda * v[a]).abs() < 1e-9,
                        "{n}x{d} axis {axis}: residual {}",
                        (cv - lambda * v[a]).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn isotropic_cloud_spreads_variance_evenly() {
        // sampling oracle: for an isotropic Gaussian the top axis explains
        // roughly 1/d of the variance
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let d = 8;
        let rows: Vec<Vec<f64>> = (0..4000)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let m = DescriptorMatrix::from_rows(&rows).unwrap();
        let basis = pca_fit(&m, 1).unwrap();
        let ratio = basis.explained_variance_ratio()[0];
        assert!((ratio - 1.0 / d as f64).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn reconstruction_error_is_monotone_in_m() {
        let m = random_matrix(25, 7, 21);
        let reconstruction_error = |target: usize| -> f64 {
            let basis = pca_fit(&m, target).unwrap();
            let projected = pca_apply(&m, &basis).unwrap();
            let mut err = 0.0;
            for (row, proj) in m.rows().zip(projected.rows()) {
                for dim in 0..7 {
                    let mut rebuilt = basis.mean()[dim];
                    for axis in 0..target {
                        rebuilt += proj[axis] * basis.component(axis)[dim];
                    }
                    err += (row[dim] - rebuilt) * (row[dim] - rebuilt);
                }
            }
            err
        };
        let errors: Vec<f64> = (1..=7).map(reconstruction_error).collect();
        for pair in errors.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "errors {errors:?}");
        }
    }

    #[test]
    fn pca_rejects_oversized_target() {
        let m = random_matrix(4, 8, 0);
        assert!(pca_fit(&m, 4).is_err());
        assert!(pca_fit(&m, 3).is_ok());
    }
}
