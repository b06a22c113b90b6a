//! Seeded k-means with k-means++ initialization and a fixed Lloyd iteration
//! count. Fully deterministic in the seed; assignment ties go to the lowest
//! centroid index and empty clusters are reseeded to the farthest point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::DescriptorMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    d: usize,
    centroids: Vec<f64>,
}

impl Codebook {
    pub fn new(k: usize, d: usize, centroids: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Param("codebook needs k >= 1 and d >= 1".into()));
        }
        if centroids.len() != k * d {
            return Err(Error::Shape(format!(
                "{} centroid values for k={k}, d={d}",
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("centroids must be finite".into()));
        }
        Ok(Self { k, d, centroids })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.d..(i + 1) * self.d]
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn as_matrix(&self) -> DescriptorMatrix {
        DescriptorMatrix::new(self.k, self.d, self.centroids.clone())
            .expect("codebook invariants already checked")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the centroid closest to `point` (squared Euclidean, ties to the
/// lowest index).
pub fn nearest_centroid(codebook: &Codebook, point: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for i in 0..codebook.k() {
        let dist = sq_dist(point, codebook.centroid(i));
        if dist < best_dist {
            best_dist = dist;
            best = i;
        }
    }
    best
}

/// Nearest-centroid assignment for every row.
pub fn assign_to_codebook(codebook: &Codebook, samples: &DescriptorMatrix) -> Result<Vec<usize>> {
    if samples.d() != codebook.d() {
        return Err(Error::Dim {
            expected: codebook.d(),
            actual: samples.d(),
        });
    }
    Ok(samples
        .rows()
        .map(|row| nearest_centroid(codebook, row))
        .collect())
}

/// Weighted draw over `weights` using a single uniform sample; falls back to
/// a uniform index when all weights vanish (duplicate points).
fn weighted_pick(rng: &mut ChaCha12Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

pub fn kmeans_fit(
    samples: &DescriptorMatrix,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<Codebook> {
    let n = samples.n();
    let d = samples.d();
    if k == 0 {
        return Err(Error::Param("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Param(format!("{n} samples cannot fill {k} clusters")));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<f64> = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(samples.row(first));
    let mut min_dists: Vec<f64> = samples
        .rows()
        .map(|row| sq_dist(row, &centroids[..d]))
        .collect();
    for _ in 1..k {
        let chosen = weighted_pick(&mut rng, &min_dists);
        let start = centroids.len();
        centroids.extend_from_slice(samples.row(chosen));
        let newest = centroids[start..].to_vec();
        for (dist, row) in min_dists.iter_mut().zip(samples.rows()) {
            let cand = sq_dist(row, &newest);
            if cand < *dist {
                *dist = cand;
            }
        }
    }

    let mut codebook = Codebook::new(k, d, centroids)?;
    let mut assignments = vec![0usize; n];

    for _ in 0..iters {
        for (a, row) in assignments.iter_mut().zip(samples.rows()) {
            *a = nearest_centroid(&codebook, row);
        }

        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0usize; k];
        for (a, row) in assignments.iter().zip(samples.rows()) {
            counts[*a] += 1;
            for (s, v) in sums[*a * d..(*a + 1) * d].iter_mut().zip(row) {
                *s += v;
            }
        }

        let mut centroids = Vec::with_capacity(k * d);
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster to the point farthest from its
                // assigned centroid (ties to the lowest index)
                let mut far = 0usize;
                let mut far_dist = f64::NEG_INFINITY;
                for (i, row) in samples.rows().enumerate() {
                    let dist = sq_dist(row, codebook.centroid(assignments[i]));
                    if dist > far_dist {
                        far_dist = dist;
                        far = i;
                    }
                }
                centroids.extend_from_slice(samples.row(far));
            } else {
                centroids.extend(
                    sums[c * d..(c + 1) * d]
                        .iter()
                        .map(|s| s / counts[c] as f64),
                );
            }
        }
        codebook = Codebook::new(k, d, centroids)?;
    }

    Ok(codebook)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn exact_fit_when_samples_equal_k() {
        let samples =
            DescriptorMatrix::new(3, 2, vec![0.0, 0.0, 10.0, 0.0, 0.0, 10.0]).unwrap();
        let codebook = kmeans_fit(&samples, 3, 10, 1).unwrap();
        // cost zero: every sample sits on a centroid
        for row in samples.rows() {
            let c = nearest_centroid(&codebook, row);
            assert_eq!(sq_dist(row, codebook.centroid(c)), 0.0);
        }
    }

    #[test]
    fn recovers_two_well_separated_blobs() {
        // Monte-Carlo oracle with known generative means
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let means = [[-2.0, 0.0], [2.0, 1.0]];
        let mut rows = Vec::new();
        for _ in 0..100 {
            for mean in &means {
                rows.push(vec![
                    mean[0] + 0.05 * rng.random_range(-1.0..1.0),
                    mean[1] + 0.05 * rng.random_range(-1.0..1.0),
                ]);
            }
        }
        let samples = DescriptorMatrix::from_rows(&rows).unwrap();
        let codebook = kmeans_fit(&samples, 2, 20, 9).unwrap();
        let mut found = [false, false];
        for c in 0..2 {
            for (m, mean) in means.iter().enumerate() {
                if sq_dist(codebook.centroid(c), mean) < 0.01 {
                    found[m] = true;
                }
            }
        }
        assert!(found[0] && found[1], "centroids {:?}", codebook.centroids());
    }

    #[test]
    fn deterministic_in_seed() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let samples = DescriptorMatrix::from_rows(&rows).unwrap();
        let a = kmeans_fit(&samples, 5, 8, 77).unwrap();
        let b = kmeans_fit(&samples, 5, 8, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_more_clusters_than_samples() {
        let samples = DescriptorMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(kmeans_fit(&samples, 3, 5, 0).is_err());
    }
}
