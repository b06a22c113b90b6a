//! Local feature aggregation into holistic descriptors.

use super::kmeans::{nearest_centroid, Codebook};
use crate::data::LocalFeatureSet;
use crate::error::{Error, Result};

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Bag of visual words: an L2-normalized histogram of nearest-centroid
/// assignments (dimension `k`). An empty feature set yields the zero vector.
pub fn aggregate_bovw(features: &LocalFeatureSet, codebook: &Codebook) -> Result<Vec<f64>> {
    if features.k() > 0 && features.d() != codebook.d() {
        return Err(Error::Dim {
            expected: codebook.d(),
            actual: features.d(),
        });
    }
    let mut histogram = vec![0.0f64; codebook.k()];
    for vector in features.vectors() {
        histogram[nearest_centroid(codebook, vector)] += 1.0;
    }
    l2_normalize(&mut histogram);
    Ok(histogram)
}

/// VLAD: per-centroid sums of residuals of the assigned features,
/// concatenated (dimension `k * d`), passed through a signed square root and
/// L2-normalized. An empty feature set yields the zero vector.
pub fn aggregate_vlad(features: &LocalFeatureSet, codebook: &Codebook) -> Result<Vec<f64>> {
    if features.k() > 0 && features.d() != codebook.d() {
        return Err(Error::Dim {
            expected: codebook.d(),
            actual: features.d(),
        });
    }
    let d = codebook.d();
    let mut residuals = vec![0.0f64; codebook.k() * d];
    for vector in features.vectors() {
        let c = nearest_centroid(codebook, vector);
        let centroid = codebook.centroid(c);
        for (out, (v, cv)) in residuals[c * d..(c + 1) * d]
            .iter_mut()
            .zip(vector.iter().zip(centroid))
        {
            *out += v - cv;
        }
    }
    for v in &mut residuals {
        *v = v.signum() * v.abs().sqrt();
    }
    l2_normalize(&mut residuals);
    Ok(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(rows: &[&[f64]]) -> LocalFeatureSet {
        let d = rows[0].len();
        let vectors: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        LocalFeatureSet::new(d, vectors, vec![(0, 0); rows.len()]).unwrap()
    }

    fn codebook(rows: &[&[f64]]) -> Codebook {
        let d = rows[0].len();
        let centroids: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Codebook::new(rows.len(), d, centroids).unwrap()
    }

    #[test]
    fn bovw_all_features_on_one_centroid() {
        let cb = codebook(&[&[0.0, 0.0], &[10.0, 10.0]]);
        let f = features(&[&[0.1, 0.0], &[0.0, 0.2], &[-0.1, 0.1]]);
        let hist = aggregate_bovw(&f, &cb).unwrap();
        assert_eq!(hist, vec![1.0, 0.0]);
    }

    #[test]
    fn bovw_counts_partition_the_features() {
        let cb = codebook(&[&[0.0, 0.0], &[1.0, 1.0], &[5.0, 5.0]]);
        let f = features(&[&[0.1, 0.1], &[0.9, 1.1], &[4.9, 5.2], &[5.1, 4.8], &[0.0, 0.0]]);
        // recompute the unnormalized histogram by brute force
        let mut counts = vec![0usize; 3];
        for v in f.vectors() {
            counts[nearest_centroid(&cb, v)] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), f.k());
        let hist = aggregate_bovw(&f, &cb).unwrap();
        let total: f64 = counts.iter().map(|c| (*c * *c) as f64).sum::<f64>().sqrt();
        for (h, c) in hist.iter().zip(&counts) {
            assert!((h - *c as f64 / total).abs() < 1e-12);
        }
    }

    #[test]
    fn bovw_hand_case_two_one_split() {
        let cb = codebook(&[&[0.0], &[1.0]]);
        let f = features(&[&[0.1], &[0.2], &[0.9]]);
        let hist = aggregate_bovw(&f, &cb).unwrap();
        let s5 = 5.0f64.sqrt();
        assert!((hist[0] - 2.0 / s5).abs() < 1e-12);
        assert!((hist[1] - 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn bovw_empty_set_stays_zero() {
        let cb = codebook(&[&[0.0], &[1.0]]);
        let f = LocalFeatureSet::new(1, vec![], vec![]).unwrap();
        assert_eq!(aggregate_bovw(&f, &cb).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn vlad_single_centroid_at_origin() {
        let cb = codebook(&[&[0.0, 0.0]]);
        let f = features(&[&[1.0, 0.0], &[1.0, 2.0]]);
        // residual sum is (2, 2); signed sqrt then L2 normalization
        let got = aggregate_vlad(&f, &cb).unwrap();
        let r = 2.0f64.sqrt();
        let n = (r * r + r * r).sqrt();
        assert!((got[0] - r / n).abs() < 1e-12);
        assert!((got[1] - r / n).abs() < 1e-12);
    }

    #[test]
    fn vlad_features_on_centroids_give_zero() {
        let cb = codebook(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let f = features(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let got = aggregate_vlad(&f, &cb).unwrap();
        assert!(got.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn vlad_hand_case_two_features_two_centroids() {
        let cb = codebook(&[&[0.0], &[1.0]]);
        let f = features(&[&[0.2], &[1.3]]);
        // residuals: centroid 0 gets 0.2, centroid 1 gets 0.3
        let a = 0.2f64.sqrt();
        let b = 0.3f64.sqrt();
        let n = (a * a + b * b).sqrt();
        let got = aggregate_vlad(&f, &cb).unwrap();
        assert!((got[0] - a / n).abs() < 1e-12);
        assert!((got[1] - b / n).abs() < 1e-12);
        assert_eq!(got.len(), cb.k() * cb.d());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cb = codebook(&[&[0.0, 0.0]]);
        let f = features(&[&[0.1]]);
        assert!(aggregate_bovw(&f, &cb).is_err());
        assert!(aggregate_vlad(&f, &cb).is_err());
    }
}
