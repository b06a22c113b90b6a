//! Matching decisions: turning a similarity matrix into boolean matches,
//! either one best database image per query or everything above a threshold.

use crate::data::{MatchMatrix, MatchMode, MetricTag, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::similarity::EXCLUDED_SIMILARITY;

/// Per query column, marks the database row with the highest similarity
/// (ties to the lowest row).
///
/// With `exclusion = Some(h)` the matrix must be square (a single-session
/// comparison) and rows within `h` of the column index are excluded from the
/// argmax; `Some(0)` suppresses only the self-match diagonal. Columns whose
/// rows are all excluded yield no match.
pub fn best_match_per_query(
    s: &SimilarityMatrix,
    exclusion: Option<usize>,
) -> Result<MatchMatrix> {
    if exclusion.is_some() && s.rows() != s.cols() {
        return Err(Error::Param(format!(
            "recent-match exclusion needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let mut values = vec![false; s.rows() * s.cols()];
    for col in 0..s.cols() {
        let mut best: Option<(usize, f64)> = None;
        for row in 0..s.rows() {
            if let Some(h) = exclusion {
                if row.abs_diff(col) <= h {
                    continue;
                }
            }
            let value = s.get(row, col);
            if value == EXCLUDED_SIMILARITY {
                continue;
            }
            if best.map(|(_, b)| value > b).unwrap_or(true) {
                best = Some((row, value));
            }
        }
        if let Some((row, _)) = best {
            values[row * s.cols() + col] = true;
        }
    }
    MatchMatrix::new(s.rows(), s.cols(), values, MatchMode::SingleBest)
}

/// Marks every cell with similarity at or above `theta`; excluded cells stay
/// unmatched at any threshold.
pub fn threshold_match(s: &SimilarityMatrix, theta: f64) -> MatchMatrix {
    let values = s
        .values()
        .iter()
        .map(|v| *v != EXCLUDED_SIMILARITY && *v >= theta)
        .collect();
    MatchMatrix::new(s.rows(), s.cols(), values, MatchMode::MultiMatch)
        .expect("shape mirrors the similarity matrix")
}

/// Picks a threshold by maximizing between-class variance (Otsu's method)
/// over a 256-bin histogram of the similarity values; returns the lower edge
/// of the first bin above the split. Needs at least two distinct values.
pub fn auto_threshold(s: &SimilarityMatrix) -> Result<f64> {
    const BINS: usize = 256;
    let finite: Vec<f64> = s
        .values()
        .iter()
        .copied()
        .filter(|v| *v != EXCLUDED_SIMILARITY)
        .collect();
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if finite.is_empty() || min == max {
        return Err(Error::NoSeparation);
    }
    let width = (max - min) / BINS as f64;
    let mut counts = [0usize; BINS];
    for v in &finite {
        let bin = (((v - min) / (max - min)) * BINS as f64) as usize;
        counts[bin.min(BINS - 1)] += 1;
    }

    let total: f64 = finite.len() as f64;
    let total_mean: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, c)| i as f64 * *c as f64)
        .sum::<f64>()
        / total;

    let mut best_split = None;
    let mut best_variance = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..BINS - 1 {
        w0 += counts[t] as f64;
        sum0 += t as f64 * counts[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_mean * total - sum0) / w1;
        let variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if variance > best_variance {
            best_variance = variance;
            best_split = Some(t);
        }
    }
    let split = best_split.ok_or(Error::NoSeparation)?;
    Ok(min + (split + 1) as f64 * width)
}

/// Masks the band `|row - col| <= halfwidth` of a square single-session
/// matrix with the exclusion sentinel, so thresholding and evaluation never
/// match recent frames.
pub fn apply_exclusion(s: &SimilarityMatrix, halfwidth: usize) -> Result<SimilarityMatrix> {
    if s.rows() != s.cols() {
        return Err(Error::Param(format!(
            "recent-match exclusion needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let mut values = s.values().to_vec();
    for row in 0..s.rows() {
        for col in 0..s.cols() {
            if row.abs_diff(col) <= halfwidth {
                values[row * s.cols() + col] = EXCLUDED_SIMILARITY;
            }
        }
    }
    SimilarityMatrix::new(s.rows(), s.cols(), values, MetricTag::Refined)
}
