//! Pairwise descriptor comparison, top-K retrieval, local-feature mutual
//! matching, hierarchical re-ranking, and sequence-based refinement.

use rayon::prelude::*;

use crate::data::{DescriptorMatrix, GrayImage, LocalFeatureSet, MetricTag, SimilarityMatrix};
use crate::error::{Error, Result};

/// Sentinel marking cells excluded from matching (re-ranked non-candidates,
/// masked self-match bands). Always compares below any real similarity and is
/// never matched at any threshold.
pub const EXCLUDED_SIMILARITY: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    NegEuclidean,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity with two fixed conventions: a zero vector compares as 0
/// against anything, and bitwise-identical vectors compare as exactly 1.
pub fn cosine_similarity(a: &[f64], b: &[f64], norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    (dot(a, b) / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

fn neg_euclidean(a: &[f64], b: &[f64]) -> f64 {
    -a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dense similarity matrix between two descriptor sets; rows index the
/// database set, columns the query set. For a single-session comparison pass
/// the same matrix on both sides.
pub fn similarity_matrix(
    db: &DescriptorMatrix,
    q: &DescriptorMatrix,
    metric: Metric,
) -> Result<SimilarityMatrix> {
    if db.d() != q.d() {
        return Err(Error::Dim {
            expected: db.d(),
            actual: q.d(),
        });
    }
    if db.n() == 0 || q.n() == 0 {
        return Err(Error::Param("similarity needs non-empty sets".into()));
    }
    let cols = q.n();
    let db_norms: Vec<f64> = db.rows().map(norm).collect();
    let q_norms: Vec<f64> = q.rows().map(norm).collect();

    let mut values = vec![0.0f64; db.n() * cols];
    // rows are independent; parallel fill cannot change the result
    values
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out_row)| {
            let a = db.row(i);
            for (j, out) in out_row.iter_mut().enumerate() {
                let b = q.row(j);
                *out = match metric {
                    Metric::Cosine => cosine_similarity(a, b, db_norms[i], q_norms[j]),
                    Metric::NegEuclidean => neg_euclidean(a, b),
                };
            }
        });

    let tag = match metric {
        Metric::Cosine => MetricTag::Cosine,
        Metric::NegEuclidean => MetricTag::NegEuclidean,
    };
    SimilarityMatrix::new(db.n(), cols, values, tag)
}

/// How to turn a distance into a similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistConversion {
    Negate,
    Reciprocal,
}

/// Converts a distance value into a similarity. Reciprocal conversion
/// requires a strictly positive distance.
pub fn dist_to_sim(dist: f64, mode: DistConversion) -> Result<f64> {
    match mode {
        DistConversion::Negate => Ok(-dist),
        DistConversion::Reciprocal => {
            if dist <= 0.0 {
                Err(Error::Param(format!(
                    "reciprocal conversion needs dist > 0, got {dist}"
                )))
            } else {
                Ok(1.0 / dist)
            }
        }
    }
}

/// One retrieved database row for a query column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub similarity: f64,
}

/// Per query column: up to K database rows ordered by descending similarity
/// (ties broken by the lower row index). Columns whose rows are all excluded
/// yield fewer than K neighbors.
#[derive(Debug, Clone)]
pub struct TopKResult {
    pub k: usize,
    pub columns: Vec<Vec<Neighbor>>,
}

/// Exhaustive top-K retrieval per query column.
pub fn knn_topk(s: &SimilarityMatrix, k: usize) -> Result<TopKResult> {
    if k == 0 || k > s.rows() {
        return Err(Error::Param(format!(
            "K = {k} outside 1..={} database rows",
            s.rows()
        )));
    }
    let columns: Vec<Vec<Neighbor>> = (0..s.cols())
        .map(|col| {
            let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
            for row in 0..s.rows() {
                let value = s.get(row, col);
                if value == EXCLUDED_SIMILARITY {
                    continue;
                }
                // keep `best` sorted by (similarity desc, row asc)
                let pos = best
                    .partition_point(|n| n.similarity > value || (n.similarity == value && n.row < row));
                if pos < k {
                    best.insert(
                        pos,
                        Neighbor {
                            row,
                            similarity: value,
                        },
                    );
                    best.truncate(k);
                }
            }
            best
        })
        .collect();
    Ok(TopKResult { k, columns })
}

fn nearest_by_cosine(query: &[f64], query_norm: f64, set: &LocalFeatureSet, norms: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, candidate) in set.vectors().enumerate() {
        let sim = cosine_similarity(query, candidate, query_norm, norms[i]);
        if sim > best_sim {
            best_sim = sim;
            best = i;
        }
    }
    best
}

/// Fraction of local features that pick each other as cosine nearest
/// neighbors across the two sets (left-right check), normalized by the
/// smaller set size. Always in `[0, 1]`.
pub fn mutual_match_score(a: &LocalFeatureSet, b: &LocalFeatureSet) -> Result<f64> {
    if a.k() == 0 || b.k() == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    if a.d() != b.d() {
        return Err(Error::Dim {
            expected: a.d(),
            actual: b.d(),
        });
    }
    let a_norms: Vec<f64> = a.vectors().map(norm).collect();
    let b_norms: Vec<f64> = b.vectors().map(norm).collect();

    let a_to_b: Vec<usize> = a
        .vectors()
        .enumerate()
        .map(|(i, v)| nearest_by_cosine(v, a_norms[i], b, &b_norms))
        .collect();
    let b_to_a: Vec<usize> = b
        .vectors()
        .enumerate()
        .map(|(j, v)| nearest_by_cosine(v, b_norms[j], a, &a_norms))
        .collect();

    let mutual = a_to_b
        .iter()
        .enumerate()
        .filter(|(i, j)| b_to_a[**j] == *i)
        .count();
    Ok(mutual as f64 / a.k().min(b.k()) as f64)
}

/// Re-scores the top-K candidates of each query column with the mutual match
/// score of their local feature sets; every other cell becomes the exclusion
/// sentinel.
pub fn rerank_topk(
    s: &SimilarityMatrix,
    topk: &TopKResult,
    db_local: &[LocalFeatureSet],
    q_local: &[LocalFeatureSet],
) -> Result<SimilarityMatrix> {
    if db_local.len() != s.rows() {
        return Err(Error::Shape(format!(
            "{} database local feature sets for {} rows",
            db_local.len(),
            s.rows()
        )));
    }
    if q_local.len() != s.cols() {
        return Err(Error::Shape(format!(
            "{} query local feature sets for {} columns",
            q_local.len(),
            s.cols()
        )));
    }
    if topk.columns.len() != s.cols() {
        return Err(Error::Shape(format!(
            "top-K result covers {} columns, similarity matrix has {}",
            topk.columns.len(),
            s.cols()
        )));
    }

    let mut values = vec![EXCLUDED_SIMILARITY; s.rows() * s.cols()];
    for (col, neighbors) in topk.columns.iter().enumerate() {
        for neighbor in neighbors {
            let score = mutual_match_score(&db_local[neighbor.row], &q_local[col])?;
            values[neighbor.row * s.cols() + col] = score;
        }
    }
    SimilarityMatrix::new(s.rows(), s.cols(), values, MetricTag::Refined)
}

/// Parameters for similarity-based sequence refinement: window length `len`
/// (odd) and a linear grid of `v_steps` slopes in `[v_min, v_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqParams {
    pub len: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub v_steps: usize,
}

impl Default for SeqParams {
    fn default() -> Self {
        Self {
            len: 5,
            v_min: 0.8,
            v_max: 1.2,
            v_steps: 5,
        }
    }
}

impl SeqParams {
    pub fn with_len(len: usize) -> Self {
        Self {
            len,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.len == 0 || self.len % 2 == 0 {
            return Err(Error::Param(format!(
                "sequence length must be odd and >= 1, got {}",
                self.len
            )));
        }
        if !(self.v_min > 0.0 && self.v_max >= self.v_min && self.v_min.is_finite() && self.v_max.is_finite()) {
            return Err(Error::Param(format!(
                "slope range [{}, {}] must be positive and ordered",
                self.v_min, self.v_max
            )));
        }
        if self.v_steps == 0 {
            return Err(Error::Param("slope grid needs at least one step".into()));
        }
        Ok(())
    }

    /// The slope grid: `v_steps` values spaced linearly over `[v_min, v_max]`
    /// (the midpoint for a single step).
    pub fn slopes(&self) -> Vec<f64> {
        if self.v_steps == 1 {
            return vec![(self.v_min + self.v_max) / 2.0];
        }
        (0..self.v_steps)
            .map(|i| {
                self.v_min + (self.v_max - self.v_min) * i as f64 / (self.v_steps - 1) as f64
            })
            .collect()
    }
}

/// Replaces every cell with the best mean similarity over short linear
/// segments through it: for each slope `v`, the window samples
/// `S[i + round(v*t)][j + t]` for `t = -(len-1)/2 ..= (len-1)/2`, clamping
/// out-of-bounds samples to the border cell. `len = 1` returns the input
/// unchanged.
pub fn seq_refine(s: &SimilarityMatrix, params: &SeqParams) -> Result<SimilarityMatrix> {
    params.validate()?;
    if params.len == 1 {
        return Ok(s.clone());
    }
    let rows = s.rows();
    let cols = s.cols();
    let half = (params.len as i64 - 1) / 2;
    let slopes = params.slopes();

    let mut values = vec![0.0f64; rows * cols];
    values
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out_row)| {
            for (j, out) in out_row.iter_mut().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for &v in &slopes {
                    let mut sum = 0.0;
                    for t in -half..=half {
                        let row_offset = (v * t as f64).round() as i64;
                        let row = (i as i64 + row_offset).clamp(0, rows as i64 - 1) as usize;
                        let col = (j as i64 + t).clamp(0, cols as i64 - 1) as usize;
                        sum += s.get(row, col);
                    }
                    let mean = sum / params.len as f64;
                    if mean > best {
                        best = mean;
                    }
                }
                *out = best;
            }
        });

    SimilarityMatrix::new(rows, cols, values, MetricTag::Refined)
}

/// How to combine a window of frame descriptors into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceMode {
    /// Stack the window into a `d * len` vector.
    Concat,
    /// Elementwise mean over the window.
    Mean,
    /// Second half-window mean minus first half-window mean, L2-normalized
    /// (the center frame belongs to neither half; zero stays zero).
    Delta,
}

/// Combines each frame with its `len`-frame centered window (borders
/// clamp-replicated) into a sequence descriptor.
pub fn sequence_descriptors(
    m: &DescriptorMatrix,
    len: usize,
    mode: SequenceMode,
) -> Result<DescriptorMatrix> {
    if len == 0 || len % 2 == 0 {
        return Err(Error::Param(format!(
            "sequence length must be odd and >= 1, got {len}"
        )));
    }
    if len > m.n() {
        return Err(Error::Param(format!(
            "sequence length {len} exceeds {} frames",
            m.n()
        )));
    }
    let n = m.n();
    let d = m.d();
    let half = (len as i64 - 1) / 2;
    let window_rows = |i: usize| {
        (-half..=half).map(move |t| ((i as i64 + t).clamp(0, n as i64 - 1)) as usize)
    };

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = match mode {
            SequenceMode::Concat => {
                let mut out = Vec::with_capacity(d * len);
                for w in window_rows(i) {
                    out.extend_from_slice(m.row(w));
                }
                out
            }
            SequenceMode::Mean => {
                let mut out = vec![0.0; d];
                for w in window_rows(i) {
                    for (o, v) in out.iter_mut().zip(m.row(w)) {
                        *o += v;
                    }
                }
                for o in &mut out {
                    *o /= len as f64;
                }
                out
            }
            SequenceMode::Delta => {
                let mut out = vec![0.0; d];
                if half > 0 {
                    let window: Vec<usize> = window_rows(i).collect();
                    let h = half as usize;
                    for &w in &window[len - h..] {
                        for (o, v) in out.iter_mut().zip(m.row(w)) {
                            *o += v / h as f64;
                        }
                    }
                    for &w in &window[..h] {
                        for (o, v) in out.iter_mut().zip(m.row(w)) {
                            *o -= v / h as f64;
                        }
                    }
                    let length = norm(&out);
                    if length > 0.0 {
                        for o in &mut out {
                            *o /= length;
                        }
                    }
                }
                out
            }
        };
        rows.push(row);
    }
    let out = DescriptorMatrix::from_rows(&rows)?;
    match m.labels() {
        Some(labels) => out.with_labels(labels.to_vec()),
        None => Ok(out),
    }
}

/// Renders a similarity matrix as a grayscale image by affine min-max
/// mapping; excluded cells map to black.
pub fn to_heatmap(s: &SimilarityMatrix) -> GrayImage {
    let finite: Vec<f64> = s
        .values()
        .iter()
        .copied()
        .filter(|v| *v != EXCLUDED_SIMILARITY)
        .collect();
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let data: Vec<f64> = s
        .values()
        .iter()
        .map(|v| {
            if *v == EXCLUDED_SIMILARITY || span <= 0.0 || !span.is_finite() {
                0.0
            } else {
                (v - min) / span
            }
        })
        .collect();
    GrayImage::new(s.rows(), s.cols(), data).expect("heatmap values are in range by construction")
}
