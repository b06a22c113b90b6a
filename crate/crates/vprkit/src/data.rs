//! Core data model: images, descriptor matrices, local feature sets,
//! similarity and match matrices, ground truth, and dataset bundles.
//!
//! All types are immutable after construction and safe to share across
//! threads.

use crate::error::{Error, Result};

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Param("image dimensions must be at least 1x1".into()));
        }
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "pixel buffer has {} values, expected {}x{} = {}",
                data.len(),
                height,
                width,
                height * width
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Param(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Intensity at row `y`, column `x`.
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// N x D matrix of holistic descriptors, one row per image, with optional
/// per-row condition labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl DescriptorMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Param("descriptor dimension must be at least 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::Shape(format!(
                "descriptor buffer has {} values, expected {}x{} = {}",
                values.len(),
                n,
                d,
                n * d
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("descriptors must be finite (no NaN/Inf)".into()));
        }
        Ok(Self {
            n,
            d,
            values,
            labels: None,
        })
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Shape(format!(
                "{} labels for {} descriptor rows",
                labels.len(),
                self.n
            )));
        }
        Ok(Self {
            labels: Some(labels),
            ..self
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::Dim {
                    expected: d,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }
}

/// Per-image set of local descriptors with their pixel coordinates.
///
/// `coords` holds `(x, y)` patch centers; `vectors` is `k` rows of dimension
/// `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeatureSet {
    d: usize,
    vectors: Vec<f64>,
    coords: Vec<(u32, u32)>,
}

impl LocalFeatureSet {
    pub fn new(d: usize, vectors: Vec<f64>, coords: Vec<(u32, u32)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Param("local feature dimension must be at least 1".into()));
        }
        if vectors.len() != coords.len() * d {
            return Err(Error::Shape(format!(
                "{} vector values for {} coordinates of dimension {}",
                vectors.len(),
                coords.len(),
                d
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("local features must be finite".into()));
        }
        Ok(Self {
            d,
            vectors,
            coords,
        })
    }

    pub fn k(&self) -> usize {
        self.coords.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[(u32, u32)] {
        &self.coords
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.d)
    }
}

/// How the values of a [`SimilarityMatrix`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricTag {
    Cosine,
    NegEuclidean,
    /// Post-processed values (sequence refinement, re-ranking, masking);
    /// may contain [`crate::similarity::EXCLUDED_SIMILARITY`] sentinels.
    Refined,
    /// Loaded from a file produced elsewhere.
    External,
}

impl MetricTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricTag::Cosine => "cosine",
            MetricTag::NegEuclidean => "neg_euclidean",
            MetricTag::Refined => "refined",
            MetricTag::External => "external",
        }
    }
}

/// Dense pairwise similarity matrix, rows indexing the database set and
/// columns the query set.
///
/// Values are never NaN. Cells may carry the negative-infinity exclusion
/// sentinel after masking or re-ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    metric: MetricTag,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, metric: MetricTag) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Param("similarity matrix must be at least 1x1".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "similarity buffer has {} values, expected {}x{}",
                values.len(),
                rows,
                cols
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Param("similarities must not be NaN or +inf".into()));
        }
        Ok(Self {
            rows,
            cols,
            values,
            metric,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> MetricTag {
        self.metric
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row_slice(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }
}

/// Requested output category: one best database image per query, or every
/// database image above a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    SingleBest,
    MultiMatch,
}

impl MatchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatchMode::SingleBest => "single-best",
            MatchMode::MultiMatch => "multi-match",
        }
    }
}

/// Boolean matching decisions, same shape and orientation as the similarity
/// matrix they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMatrix {
    rows: usize,
    cols: usize,
    values: Vec<bool>,
    mode: MatchMode,
}

impl MatchMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<bool>, mode: MatchMode) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Param("match matrix must be at least 1x1".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "match buffer has {} values, expected {}x{}",
                values.len(),
                rows,
                cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            mode,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.cols + col]
    }

    /// All `(row, col)` pairs that were matched, row-major order.
    pub fn matched_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                if self.get(row, col) {
                    pairs.push((row, col));
                }
            }
        }
        pairs
    }

    pub fn count_matches(&self) -> usize {
        self.values.iter().filter(|m| **m).count()
    }
}

/// Hard and soft ground truth of the same shape.
///
/// By construction via [`build_ground_truth`] every hard-true cell is also
/// soft-true; matrices assembled from raw parts are only checked for shape,
/// containment violations are reported by [`validate_bundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    rows: usize,
    cols: usize,
    gt: Vec<bool>,
    gt_soft: Vec<bool>,
}

impl GroundTruth {
    pub fn new(rows: usize, cols: usize, gt: Vec<bool>, gt_soft: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Param("ground truth must be at least 1x1".into()));
        }
        if gt.len() != rows * cols || gt_soft.len() != rows * cols {
            return Err(Error::Shape(format!(
                "ground-truth buffers have {} and {} values, expected {}x{}",
                gt.len(),
                gt_soft.len(),
                rows,
                cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            gt,
            gt_soft,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gt(&self, row: usize, col: usize) -> bool {
        self.gt[row * self.cols + col]
    }

    pub fn soft(&self, row: usize, col: usize) -> bool {
        self.gt_soft[row * self.cols + col]
    }

    pub fn gt_values(&self) -> &[bool] {
        &self.gt
    }

    pub fn soft_values(&self) -> &[bool] {
        &self.gt_soft
    }

    /// `(row, col)` pairs of hard-true cells, row-major order.
    pub fn true_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for row in 0..self.rows {
            for col in 0..self.cols {
                if self.gt(row, col) {
                    pairs.push((row, col));
                }
            }
        }
        pairs
    }
}

/// Box dilation of a boolean mask by `(radius_rows, radius_cols)`, clipped at
/// the borders.
fn dilate(mask: &[bool], rows: usize, cols: usize, radius: (usize, usize)) -> Vec<bool> {
    let (rr, rc) = radius;
    let mut out = vec![false; rows * cols];
    for row in 0..rows {
        for col in 0..cols {
            if !mask[row * cols + col] {
                continue;
            }
            let r0 = row.saturating_sub(rr);
            let r1 = (row + rr).min(rows - 1);
            let c0 = col.saturating_sub(rc);
            let c1 = (col + rc).min(cols - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    out[r * cols + c] = true;
                }
            }
        }
    }
    out
}

/// Builds hard ground truth from `(row, col)` pairs, and soft ground truth as
/// the box dilation of the hard matrix by `soft_radius`.
pub fn build_ground_truth(
    pairs: &[(usize, usize)],
    shape: (usize, usize),
    soft_radius: (usize, usize),
) -> Result<GroundTruth> {
    let (rows, cols) = shape;
    if rows == 0 || cols == 0 {
        return Err(Error::Param("ground truth shape must be at least 1x1".into()));
    }
    let mut gt = vec![false; rows * cols];
    for &(row, col) in pairs {
        if row >= rows || col >= cols {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows,
                cols,
            });
        }
        gt[row * cols + col] = true;
    }
    let gt_soft = dilate(&gt, rows, cols, soft_radius);
    GroundTruth::new(rows, cols, gt, gt_soft)
}

/// A set of input images or their precomputed descriptors.
#[derive(Debug, Clone)]
pub enum ImageSet {
    Images(Vec<GrayImage>),
    Descriptors(DescriptorMatrix),
}

impl ImageSet {
    pub fn len(&self) -> usize {
        match self {
            ImageSet::Images(images) => images.len(),
            ImageSet::Descriptors(m) => m.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    /// One set compared against itself; the database side is absent.
    Single,
    /// Two disjoint sets, database versus query.
    Multi,
}

impl SessionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionMode::Single => "single",
            SessionMode::Multi => "multi",
        }
    }
}

/// Everything one run operates on: the input sets, optional ground truth, and
/// the session mode.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub db: Option<ImageSet>,
    pub q: ImageSet,
    pub ground_truth: Option<GroundTruth>,
    pub session: SessionMode,
}

/// A single violated invariant found by [`validate_bundle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// Checks a bundle against the data-model invariants and returns every
/// violation found. An empty report means the bundle is consistent.
pub fn validate_bundle(bundle: &DatasetBundle) -> Vec<Violation> {
    let mut report = Vec::new();

    match bundle.session {
        SessionMode::Single => {
            if bundle.db.is_some() {
                report.push(Violation {
                    code: "session-db",
                    detail: "single-session bundles must not carry a database set".into(),
                });
            }
        }
        SessionMode::Multi => {
            if bundle.db.is_none() {
                report.push(Violation {
                    code: "session-db",
                    detail: "multi-session bundles require a database set".into(),
                });
            }
        }
    }

    let expected_rows = bundle.db.as_ref().map(|db| db.len()).unwrap_or(bundle.q.len());
    let expected_cols = bundle.q.len();

    let mut check_set = |name: &str, set: &ImageSet| {
        if let ImageSet::Descriptors(m) = set {
            // DescriptorMatrix construction already rejects NaN, but loaders
            // may be bypassed; keep the diagnostic anyway.
            if m.values().iter().any(|v| !v.is_finite()) {
                report.push(Violation {
                    code: "non-finite",
                    detail: format!("{name} descriptors contain NaN or Inf"),
                });
            }
            if let Some(labels) = m.labels() {
                if labels.len() != m.n() {
                    report.push(Violation {
                        code: "label-length",
                        detail: format!(
                            "{name} has {} labels for {} rows",
                            labels.len(),
                            m.n()
                        ),
                    });
                }
            }
        }
    };
    if let Some(db) = &bundle.db {
        check_set("database", db);
    }
    check_set("query", &bundle.q);

    if let (Some(ImageSet::Descriptors(db)), ImageSet::Descriptors(q)) =
        (&bundle.db, &bundle.q)
    {
        if db.d() != q.d() {
            report.push(Violation {
                code: "dim-mismatch",
                detail: format!(
                    "database dimension {} differs from query dimension {}",
                    db.d(),
                    q.d()
                ),
            });
        }
    }

    if let Some(gt) = &bundle.ground_truth {
        if gt.rows() != expected_rows || gt.cols() != expected_cols {
            report.push(Violation {
                code: "gt-shape",
                detail: format!(
                    "ground truth is {}x{}, expected {}x{}",
                    gt.rows(),
                    gt.cols(),
                    expected_rows,
                    expected_cols
                ),
            });
        }
        let contained = gt
            .gt_values()
            .iter()
            .zip(gt.soft_values())
            .all(|(hard, soft)| !*hard || *soft);
        if !contained {
            report.push(Violation {
                code: "soft-containment",
                detail: "hard ground truth is not contained in the soft ground truth".into(),
            });
        }
    }

    report
}
