//! Evaluation of matching decisions and similarity matrices against ground
//! truth: confusion counting, precision-recall curves, AUPRC, recall at a
//! precision level, recall@K, and cross-dataset aggregation.
//!
//! Cells that are soft-true but not hard-true count as neither true nor
//! false positives; they are ignored throughout. True negatives are never
//! reported: the matching problem is far too imbalanced for them to carry
//! information.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{GroundTruth, MatchMatrix, MatchMode, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::similarity::{knn_topk, EXCLUDED_SIMILARITY};

/// Confusion counts for one set of matching decisions.
///
/// `false_negatives` is always `ground_truth_positives - true_positives`;
/// the number of ground-truth positives depends on the output mode: the
/// number of query columns with at least one hard-true cell for single-best
/// matching, the number of hard-true cells for multi-matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    #[serde(rename = "gtp")]
    pub ground_truth_positives: usize,
    #[serde(skip)]
    pub mode: MatchMode,
}

impl ConfusionCounts {
    pub fn precision(&self) -> f64 {
        if self.true_positives + self.false_positives == 0 {
            1.0
        } else {
            self.true_positives as f64 / (self.true_positives + self.false_positives) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        self.true_positives as f64 / self.ground_truth_positives as f64
    }
}

fn check_shapes(rows: usize, cols: usize, gt: &GroundTruth) -> Result<()> {
    if gt.rows() != rows || gt.cols() != cols {
        return Err(Error::Shape(format!(
            "ground truth is {}x{}, expected {}x{}",
            gt.rows(),
            gt.cols(),
            rows,
            cols
        )));
    }
    Ok(())
}

fn ground_truth_positives(gt: &GroundTruth, mode: MatchMode) -> usize {
    match mode {
        MatchMode::SingleBest => (0..gt.cols())
            .filter(|&col| (0..gt.rows()).any(|row| gt.gt(row, col)))
            .count(),
        MatchMode::MultiMatch => gt.gt_values().iter().filter(|v| **v).count(),
    }
}

/// Counts true and false positives of `m` against the ground truth. Matched
/// cells that are soft-true but not hard-true are ignored.
pub fn confusion_counts(
    m: &MatchMatrix,
    gt: &GroundTruth,
    mode: MatchMode,
) -> Result<ConfusionCounts> {
    check_shapes(m.rows(), m.cols(), gt)?;
    if mode == MatchMode::SingleBest {
        for col in 0..m.cols() {
            let matches = (0..m.rows()).filter(|&row| m.get(row, col)).count();
            if matches > 1 {
                return Err(Error::Param(format!(
                    "column {col} has {matches} matches; single-best mode allows at most one"
                )));
            }
        }
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    for row in 0..m.rows() {
        for col in 0..m.cols() {
            if !m.get(row, col) {
                continue;
            }
            if gt.gt(row, col) {
                tp += 1;
            } else if !gt.soft(row, col) {
                fp += 1;
            }
        }
    }
    let gtp = ground_truth_positives(gt, mode);
    Ok(ConfusionCounts {
        true_positives: tp,
        false_positives: fp,
        false_negatives: gtp - tp,
        ground_truth_positives: gtp,
        mode,
    })
}

/// A precision-recall curve, one point per threshold, thresholds descending.
/// Recall is nondecreasing along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub thetas: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.recall.iter().copied().zip(self.precision.iter().copied())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum CellKind {
    Hit,
    Miss,
    Ignored,
}

/// The cells that can ever be matched, with their ground-truth class:
/// every non-excluded cell in multi-match mode, the per-column best cell in
/// single-best mode.
fn eligible_cells(s: &SimilarityMatrix, gt: &GroundTruth, mode: MatchMode) -> Vec<(f64, CellKind)> {
    let classify = |row: usize, col: usize| {
        if gt.gt(row, col) {
            CellKind::Hit
        } else if gt.soft(row, col) {
            CellKind::Ignored
        } else {
            CellKind::Miss
        }
    };
    let mut cells = Vec::new();
    match mode {
        MatchMode::MultiMatch => {
            for row in 0..s.rows() {
                for col in 0..s.cols() {
                    let value = s.get(row, col);
                    if value != EXCLUDED_SIMILARITY {
                        cells.push((value, classify(row, col)));
                    }
                }
            }
        }
        MatchMode::SingleBest => {
            for col in 0..s.cols() {
                let mut best: Option<(usize, f64)> = None;
                for row in 0..s.rows() {
                    let value = s.get(row, col);
                    if value == EXCLUDED_SIMILARITY {
                        continue;
                    }
                    if best.map(|(_, b)| value > b).unwrap_or(true) {
                        best = Some((row, value));
                    }
                }
                if let Some((row, value)) = best {
                    cells.push((value, classify(row, col)));
                }
            }
        }
    }
    cells
}

/// At most this many thresholds are evaluated; beyond it the unique values
/// are quantile-subsampled (the extremes are always kept).
const MAX_THRESHOLDS: usize = 1000;

/// Sweeps thresholds over the similarity values and reports precision and
/// recall per threshold.
///
/// The threshold grid is the descending unique values of the matchable
/// cells. In single-best mode only the best cell of each column is
/// thresholded; in multi-match mode every cell is. Thresholds where nothing
/// is matched yet define precision 1.
pub fn pr_curve(s: &SimilarityMatrix, gt: &GroundTruth, mode: MatchMode) -> Result<PrCurve> {
    check_shapes(s.rows(), s.cols(), gt)?;
    let gtp = ground_truth_positives(gt, mode);
    if gtp == 0 {
        return Err(Error::NoGroundTruthPositives);
    }

    let mut cells = eligible_cells(s, gt, mode);
    // descending by value; the class order within equal values is irrelevant
    // because a threshold always takes whole tie groups
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("similarities are never NaN"));

    let mut thetas: Vec<f64> = Vec::new();
    for (value, _) in &cells {
        if thetas.last() != Some(value) {
            thetas.push(*value);
        }
    }
    if thetas.len() > MAX_THRESHOLDS {
        let last = thetas.len() - 1;
        let picked: Vec<f64> = (0..MAX_THRESHOLDS)
            .map(|i| {
                // rounded quantile positions over the unique values,
                // always including both extremes
                let idx = (i as f64 * last as f64 / (MAX_THRESHOLDS - 1) as f64).round() as usize;
                thetas[idx]
            })
            .collect();
        thetas = picked;
        thetas.dedup();
    }

    let mut precision = Vec::with_capacity(thetas.len());
    let mut recall = Vec::with_capacity(thetas.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut next = 0usize;
    for theta in &thetas {
        while next < cells.len() && cells[next].0 >= *theta {
            match cells[next].1 {
                CellKind::Hit => tp += 1,
                CellKind::Miss => fp += 1,
                CellKind::Ignored => {}
            }
            next += 1;
        }
        precision.push(if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        });
        recall.push(tp as f64 / gtp as f64);
    }

    Ok(PrCurve {
        thetas,
        precision,
        recall,
    })
}

/// Area under the precision-recall curve by trapezoidal integration over the
/// achieved recall range. Points sharing a recall value contribute no width.
pub fn auprc(curve: &PrCurve) -> f64 {
    let mut points: Vec<(f64, f64)> = curve.points().collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("recall is never NaN"));
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (r0, p0) = pair[0];
        let (r1, p1) = pair[1];
        area += (r1 - r0) * (p0 + p1) / 2.0;
    }
    area
}

/// Maximum recall among curve points with precision at least `p_level`, or
/// `None` when no point qualifies. `p_level` must lie in `(0, 1]`.
pub fn recall_at_precision(curve: &PrCurve, p_level: f64) -> Option<f64> {
    assert!(
        p_level > 0.0 && p_level <= 1.0,
        "precision level {p_level} outside (0, 1]"
    );
    curve
        .points()
        .filter(|(_, p)| *p >= p_level)
        .map(|(r, _)| r)
        .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
}

/// Result of a recall@K computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallAtK {
    pub recall: f64,
    /// Query columns that had a ground-truth match and were evaluated.
    pub counted: usize,
    /// Of those, the columns whose top-K retrieval contained a true match.
    pub successes: usize,
    /// Query columns without any ground-truth match, skipped on request.
    pub skipped: usize,
}

/// Fraction of query columns whose K highest-similarity rows contain a
/// hard-true match. Columns without any true match are an error unless
/// `skip_unmatched` is set, in which case they are skipped and counted.
pub fn recall_at_k(
    s: &SimilarityMatrix,
    gt: &GroundTruth,
    k: usize,
    skip_unmatched: bool,
) -> Result<RecallAtK> {
    check_shapes(s.rows(), s.cols(), gt)?;
    let top = knn_topk(s, k)?;
    let mut counted = 0usize;
    let mut successes = 0usize;
    let mut skipped = 0usize;
    for col in 0..s.cols() {
        let has_match = (0..s.rows()).any(|row| gt.gt(row, col));
        if !has_match {
            if skip_unmatched {
                skipped += 1;
                continue;
            }
            return Err(Error::UnmatchedQuery { col });
        }
        counted += 1;
        if top.columns[col].iter().any(|n| gt.gt(n.row, col)) {
            successes += 1;
        }
    }
    if counted == 0 {
        return Err(Error::NoGroundTruthPositives);
    }
    Ok(RecallAtK {
        recall: successes as f64 / counted as f64,
        counted,
        successes,
        skipped,
    })
}

/// Mean, best, and worst of the defined values of one metric across runs.
/// All-undefined metrics aggregate to `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub best: Option<f64>,
    pub worst: Option<f64>,
    pub undefined_count: usize,
}

/// Aggregates one metric over runs; undefined values are excluded and
/// counted separately.
pub fn aggregate_values(values: &[Option<f64>]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Param("cannot aggregate an empty run list".into()));
    }
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let undefined_count = values.len() - defined.len();
    if defined.is_empty() {
        return Ok(Aggregate {
            mean: None,
            best: None,
            worst: None,
            undefined_count,
        });
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let best = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = defined.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Aggregate {
        mean: Some(mean),
        best: Some(best),
        worst: Some(worst),
        undefined_count,
    })
}

/// Per-dataset metric record, also the JSON report schema of the command
/// line tools. Undefined metrics serialize as `null`.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub dataset: String,
    pub mode: String,
    pub auprc: f64,
    /// Maximum recall at a precision level, keyed by the level ("1.0",
    /// "0.99", "0.95").
    pub r_at_p: BTreeMap<String, Option<f64>>,
    /// Recall@K keyed by K.
    pub recall_at_k: BTreeMap<String, Option<f64>>,
    pub counts: ConfusionCounts,
    pub skipped: usize,
}

/// Mean/best/worst across a list of reports, keyed by metric name.
pub fn aggregate_reports(reports: &[MetricReport]) -> Result<BTreeMap<String, Aggregate>> {
    if reports.is_empty() {
        return Err(Error::Param("cannot aggregate an empty run list".into()));
    }
    let mut out = BTreeMap::new();
    out.insert(
        "auprc".to_string(),
        aggregate_values(&reports.iter().map(|r| Some(r.auprc)).collect::<Vec<_>>())?,
    );
    let mut keys: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.r_at_p
                .keys()
                .map(|k| format!("r_at_p/{k}"))
                .chain(r.recall_at_k.keys().map(|k| format!("recall_at_k/{k}")))
        })
        .collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let values: Vec<Option<f64>> = reports
            .iter()
            .map(|r| {
                let (map, name) = match key.split_once('/') {
                    Some(("r_at_p", name)) => (&r.r_at_p, name),
                    Some(("recall_at_k", name)) => (&r.recall_at_k, name),
                    _ => unreachable!(),
                };
                map.get(name).copied().flatten()
            })
            .collect();
        out.insert(key, aggregate_values(&values)?);
    }
    Ok(out)
}

/// The curve as CSV text, `theta,precision,recall` per line with
/// 17-significant-digit floats, enough to reproduce every value exactly.
pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut out = String::from("theta,precision,recall\n");
    for ((theta, p), r) in curve
        .thetas
        .iter()
        .zip(&curve.precision)
        .zip(&curve.recall)
    {
        out.push_str(&format!("{theta:.16e},{p:.16e},{r:.16e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_ground_truth, MetricTag};

    fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> SimilarityMatrix {
        SimilarityMatrix::new(rows, cols, values, MetricTag::External).unwrap()
    }

    fn identity_gt(n: usize) -> GroundTruth {
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        build_ground_truth(&pairs, (n, n), (0, 0)).unwrap()
    }

    fn bool_matrix(rows: usize, cols: usize, cells: &[(usize, usize)]) -> MatchMatrix {
        let mut values = vec![false; rows * cols];
        for (r, c) in cells {
            values[r * cols + c] = true;
        }
        MatchMatrix::new(rows, cols, values, MatchMode::MultiMatch).unwrap()
    }

    #[test]
    fn hand_counted_confusion() {
        // M = [[1,0],[1,1]] against identity ground truth
        let m = bool_matrix(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        let gt = identity_gt(2);
        let c = confusion_counts(&m, &gt, MatchMode::MultiMatch).unwrap();
        assert_eq!(
            (c.true_positives, c.false_positives, c.ground_truth_positives),
            (2, 1, 2)
        );
        assert!((c.precision() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.recall(), 1.0);
        assert_eq!(c.false_negatives, 0);
    }

    #[test]
    fn soft_cells_are_ignored() {
        let m = bool_matrix(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        let gt = GroundTruth::new(
            2,
            2,
            vec![true, false, false, true],
            vec![true, false, true, true],
        )
        .unwrap();
        let c = confusion_counts(&m, &gt, MatchMode::MultiMatch).unwrap();
        assert_eq!((c.true_positives, c.false_positives), (2, 0));
        assert_eq!(c.precision(), 1.0);
    }

    #[test]
    fn perfect_matcher_has_unit_precision_and_recall() {
        let gt = identity_gt(3);
        let m = bool_matrix(3, 3, &gt.true_pairs());
        let c = confusion_counts(&m, &gt, MatchMode::MultiMatch).unwrap();
        assert_eq!(c.false_positives, 0);
        assert_eq!(c.true_positives, c.ground_truth_positives);
        assert_eq!((c.precision(), c.recall()), (1.0, 1.0));
    }

    #[test]
    fn exhaustive_three_by_three_oracle() {
        // every boolean 3x3 M against every boolean 3x3 gt (gt_soft = gt),
        // compared against a cell-by-cell reimplementation
        for gt_bits in 0u32..512 {
            let gt_cells: Vec<bool> = (0..9).map(|i| gt_bits >> i & 1 == 1).collect();
            let gt = GroundTruth::new(3, 3, gt_cells.clone(), gt_cells.clone()).unwrap();
            let gtp_multi = gt_cells.iter().filter(|v| **v).count();
            let gtp_single = (0..3)
                .filter(|col| (0..3).any(|row| gt_cells[row * 3 + col]))
                .count();
            for m_bits in 0u32..512 {
                let m_cells: Vec<bool> = (0..9).map(|i| m_bits >> i & 1 == 1).collect();
                let m =
                    MatchMatrix::new(3, 3, m_cells.clone(), MatchMode::MultiMatch).unwrap();
                let mut tp = 0;
                let mut fp = 0;
                for i in 0..9 {
                    if m_cells[i] && gt_cells[i] {
                        tp += 1;
                    }
                    if m_cells[i] && !gt_cells[i] {
                        fp += 1;
                    }
                }
                let c = confusion_counts(&m, &gt, MatchMode::MultiMatch).unwrap();
                assert_eq!((c.true_positives, c.false_positives), (tp, fp));
                assert_eq!(c.ground_truth_positives, gtp_multi);
                assert_eq!(c.false_negatives, gtp_multi - tp);
            }
            assert_eq!(
                ground_truth_positives(&gt, MatchMode::SingleBest),
                gtp_single
            );
        }
    }

    #[test]
    fn single_best_mode_rejects_multi_matched_columns() {
        let m = bool_matrix(2, 2, &[(0, 0), (1, 0)]);
        let gt = identity_gt(2);
        assert!(confusion_counts(&m, &gt, MatchMode::SingleBest).is_err());
    }

    fn hand_matrix() -> (SimilarityMatrix, GroundTruth) {
        (matrix(2, 2, vec![0.9, 0.1, 0.2, 0.8]), identity_gt(2))
    }

    #[test]
    fn hand_curve_reproduces_the_threshold_sweep() {
        let (s, gt) = hand_matrix();
        let curve = pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap();
        assert_eq!(curve.thetas, vec![0.9, 0.8, 0.2, 0.1]);
        let points: Vec<(f64, f64)> = curve.points().collect();
        assert_eq!(points[0], (0.5, 1.0));
        assert_eq!(points[1], (1.0, 1.0));
        assert!((points[2].1 - 2.0 / 3.0).abs() < 1e-15 && points[2].0 == 1.0);
        assert_eq!(points[3], (1.0, 0.5));
        assert_eq!(auprc(&curve), 0.5);
    }

    #[test]
    fn separable_values_keep_precision_one_until_full_recall() {
        let s = matrix(3, 3, vec![
            0.9, 0.2, 0.1, //
            0.15, 0.8, 0.25, //
            0.05, 0.3, 0.95,
        ]);
        let gt = identity_gt(3);
        let curve = pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap();
        for (r, p) in curve.points() {
            if r < 1.0 {
                assert_eq!(p, 1.0);
            }
        }
        let full = curve.points().find(|(r, _)| *r == 1.0).unwrap();
        assert_eq!(full.1, 1.0);
    }

    #[test]
    fn curve_with_unit_precision_over_full_recall_has_unit_area() {
        let curve = PrCurve {
            thetas: vec![3.0, 2.0, 1.0],
            precision: vec![1.0, 1.0, 1.0],
            recall: vec![0.0, 0.5, 1.0],
        };
        assert_eq!(auprc(&curve), 1.0);
    }

    #[test]
    fn pr_curve_needs_ground_truth_positives() {
        let s = matrix(2, 2, vec![0.9, 0.1, 0.2, 0.8]);
        let gt = GroundTruth::new(2, 2, vec![false; 4], vec![false; 4]).unwrap();
        assert!(matches!(
            pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap_err(),
            Error::NoGroundTruthPositives
        ));
    }

    #[test]
    fn recall_at_precision_on_the_hand_curve() {
        let (s, gt) = hand_matrix();
        let curve = pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap();
        assert_eq!(recall_at_precision(&curve, 1.0), Some(1.0));
        assert_eq!(recall_at_precision(&curve, 0.6), Some(1.0));
    }

    #[test]
    fn recall_at_precision_is_undefined_when_never_reached() {
        let curve = PrCurve {
            thetas: vec![1.0, 0.5],
            precision: vec![0.9, 0.6],
            recall: vec![0.4, 1.0],
        };
        assert_eq!(recall_at_precision(&curve, 1.0), None);
    }

    #[test]
    #[should_panic(expected = "outside (0, 1]")]
    fn recall_at_precision_rejects_zero_level() {
        let curve = PrCurve {
            thetas: vec![1.0],
            precision: vec![1.0],
            recall: vec![1.0],
        };
        recall_at_precision(&curve, 0.0);
    }

    #[test]
    fn recall_at_one_on_the_hand_matrix() {
        let (s, gt) = hand_matrix();
        let r = recall_at_k(&s, &gt, 1, false).unwrap();
        assert_eq!(r.recall, 1.0);
        assert_eq!((r.counted, r.skipped), (2, 0));
    }

    #[test]
    fn unmatched_queries_are_skipped_or_rejected() {
        let s = matrix(2, 2, vec![0.9, 0.1, 0.2, 0.8]);
        let gt = build_ground_truth(&[(0, 0)], (2, 2), (0, 0)).unwrap();
        let err = recall_at_k(&s, &gt, 1, false).unwrap_err();
        assert!(matches!(err, Error::UnmatchedQuery { col: 1 }));
        let r = recall_at_k(&s, &gt, 1, true).unwrap();
        assert_eq!((r.counted, r.skipped), (1, 1));
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn enlarging_the_soft_ground_truth_never_hurts() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(314);
        for _ in 0..60 {
            let rows = rng.random_range(2..8usize);
            let cols = rng.random_range(2..8usize);
            let values: Vec<f64> = (0..rows * cols).map(|_| rng.random()).collect();
            let s = matrix(rows, cols, values);
            let pairs: Vec<(usize, usize)> = (0..rows)
                .flat_map(|r| (0..cols).map(move |c| (r, c)))
                .filter(|_| rng.random::<f64>() < 0.3)
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let narrow = build_ground_truth(&pairs, (rows, cols), (0, 0)).unwrap();
            let wide = build_ground_truth(&pairs, (rows, cols), (1, 1)).unwrap();
            let a = pr_curve(&s, &narrow, MatchMode::MultiMatch).unwrap();
            let b = pr_curve(&s, &wide, MatchMode::MultiMatch).unwrap();
            assert_eq!(a.thetas, b.thetas);
            assert_eq!(a.recall, b.recall, "recall depends only on hard cells");
            for (pa, pb) in a.precision.iter().zip(&b.precision) {
                assert!(pb >= pa, "ignoring more cells cannot lower precision");
            }
        }
    }

    #[test]
    fn aggregate_mean_best_worst() {
        let agg = aggregate_values(&[Some(0.6), Some(0.8), Some(1.0)]).unwrap();
        assert!((agg.mean.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(agg.best, Some(1.0));
        assert_eq!(agg.worst, Some(0.6));
        assert_eq!(agg.undefined_count, 0);

        let single = aggregate_values(&[Some(0.3)]).unwrap();
        assert_eq!((single.mean, single.best, single.worst), (Some(0.3), Some(0.3), Some(0.3)));

        let with_undefined = aggregate_values(&[Some(0.7), None]).unwrap();
        assert_eq!(with_undefined.mean, Some(0.7));
        assert_eq!(with_undefined.undefined_count, 1);

        let all_undefined = aggregate_values(&[None, None]).unwrap();
        assert_eq!(all_undefined.mean, None);
        assert_eq!(all_undefined.undefined_count, 2);

        assert!(aggregate_values(&[]).is_err());
    }

    #[test]
    fn csv_round_trips_through_parse() {
        let (s, gt) = hand_matrix();
        let curve = pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap();
        let csv = pr_curve_csv(&curve);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("theta,precision,recall"));
        for (line, i) in lines.zip(0..) {
            let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields[0], curve.thetas[i]);
            assert_eq!(fields[1], curve.precision[i]);
            assert_eq!(fields[2], curve.recall[i]);
        }
    }
}
