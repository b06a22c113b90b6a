//! vprkit — visual place recognition pipelines and their evaluation.
//!
//! The crate covers the full batch pipeline: descriptor extraction from
//! grayscale images, descriptor post-processing (standardization,
//! dimensionality reduction), dense similarity matrices, matching decisions,
//! and retrieval metrics (precision-recall curves, AUPRC, recall at a
//! precision level, recall@K). A synthetic trajectory generator produces
//! worlds and traverses with exact ground truth for controlled experiments.
//!
//! ```
//! use vprkit::data::{build_ground_truth, DescriptorMatrix, MatchMode};
//! use vprkit::evaluation::{pr_curve, recall_at_precision};
//! use vprkit::similarity::{similarity_matrix, Metric};
//!
//! let db = DescriptorMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
//! let q = DescriptorMatrix::new(2, 2, vec![1.0, 0.1, 0.2, 1.0]).unwrap();
//! let s = similarity_matrix(&db, &q, Metric::Cosine).unwrap();
//! let gt = build_ground_truth(&[(0, 0), (1, 1)], (2, 2), (0, 0)).unwrap();
//! let curve = pr_curve(&s, &gt, MatchMode::MultiMatch).unwrap();
//! // both true matches rank above every false one
//! assert_eq!(recall_at_precision(&curve, 1.0), Some(1.0));
//! ```

pub mod data;
pub mod descriptors;
mod error;
pub mod evaluation;
pub mod io;
pub mod matching;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
