//! Stage orchestration: input loading, descriptor processing, similarity,
//! matching, evaluation, and the artifact files each command writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use vprkit::data::{
    DescriptorMatrix, GroundTruth, LocalFeatureSet, MatchMatrix, MatchMode, SimilarityMatrix,
};
use vprkit::descriptors::{
    aggregate_bovw, aggregate_vlad, cluster_standardize, extract_local_grid,
    holistic_patchnorm_batch, kmeans_fit, save_codebook, standardize_apply, standardize_fit,
    standardize_per_set, Codebook,
};
use vprkit::evaluation::{
    auprc, confusion_counts, pr_curve, pr_curve_csv, recall_at_k, recall_at_precision,
    MetricReport, PrCurve,
};
use vprkit::io;
use vprkit::matching::{apply_exclusion, auto_threshold, best_match_per_query, threshold_match};
use vprkit::similarity::{
    knn_topk, rerank_topk, seq_refine, sequence_descriptors, similarity_matrix, to_heatmap,
};
use vprkit::synth::{derive_gt, generate_traverse, generate_world, TraverseScript, WorldConfig};

use crate::config::{
    DatasetKind, DescriptorMethod, RunConfig, StandardizeSpec, ThresholdSpec,
};
use crate::svg;

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| anyhow!("stage {name}: {e:#}"))
}

/// Guards an output directory against concurrent runs; the lock file is
/// removed when the guard drops.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out_dir: &Path) -> Result<OutputLock> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create {}", out_dir.display()))?;
        let path = out_dir.join(".vprkit.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(anyhow!(
                "output directory {} is locked by another run (remove {} if stale)",
                out_dir.display(),
                path.display()
            )),
            Err(e) => Err(e).with_context(|| format!("cannot lock {}", out_dir.display())),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Everything the input stage produces: raw descriptors, optional local
/// features (for re-ranking), optional ground truth, and synthetic metadata.
pub struct Bundle {
    pub db: DescriptorMatrix,
    pub q: DescriptorMatrix,
    pub db_local: Option<Vec<LocalFeatureSet>>,
    pub q_local: Option<Vec<LocalFeatureSet>>,
    pub ground_truth: Option<GroundTruth>,
    pub db_place_ids: Option<Vec<Option<usize>>>,
    pub q_place_ids: Option<Vec<Option<usize>>>,
    pub codebook: Option<Codebook>,
}

fn load_images(dir: &Path) -> Result<Vec<vprkit::data::GrayImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm images in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| io::load_pgm(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn extract_locals(
    images: &[vprkit::data::GrayImage],
    cfg: &RunConfig,
) -> Result<Vec<LocalFeatureSet>> {
    let d = &cfg.descriptor;
    images
        .iter()
        .map(|img| extract_local_grid(img, d.local_stride, d.local_patch, d.local_dim))
        .collect::<vprkit::Result<_>>()
        .map_err(Into::into)
}

fn image_descriptors(
    images: &[vprkit::data::GrayImage],
    locals: Option<&[LocalFeatureSet]>,
    cfg: &RunConfig,
    codebook: Option<&Codebook>,
) -> Result<DescriptorMatrix> {
    let d = &cfg.descriptor;
    match d.method {
        DescriptorMethod::Patchnorm => {
            Ok(holistic_patchnorm_batch(images, d.grid_rows, d.grid_cols, d.patch)?)
        }
        DescriptorMethod::Bovw | DescriptorMethod::Vlad => {
            let cb = codebook.expect("codebook is built before aggregation");
            let locals = locals.expect("local features are extracted before aggregation");
            let rows: Vec<Vec<f64>> = locals
                .iter()
                .map(|set| match d.method {
                    DescriptorMethod::Bovw => aggregate_bovw(set, cb),
                    _ => aggregate_vlad(set, cb),
                })
                .collect::<vprkit::Result<_>>()?;
            Ok(DescriptorMatrix::from_rows(&rows)?)
        }
        DescriptorMethod::Import => bail!("image datasets cannot use descriptor method 'import'"),
    }
}

/// Pools all local features of a set into one matrix for codebook training.
fn pool_features(sets: &[LocalFeatureSet]) -> Result<DescriptorMatrix> {
    let rows: Vec<Vec<f64>> = sets
        .iter()
        .flat_map(|s| s.vectors().map(|v| v.to_vec()))
        .collect();
    if rows.is_empty() {
        bail!("no local features to train a codebook on");
    }
    DescriptorMatrix::from_rows(&rows).map_err(Into::into)
}

/// Unit-norm random direction scaled to `norm`, for synthetic condition
/// bias.
fn seeded_bias(rng: &mut ChaCha12Rng, dim: usize, norm: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len > 0.0 && norm > 0.0 {
        v.iter_mut().for_each(|x| *x = *x / len * norm);
    } else {
        v = vec![0.0; dim];
    }
    v
}

pub fn load_bundle(cfg: &RunConfig) -> Result<Bundle> {
    let bundle = load_bundle_inner(cfg)?;

    // cross-check the assembled inputs against the data-model invariants
    let view = vprkit::data::DatasetBundle {
        db: match cfg.session {
            vprkit::data::SessionMode::Single => None,
            vprkit::data::SessionMode::Multi => {
                Some(vprkit::data::ImageSet::Descriptors(bundle.db.clone()))
            }
        },
        q: vprkit::data::ImageSet::Descriptors(bundle.q.clone()),
        ground_truth: bundle.ground_truth.clone(),
        session: cfg.session,
    };
    let violations = vprkit::data::validate_bundle(&view);
    if !violations.is_empty() {
        let details: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("inconsistent dataset: {}", details.join("; "));
    }
    Ok(bundle)
}

fn load_bundle_inner(cfg: &RunConfig) -> Result<Bundle> {
    let bundle = match cfg.kind {
        DatasetKind::Synth => {
            let spec = &cfg.synth;
            let world = generate_world(&WorldConfig {
                n_places: spec.places,
                latent_dim: spec.latent_dim,
                aliasing_pairs: spec.aliasing_pairs,
                seed: cfg.seed,
            })?;
            let db_script = TraverseScript::identity(spec.db_events.clone(), spec.latent_dim)
                .with_noise(spec.noise_sigma);
            // the query condition is drawn from its own stream so event
            // edits do not reshuffle it
            let mut cond_rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(3));
            let bias = seeded_bias(&mut cond_rng, spec.latent_dim, spec.q_bias_norm);
            let scale: Vec<f64> = (0..spec.latent_dim)
                .map(|_| {
                    if spec.q_scale_min == spec.q_scale_max {
                        spec.q_scale_min
                    } else {
                        cond_rng.random_range(spec.q_scale_min..spec.q_scale_max)
                    }
                })
                .collect();
            let q_script = TraverseScript::identity(spec.q_events.clone(), spec.latent_dim)
                .with_noise(spec.noise_sigma)
                .with_condition(scale, bias);
            let db = generate_traverse(&world, &db_script, cfg.seed.wrapping_add(1))?;
            let q = generate_traverse(&world, &q_script, cfg.seed.wrapping_add(2))?;
            let gt = derive_gt(&db, &q, spec.soft_radius)?;
            Bundle {
                db: db.descriptors,
                q: q.descriptors,
                db_local: None,
                q_local: None,
                ground_truth: Some(gt),
                db_place_ids: Some(db.place_ids),
                q_place_ids: Some(q.place_ids),
                codebook: None,
            }
        }
        DatasetKind::Descriptors => {
            let q = io::read_descriptors(cfg.q_path.as_ref().expect("validated by config"))?;
            let db = match &cfg.db_path {
                Some(p) => io::read_descriptors(p)?,
                None => q.clone(),
            };
            let gt = load_gt(cfg, db.n(), q.n())?;
            Bundle {
                db,
                q,
                db_local: None,
                q_local: None,
                ground_truth: gt,
                db_place_ids: None,
                q_place_ids: None,
                codebook: None,
            }
        }
        DatasetKind::Images => {
            let q_images = load_images(cfg.q_path.as_ref().expect("validated by config"))?;
            let db_images = match &cfg.db_path {
                Some(p) => load_images(p)?,
                None => q_images.clone(),
            };
            let aggregated = matches!(
                cfg.descriptor.method,
                DescriptorMethod::Bovw | DescriptorMethod::Vlad
            );
            let needs_locals = aggregated || cfg.similarity.rerank_k > 0;
            let (db_local, q_local) = if needs_locals {
                (
                    Some(extract_locals(&db_images, cfg)?),
                    Some(extract_locals(&q_images, cfg)?),
                )
            } else {
                (None, None)
            };
            let codebook = if aggregated {
                // train on database features only; the query set must not
                // leak into the map representation
                let pooled = pool_features(db_local.as_deref().unwrap())?;
                Some(kmeans_fit(
                    &pooled,
                    cfg.descriptor.codebook_k,
                    cfg.descriptor.codebook_iters,
                    cfg.seed,
                )?)
            } else {
                None
            };
            let db = image_descriptors(&db_images, db_local.as_deref(), cfg, codebook.as_ref())?;
            let q = image_descriptors(&q_images, q_local.as_deref(), cfg, codebook.as_ref())?;
            let gt = load_gt(cfg, db.n(), q.n())?;
            Bundle {
                db,
                q,
                db_local,
                q_local,
                ground_truth: gt,
                db_place_ids: None,
                q_place_ids: None,
                codebook,
            }
        }
    };
    Ok(bundle)
}

fn load_gt(cfg: &RunConfig, rows: usize, cols: usize) -> Result<Option<GroundTruth>> {
    match &cfg.gt_pairs {
        None => Ok(None),
        Some(path) => {
            let pairs = io::read_pairs(path)
                .with_context(|| format!("reading ground truth {}", path.display()))?;
            let gt = vprkit::data::build_ground_truth(&pairs, (rows, cols), cfg.soft_radius)?;
            Ok(Some(gt))
        }
    }
}

/// Standardization and sequence combination, applied to both sets.
pub fn process_descriptors(
    bundle: &Bundle,
    cfg: &RunConfig,
) -> Result<(DescriptorMatrix, DescriptorMatrix)> {
    let standardized = |m: &DescriptorMatrix, which: &str| -> Result<DescriptorMatrix> {
        match &cfg.standardize {
            StandardizeSpec::None => Ok(m.clone()),
            StandardizeSpec::Set => Ok(standardize_per_set(m)?),
            StandardizeSpec::Labels => {
                let labels = m
                    .labels()
                    .ok_or_else(|| {
                        anyhow!("standardize mode 'labels' needs labels in the {which} descriptors")
                    })?
                    .to_vec();
                let stats = standardize_fit(m, &labels)?;
                Ok(standardize_apply(m, &stats, &labels)?)
            }
            StandardizeSpec::Cluster { k, iters } => {
                Ok(cluster_standardize(m, *k, *iters, cfg.seed)?)
            }
        }
    };
    let mut db = standardized(&bundle.db, "database")?;
    let mut q = standardized(&bundle.q, "query")?;
    if let Some((mode, len)) = &cfg.descriptor.sequence {
        db = sequence_descriptors(&db, *len, *mode)?;
        q = sequence_descriptors(&q, *len, *mode)?;
    }
    Ok((db, q))
}

/// Rounds every similarity through the 32-bit float representation used by
/// the on-disk format, so metrics computed in memory and metrics computed
/// from a re-imported file agree bit for bit.
fn quantize_to_storage(s: &SimilarityMatrix) -> SimilarityMatrix {
    let values: Vec<f64> = s.values().iter().map(|v| *v as f32 as f64).collect();
    SimilarityMatrix::new(s.rows(), s.cols(), values, s.metric())
        .expect("quantization preserves the shape")
}

pub fn compute_similarity(
    bundle: &Bundle,
    db: &DescriptorMatrix,
    q: &DescriptorMatrix,
    cfg: &RunConfig,
) -> Result<SimilarityMatrix> {
    let mut s = similarity_matrix(db, q, cfg.similarity.metric)?;
    if cfg.similarity.seq.len > 1 {
        s = seq_refine(&s, &cfg.similarity.seq)?;
    }
    if cfg.similarity.rerank_k > 0 {
        let (db_local, q_local) = match (&bundle.db_local, &bundle.q_local) {
            (Some(a), Some(b)) => (a, b),
            _ => bail!("re-ranking needs local features; use an image dataset"),
        };
        let top = knn_topk(&s, cfg.similarity.rerank_k.min(s.rows()))?;
        s = rerank_topk(&s, &top, db_local, q_local)?;
    }
    if let Some(h) = cfg.matching.exclusion {
        s = apply_exclusion(&s, h)?;
    }
    Ok(quantize_to_storage(&s))
}

/// The matching stage: decisions plus the threshold that was applied (None
/// for single-best matching).
pub fn compute_matches(s: &SimilarityMatrix, cfg: &RunConfig) -> Result<(MatchMatrix, Option<f64>)> {
    match cfg.matching.mode {
        MatchMode::SingleBest => {
            // exclusion is already baked into the matrix as sentinels
            Ok((best_match_per_query(s, None)?, None))
        }
        MatchMode::MultiMatch => {
            let theta = match cfg.matching.threshold {
                ThresholdSpec::Auto => auto_threshold(s)?,
                ThresholdSpec::Fixed(t) => t,
            };
            Ok((threshold_match(s, theta), Some(theta)))
        }
    }
}

pub struct Evaluation {
    pub report: MetricReport,
    pub curve: PrCurve,
}

pub fn evaluate(
    s: &SimilarityMatrix,
    m: &MatchMatrix,
    gt: &GroundTruth,
    cfg: &RunConfig,
) -> Result<Evaluation> {
    let mode = cfg.matching.mode;
    let counts = confusion_counts(m, gt, mode)?;
    let curve = pr_curve(s, gt, mode)?;
    let area = auprc(&curve);

    let mut r_at_p = BTreeMap::new();
    for (label, level) in [("1.0", 1.0), ("0.99", 0.99), ("0.95", 0.95)] {
        r_at_p.insert(label.to_string(), recall_at_precision(&curve, level));
    }

    let skip = cfg.evaluation.skip_unmatched;
    // queries without any true match, independent of which K values are valid
    let skipped = if skip {
        (0..gt.cols())
            .filter(|&col| !(0..gt.rows()).any(|row| gt.gt(row, col)))
            .count()
    } else {
        0
    };
    let mut recall_ks = BTreeMap::new();
    for &k in &cfg.evaluation.recall_ks {
        let value = if k >= 1 && k <= s.rows() {
            Some(recall_at_k(s, gt, k, skip)?.recall)
        } else {
            None
        };
        recall_ks.insert(k.to_string(), value);
    }

    Ok(Evaluation {
        report: MetricReport {
            dataset: cfg.name.clone(),
            mode: mode.as_str().to_string(),
            auprc: area,
            r_at_p,
            recall_at_k: recall_ks,
            counts,
            skipped,
        },
        curve,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{now}")
}

/// report.json: the metric record plus the resolved config and a timestamp.
/// The timestamp is the single field outside the determinism contract.
pub fn report_json(
    evaluation: &Evaluation,
    threshold: Option<f64>,
    resolved: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<String> {
    let mut value = serde_json::to_value(&evaluation.report)?;
    let object = value.as_object_mut().expect("report serializes to an object");
    object.insert("threshold".into(), serde_json::to_value(threshold)?);
    object.insert("config".into(), serde_json::to_value(resolved)?);
    object.insert("generated_at".into(), serde_json::Value::String(timestamp()));
    Ok(format!("{}\n", serde_json::to_string_pretty(&value)?))
}

pub fn write_dataset_artifacts(bundle: &Bundle, cfg: &RunConfig) -> Result<Vec<String>> {
    let out = &cfg.out_dir;
    let mut written = Vec::new();
    io::write_descriptors(&bundle.db, out.join("db_descriptors.vprd"))?;
    io::write_descriptors(&bundle.q, out.join("q_descriptors.vprd"))?;
    written.push("db_descriptors.vprd".into());
    written.push("q_descriptors.vprd".into());
    if let (Some(db_ids), Some(q_ids)) = (&bundle.db_place_ids, &bundle.q_place_ids) {
        write(
            &out.join("db_place_ids.txt"),
            io::place_ids_to_string(db_ids).as_bytes(),
        )?;
        write(
            &out.join("q_place_ids.txt"),
            io::place_ids_to_string(q_ids).as_bytes(),
        )?;
        written.push("db_place_ids.txt".into());
        written.push("q_place_ids.txt".into());
    }
    if let Some(gt) = &bundle.ground_truth {
        write(
            &out.join("gt_pairs.txt"),
            io::pairs_to_string(&gt.true_pairs()).as_bytes(),
        )?;
        written.push("gt_pairs.txt".into());
    }
    if let Some(codebook) = &bundle.codebook {
        save_codebook(codebook, out.join("codebook.vprd"))?;
        written.push("codebook.vprd".into());
        written.push("codebook.vprd.meta".into());
    }
    Ok(written)
}

pub fn write_similarity_artifacts(s: &SimilarityMatrix, cfg: &RunConfig) -> Result<()> {
    io::write_similarity(s, cfg.out_dir.join("similarity.vprd"))?;
    io::write_pgm(&to_heatmap(s), cfg.out_dir.join("similarity.pgm"))?;
    Ok(())
}

pub fn write_match_artifacts(m: &MatchMatrix, cfg: &RunConfig) -> Result<()> {
    io::write_bool_matrix(
        m.rows(),
        m.cols(),
        m.values(),
        cfg.out_dir.join("matches.vprb"),
    )?;
    write(
        &cfg.out_dir.join("matches.txt"),
        io::pairs_to_string(&m.matched_pairs()).as_bytes(),
    )?;
    Ok(())
}

pub fn write_eval_artifacts(
    evaluation: &Evaluation,
    threshold: Option<f64>,
    out_dir: &Path,
    resolved: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<()> {
    write(
        &out_dir.join("pr_curve.csv"),
        pr_curve_csv(&evaluation.curve).as_bytes(),
    )?;
    write(
        &out_dir.join("pr_curve.svg"),
        svg::pr_curve_svg(&evaluation.curve, &evaluation.report.dataset).as_bytes(),
    )?;
    write(
        &out_dir.join("report.json"),
        report_json(evaluation, threshold, resolved)?.as_bytes(),
    )?;
    Ok(())
}

/// Reads a similarity matrix back from its VPRD export. Values pass through
/// unchanged since the export is the storage representation.
pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix> {
    io::read_similarity(path).with_context(|| format!("reading similarity {}", path.display()))
}

/// The full pipeline: every stage, every artifact. Returns the evaluation.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Evaluation> {
    let _lock = OutputLock::acquire(&cfg.out_dir)?;
    write(
        &cfg.out_dir.join("resolved.cfg"),
        cfg.resolved_text().as_bytes(),
    )?;

    let bundle = stage("input", load_bundle(cfg))?;
    stage("input", write_dataset_artifacts(&bundle, cfg).map(|_| ()))?;

    let (db, q) = stage("descriptor", process_descriptors(&bundle, cfg))?;
    let s = stage("similarity", compute_similarity(&bundle, &db, &q, cfg))?;
    stage("similarity", write_similarity_artifacts(&s, cfg))?;

    let (m, threshold) = stage("matching", compute_matches(&s, cfg))?;
    stage("matching", write_match_artifacts(&m, cfg))?;

    let gt = bundle
        .ground_truth
        .as_ref()
        .ok_or_else(|| anyhow!("stage evaluation: evaluation requires ground truth"))?;
    let evaluation = stage("evaluation", evaluate(&s, &m, gt, cfg))?;
    stage(
        "evaluation",
        write_eval_artifacts(&evaluation, threshold, &cfg.out_dir, &cfg.resolved()),
    )?;
    Ok(evaluation)
}
