//! The run configuration: a flat, line-oriented `key = value` format with
//! `[section]` headers and `#` comments. Human-diffable, no external schema.
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use vprkit::data::{MatchMode, SessionMode};
use vprkit::similarity::{Metric, SeqParams, SequenceMode};
use vprkit::synth::TraverseEvent;

#[derive(Debug, Clone)]
struct RawValue {
    value: String,
    line: usize,
    column: usize,
}

/// Parsed but untyped configuration text.
#[derive(Debug, Default)]
struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, RawValue>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, RawValue>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim_end();
            let trimmed = line.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            let column = raw_line.len() - raw_line.trim_start().len() + 1;
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {line_no}, column {column}: unterminated section header"))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
            } else if let Some((key, value)) = trimmed.split_once('=') {
                if current.is_empty() {
                    bail!("line {line_no}, column {column}: key outside any [section]");
                }
                let key = key.trim().to_string();
                let value_col = raw_line.find('=').map(|p| p + 2).unwrap_or(column);
                sections.get_mut(&current).unwrap().insert(
                    key,
                    RawValue {
                        value: value.trim().to_string(),
                        line: line_no,
                        column: value_col,
                    },
                );
            } else {
                bail!("line {line_no}, column {column}: expected 'key = value' or '[section]'");
            }
        }
        Ok(Self { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawValue> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn str(&self, section: &str, key: &str, default: &str) -> String {
        self.get(section, key)
            .map(|v| v.value.clone())
            .unwrap_or_else(|| default.to_string())
    }

    fn parse_as<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => raw.value.parse().map_err(|_| {
                anyhow!(
                    "line {}, column {}: cannot parse [{section}] {key} = '{}'",
                    raw.line,
                    raw.column,
                    raw.value
                )
            }),
        }
    }

    fn required(&self, section: &str, key: &str) -> Result<&RawValue> {
        self.get(section, key)
            .ok_or_else(|| anyhow!("missing required key [{section}] {key}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetKind {
    Synth,
    Descriptors,
    Images,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Synth => "synth",
            DatasetKind::Descriptors => "descriptors",
            DatasetKind::Images => "images",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub places: usize,
    pub latent_dim: usize,
    pub aliasing_pairs: usize,
    pub noise_sigma: f64,
    pub db_events: Vec<TraverseEvent>,
    pub q_events: Vec<TraverseEvent>,
    pub q_bias_norm: f64,
    pub q_scale_min: f64,
    pub q_scale_max: f64,
    pub soft_radius: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptorMethod {
    /// Descriptors come from files; nothing is computed.
    Import,
    Patchnorm,
    Bovw,
    Vlad,
}

impl DescriptorMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DescriptorMethod::Import => "import",
            DescriptorMethod::Patchnorm => "patchnorm",
            DescriptorMethod::Bovw => "bovw",
            DescriptorMethod::Vlad => "vlad",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescriptorSpec {
    pub method: DescriptorMethod,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub patch: usize,
    pub local_stride: usize,
    pub local_patch: usize,
    pub local_dim: usize,
    pub codebook_k: usize,
    pub codebook_iters: usize,
    pub sequence: Option<(SequenceMode, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StandardizeSpec {
    None,
    /// Whole database and whole query set as one condition each.
    Set,
    /// Per-row labels from the descriptor files.
    Labels,
    Cluster { k: usize, iters: usize },
}

#[derive(Debug, Clone)]
pub struct SimilaritySpec {
    pub metric: Metric,
    /// Sequence refinement; `len = 1` leaves the matrix untouched.
    pub seq: SeqParams,
    /// Top-K re-ranking with local features; 0 disables it.
    pub rerank_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct MatchingSpec {
    pub mode: MatchMode,
    pub threshold: ThresholdSpec,
    pub exclusion: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub recall_ks: Vec<usize>,
    pub skip_unmatched: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub kind: DatasetKind,
    pub session: SessionMode,
    pub db_path: Option<PathBuf>,
    pub q_path: Option<PathBuf>,
    pub gt_pairs: Option<PathBuf>,
    pub soft_radius: (usize, usize),
    pub synth: SynthSpec,
    pub descriptor: DescriptorSpec,
    pub standardize: StandardizeSpec,
    pub similarity: SimilaritySpec,
    pub matching: MatchingSpec,
    pub evaluation: EvalSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn parse_range(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("expected a range like 0..50, got '{text}'"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

/// Parses an event list like
/// `visit 0..50 step 2; stop 10 3; skip 20..25; loop 0..10`.
pub fn parse_events(text: &str) -> Result<Vec<TraverseEvent>> {
    let mut events = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let fields: Vec<&str> = part.split_whitespace().collect();
        let event = match fields.as_slice() {
            ["visit", range] => {
                let (start, end) = parse_range(range)?;
                TraverseEvent::Visit { start, end, step: 1 }
            }
            ["visit", range, "step", step] => {
                let (start, end) = parse_range(range)?;
                TraverseEvent::Visit {
                    start,
                    end,
                    step: step.parse()?,
                }
            }
            ["stop", place, duration] => TraverseEvent::Stop {
                place: place.parse()?,
                duration: duration.parse()?,
            },
            ["loop", range] => {
                let (start, end) = parse_range(range)?;
                TraverseEvent::Loop { start, end }
            }
            ["skip", range] => {
                let (start, end) = parse_range(range)?;
                TraverseEvent::Skip { start, end }
            }
            _ => bail!("cannot parse event '{part}'"),
        };
        events.push(event);
    }
    if events.is_empty() {
        bail!("event list is empty");
    }
    Ok(events)
}

pub fn event_to_string(event: &TraverseEvent) -> String {
    match event {
        TraverseEvent::Visit { start, end, step } => format!("visit {start}..{end} step {step}"),
        TraverseEvent::Stop { place, duration } => format!("stop {place} {duration}"),
        TraverseEvent::Loop { start, end } => format!("loop {start}..{end}"),
        TraverseEvent::Skip { start, end } => format!("skip {start}..{end}"),
    }
}

fn parse_radius(text: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    match fields.as_slice() {
        [rows, cols] => Ok((rows.parse()?, cols.parse()?)),
        _ => bail!("expected 'rows cols', got '{text}'"),
    }
}

/// Command line overrides applied on top of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<MatchMode>,
    pub session: Option<SessionMode>,
    pub threshold: Option<ThresholdSpec>,
}

pub fn parse_mode(text: &str) -> Result<MatchMode> {
    match text {
        "single-best" => Ok(MatchMode::SingleBest),
        "multi-match" => Ok(MatchMode::MultiMatch),
        other => bail!("unknown mode '{other}' (expected single-best or multi-match)"),
    }
}

pub fn parse_session(text: &str) -> Result<SessionMode> {
    match text {
        "single" => Ok(SessionMode::Single),
        "multi" => Ok(SessionMode::Multi),
        other => bail!("unknown session '{other}' (expected single or multi)"),
    }
}

pub fn parse_threshold(text: &str) -> Result<ThresholdSpec> {
    if text == "auto" {
        Ok(ThresholdSpec::Auto)
    } else {
        Ok(ThresholdSpec::Fixed(text.parse().with_context(|| {
            format!("threshold must be 'auto' or a number, got '{text}'")
        })?))
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base, overrides)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_str(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let raw = RawConfig::parse(text)?;
        let resolve = |p: String| -> PathBuf {
            let pb = PathBuf::from(p);
            if pb.is_absolute() || base == Path::new(".") || base.as_os_str().is_empty() {
                pb
            } else {
                base.join(pb)
            }
        };

        let kind = match raw.required("dataset", "kind")?.value.as_str() {
            "synth" => DatasetKind::Synth,
            "descriptors" => DatasetKind::Descriptors,
            "images" => DatasetKind::Images,
            other => bail!("unknown dataset kind '{other}'"),
        };
        let session = overrides
            .session
            .map(Ok)
            .unwrap_or_else(|| parse_session(&raw.str("dataset", "session", "multi")))?;
        let name = raw.str("dataset", "name", kind.as_str());

        let db_key = match kind {
            DatasetKind::Images => "db_images",
            _ => "db_descriptors",
        };
        let q_key = match kind {
            DatasetKind::Images => "q_images",
            _ => "q_descriptors",
        };
        let db_path = raw
            .get("dataset", db_key)
            .map(|v| resolve(v.value.clone()));
        let q_path = raw.get("dataset", q_key).map(|v| resolve(v.value.clone()));
        let gt_pairs = raw
            .get("dataset", "gt_pairs")
            .map(|v| resolve(v.value.clone()));
        let soft_radius = parse_radius(&raw.str("dataset", "soft_radius", "0 0"))?;

        if kind == DatasetKind::Synth {
            if session == SessionMode::Single {
                bail!("synthetic datasets generate a database and a query run; use session = multi");
            }
        } else {
            if q_path.is_none() {
                bail!("dataset kind '{}' requires [dataset] {q_key}", kind.as_str());
            }
            if session == SessionMode::Multi && db_path.is_none() {
                bail!("multi-session runs require [dataset] {db_key}");
            }
            if session == SessionMode::Single && db_path.is_some() {
                bail!("single-session runs must not set [dataset] {db_key}");
            }
        }

        let places = raw.parse_as("synth", "places", 50usize)?;
        let synth = SynthSpec {
            places,
            latent_dim: raw.parse_as("synth", "latent_dim", 16usize)?,
            aliasing_pairs: raw.parse_as("synth", "aliasing_pairs", 0usize)?,
            noise_sigma: raw.parse_as("synth", "noise_sigma", 0.0f64)?,
            db_events: parse_events(&raw.str("synth", "db_events", &format!("visit 0..{places}")))?,
            q_events: parse_events(&raw.str("synth", "q_events", &format!("visit 0..{places}")))?,
            q_bias_norm: raw.parse_as("synth", "q_bias_norm", 0.0f64)?,
            q_scale_min: raw.parse_as("synth", "q_scale_min", 1.0f64)?,
            q_scale_max: raw.parse_as("synth", "q_scale_max", 1.0f64)?,
            soft_radius: parse_radius(&raw.str("synth", "soft_radius", "0 0"))?,
        };

        let method = match raw.str("descriptor", "method", "import").as_str() {
            "import" => DescriptorMethod::Import,
            "patchnorm" => DescriptorMethod::Patchnorm,
            "bovw" => DescriptorMethod::Bovw,
            "vlad" => DescriptorMethod::Vlad,
            other => bail!("unknown descriptor method '{other}'"),
        };
        let sequence = match raw.str("descriptor", "sequence", "none").as_str() {
            "none" => None,
            "concat" => Some(SequenceMode::Concat),
            "mean" => Some(SequenceMode::Mean),
            "delta" => Some(SequenceMode::Delta),
            other => bail!("unknown sequence mode '{other}'"),
        }
        .map(|mode| -> Result<_> {
            Ok((mode, raw.parse_as("descriptor", "sequence_len", 3usize)?))
        })
        .transpose()?;
        let descriptor = DescriptorSpec {
            method,
            grid_rows: raw.parse_as("descriptor", "grid_rows", 4usize)?,
            grid_cols: raw.parse_as("descriptor", "grid_cols", 4usize)?,
            patch: raw.parse_as("descriptor", "patch", 8usize)?,
            local_stride: raw.parse_as("descriptor", "local_stride", 8usize)?,
            local_patch: raw.parse_as("descriptor", "local_patch", 8usize)?,
            local_dim: raw.parse_as("descriptor", "local_dim", 0usize)?,
            codebook_k: raw.parse_as("descriptor", "codebook_k", 16usize)?,
            codebook_iters: raw.parse_as("descriptor", "codebook_iters", 10usize)?,
            sequence,
        };

        let standardize = match raw.str("standardize", "mode", "none").as_str() {
            "none" => StandardizeSpec::None,
            "set" => StandardizeSpec::Set,
            "labels" => StandardizeSpec::Labels,
            "cluster" => StandardizeSpec::Cluster {
                k: raw.parse_as("standardize", "cluster_k", 2usize)?,
                iters: raw.parse_as("standardize", "cluster_iters", 10usize)?,
            },
            other => bail!("unknown standardization mode '{other}'"),
        };

        let metric = match raw.str("similarity", "metric", "cosine").as_str() {
            "cosine" => Metric::Cosine,
            "neg_euclidean" => Metric::NegEuclidean,
            other => bail!("unknown metric '{other}'"),
        };
        let similarity = SimilaritySpec {
            metric,
            seq: SeqParams {
                len: raw.parse_as("similarity", "seq_len", 1usize)?,
                v_min: raw.parse_as("similarity", "seq_v_min", 0.8f64)?,
                v_max: raw.parse_as("similarity", "seq_v_max", 1.2f64)?,
                v_steps: raw.parse_as("similarity", "seq_v_steps", 5usize)?,
            },
            rerank_k: raw.parse_as("similarity", "rerank_k", 0usize)?,
        };

        let mode = overrides
            .mode
            .map(Ok)
            .unwrap_or_else(|| parse_mode(&raw.str("matching", "mode", "multi-match")))?;
        let threshold = overrides
            .threshold
            .map(Ok)
            .unwrap_or_else(|| parse_threshold(&raw.str("matching", "threshold", "auto")))?;
        let exclusion = match raw.str("matching", "exclusion", "none").as_str() {
            "none" => None,
            text => Some(text.parse::<usize>().map_err(|_| {
                anyhow!("[matching] exclusion must be 'none' or an integer, got '{text}'")
            })?),
        };
        if exclusion.is_some() && session != SessionMode::Single {
            bail!("recent-match exclusion requires session = single");
        }
        let matching = MatchingSpec {
            mode,
            threshold,
            exclusion,
        };

        let recall_ks: Vec<usize> = raw
            .str("evaluation", "recall_ks", "1 5 10")
            .split_whitespace()
            .map(|f| f.parse::<usize>().map_err(|_| anyhow!("bad recall K '{f}'")))
            .collect::<Result<_>>()?;
        let evaluation = EvalSpec {
            recall_ks,
            skip_unmatched: raw.parse_as("evaluation", "skip_unmatched", true)?,
        };

        let out_dir = overrides
            .out
            .clone()
            .unwrap_or_else(|| resolve(raw.str("output", "dir", "out")));
        let seed = overrides
            .seed
            .map(Ok)
            .unwrap_or_else(|| raw.parse_as("output", "seed", 42u64))?;

        Ok(RunConfig {
            name,
            kind,
            session,
            db_path,
            q_path,
            gt_pairs,
            soft_radius,
            synth,
            descriptor,
            standardize,
            similarity,
            matching,
            evaluation,
            seed,
            out_dir,
        })
    }

    /// Every resolved setting, as section -> key -> value maps. This is what
    /// reports embed for provenance and what `resolved.cfg` serializes.
    pub fn resolved(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut put = |section: &str, key: &str, value: String| {
            out.entry(section.to_string())
                .or_default()
                .insert(key.to_string(), value);
        };
        put("dataset", "name", self.name.clone());
        put("dataset", "kind", self.kind.as_str().to_string());
        put("dataset", "session", self.session.as_str().to_string());
        if let Some(p) = &self.db_path {
            let key = if self.kind == DatasetKind::Images { "db_images" } else { "db_descriptors" };
            put("dataset", key, p.display().to_string());
        }
        if let Some(p) = &self.q_path {
            let key = if self.kind == DatasetKind::Images { "q_images" } else { "q_descriptors" };
            put("dataset", key, p.display().to_string());
        }
        if let Some(p) = &self.gt_pairs {
            put("dataset", "gt_pairs", p.display().to_string());
        }
        put(
            "dataset",
            "soft_radius",
            format!("{} {}", self.soft_radius.0, self.soft_radius.1),
        );
        if self.kind == DatasetKind::Synth {
            let s = &self.synth;
            put("synth", "places", s.places.to_string());
            put("synth", "latent_dim", s.latent_dim.to_string());
            put("synth", "aliasing_pairs", s.aliasing_pairs.to_string());
            put("synth", "noise_sigma", s.noise_sigma.to_string());
            let events = |e: &[TraverseEvent]| {
                e.iter().map(event_to_string).collect::<Vec<_>>().join("; ")
            };
            put("synth", "db_events", events(&s.db_events));
            put("synth", "q_events", events(&s.q_events));
            put("synth", "q_bias_norm", s.q_bias_norm.to_string());
            put("synth", "q_scale_min", s.q_scale_min.to_string());
            put("synth", "q_scale_max", s.q_scale_max.to_string());
            put(
                "synth",
                "soft_radius",
                format!("{} {}", s.soft_radius.0, s.soft_radius.1),
            );
        }
        let d = &self.descriptor;
        put("descriptor", "method", d.method.as_str().to_string());
        if d.method == DescriptorMethod::Patchnorm {
            put("descriptor", "grid_rows", d.grid_rows.to_string());
            put("descriptor", "grid_cols", d.grid_cols.to_string());
            put("descriptor", "patch", d.patch.to_string());
        }
        if matches!(d.method, DescriptorMethod::Bovw | DescriptorMethod::Vlad)
            || self.similarity.rerank_k > 0
        {
            put("descriptor", "local_stride", d.local_stride.to_string());
            put("descriptor", "local_patch", d.local_patch.to_string());
            put("descriptor", "local_dim", d.local_dim.to_string());
        }
        if matches!(d.method, DescriptorMethod::Bovw | DescriptorMethod::Vlad) {
            put("descriptor", "codebook_k", d.codebook_k.to_string());
            put("descriptor", "codebook_iters", d.codebook_iters.to_string());
        }
        match &d.sequence {
            None => put("descriptor", "sequence", "none".to_string()),
            Some((mode, len)) => {
                let name = match mode {
                    SequenceMode::Concat => "concat",
                    SequenceMode::Mean => "mean",
                    SequenceMode::Delta => "delta",
                };
                put("descriptor", "sequence", name.to_string());
                put("descriptor", "sequence_len", len.to_string());
            }
        }
        match &self.standardize {
            StandardizeSpec::None => put("standardize", "mode", "none".to_string()),
            StandardizeSpec::Set => put("standardize", "mode", "set".to_string()),
            StandardizeSpec::Labels => put("standardize", "mode", "labels".to_string()),
            StandardizeSpec::Cluster { k, iters } => {
                put("standardize", "mode", "cluster".to_string());
                put("standardize", "cluster_k", k.to_string());
                put("standardize", "cluster_iters", iters.to_string());
            }
        }
        let metric = match self.similarity.metric {
            Metric::Cosine => "cosine",
            Metric::NegEuclidean => "neg_euclidean",
        };
        put("similarity", "metric", metric.to_string());
        put("similarity", "seq_len", self.similarity.seq.len.to_string());
        if self.similarity.seq.len > 1 {
            put("similarity", "seq_v_min", self.similarity.seq.v_min.to_string());
            put("similarity", "seq_v_max", self.similarity.seq.v_max.to_string());
            put("similarity", "seq_v_steps", self.similarity.seq.v_steps.to_string());
        }
        put("similarity", "rerank_k", self.similarity.rerank_k.to_string());
        put("matching", "mode", self.matching.mode.as_str().to_string());
        let threshold = match self.matching.threshold {
            ThresholdSpec::Auto => "auto".to_string(),
            ThresholdSpec::Fixed(t) => t.to_string(),
        };
        put("matching", "threshold", threshold);
        put(
            "matching",
            "exclusion",
            self.matching
                .exclusion
                .map(|h| h.to_string())
                .unwrap_or_else(|| "none".to_string()),
        );
        put(
            "evaluation",
            "recall_ks",
            self.evaluation
                .recall_ks
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        put(
            "evaluation",
            "skip_unmatched",
            self.evaluation.skip_unmatched.to_string(),
        );
        put("output", "dir", self.out_dir.display().to_string());
        put("output", "seed", self.seed.to_string());
        out
    }

    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for (section, keys) in self.resolved() {
            out.push_str(&format!("[{section}]\n"));
            for (key, value) in keys {
                out.push_str(&format!("{key} = {value}\n"));
            }
            out.push('\n');
        }
        out
    }
}
