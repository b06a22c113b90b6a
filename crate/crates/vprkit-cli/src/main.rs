//! vprkit: place recognition pipelines and their evaluation from the
//! command line.

mod config;
mod pipeline;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{parse_mode, parse_session, parse_threshold, Overrides, RunConfig};
use vprkit::data::build_ground_truth;

#[derive(Parser)]
#[command(
    name = "vprkit",
    version,
    about = "Place recognition pipelines, synthetic benchmarks, and retrieval metrics",
    after_help = "The VPRKIT_THREADS environment variable caps internal parallelism.\n\
                  Matching note: threshold 'auto' picks the 256-bin histogram split that\n\
                  maximizes the between-class variance of the similarity values (Otsu),\n\
                  which fits their typical same-place/different-place bimodality."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven subcommands.
#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the output mode: single-best or multi-match
    #[arg(long)]
    mode: Option<String>,
    /// Override the session mode: single or multi
    #[arg(long)]
    session: Option<String>,
    /// Override the matching threshold: auto or a number
    #[arg(long)]
    threshold: Option<String>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode.as_deref().map(parse_mode).transpose()?,
            session: self.session.as_deref().map(parse_session).transpose()?,
            threshold: self.threshold.as_deref().map(parse_threshold).transpose()?,
        };
        RunConfig::load(&self.config, &overrides)
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Similarity matrix in the VPRD float format (rows = database)
    s_file: PathBuf,
    /// Ground-truth pairs file ("row col" per line, # comments)
    gt_file: PathBuf,
    /// Soft ground truth dilation radius: rows cols
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"], default_values_t = [0usize, 0usize])]
    soft_radius: Vec<usize>,
    /// Output mode: single-best or multi-match
    #[arg(long, default_value = "multi-match")]
    mode: String,
    /// Matching threshold for the reported counts: auto or a number
    #[arg(long, default_value = "auto")]
    threshold: String,
    /// Dataset name recorded in the report
    #[arg(long, default_value = "imported")]
    dataset: String,
    /// Recall@K values to report
    #[arg(long, num_args = 1.., default_values_t = [1usize, 5, 10])]
    recall_ks: Vec<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset on disk (descriptors, place ids, ground truth)
    Synth(RunArgs),
    /// Compute raw descriptors and write them in the VPRD format
    Extract(RunArgs),
    /// Compute the similarity matrix, its heatmap, and export both
    Similarity(RunArgs),
    /// Turn similarities into matching decisions and export them
    Match(RunArgs),
    /// Evaluate an exported similarity matrix against ground-truth pairs
    Eval(EvalArgs),
    /// Run everything: input, descriptors, similarity, matching, evaluation
    Pipeline(RunArgs),
}

fn init_threads() {
    if let Ok(text) = std::env::var("VPRKIT_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn cmd_synth(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    if cfg.kind != config::DatasetKind::Synth {
        anyhow::bail!("synth needs a config with [dataset] kind = synth");
    }
    let _lock = pipeline::OutputLock::acquire(&cfg.out_dir)?;
    let bundle = pipeline::load_bundle(&cfg)?;
    let written = pipeline::write_dataset_artifacts(&bundle, &cfg)?;
    let gt_count = bundle
        .ground_truth
        .as_ref()
        .map(|gt| gt.true_pairs().len())
        .unwrap_or(0);
    println!(
        "synth: {} places, {} database frames, {} query frames, {} ground-truth pairs",
        cfg.synth.places,
        bundle.db.n(),
        bundle.q.n(),
        gt_count
    );
    println!("wrote {} files to {}", written.len(), cfg.out_dir.display());
    Ok(())
}

fn cmd_extract(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let _lock = pipeline::OutputLock::acquire(&cfg.out_dir)?;
    let bundle = pipeline::load_bundle(&cfg)?;
    let written = pipeline::write_dataset_artifacts(&bundle, &cfg)?;
    println!(
        "extract: {} database rows x {} dims, {} query rows x {} dims",
        bundle.db.n(),
        bundle.db.d(),
        bundle.q.n(),
        bundle.q.d()
    );
    println!("wrote {} files to {}", written.len(), cfg.out_dir.display());
    Ok(())
}

fn cmd_similarity(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let _lock = pipeline::OutputLock::acquire(&cfg.out_dir)?;
    let bundle = pipeline::load_bundle(&cfg)?;
    let (db, q) = pipeline::process_descriptors(&bundle, &cfg)?;
    let s = pipeline::compute_similarity(&bundle, &db, &q, &cfg)?;
    pipeline::write_similarity_artifacts(&s, &cfg)?;
    println!(
        "similarity: {}x{} matrix ({}) -> similarity.vprd, similarity.pgm in {}",
        s.rows(),
        s.cols(),
        s.metric().as_str(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_match(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let _lock = pipeline::OutputLock::acquire(&cfg.out_dir)?;
    let bundle = pipeline::load_bundle(&cfg)?;
    let (db, q) = pipeline::process_descriptors(&bundle, &cfg)?;
    let s = pipeline::compute_similarity(&bundle, &db, &q, &cfg)?;
    let (m, threshold) = pipeline::compute_matches(&s, &cfg)?;
    pipeline::write_match_artifacts(&m, &cfg)?;
    match threshold {
        Some(theta) => println!(
            "match: {} decisions at threshold {theta} -> matches.vprb, matches.txt",
            m.count_matches()
        ),
        None => println!(
            "match: {} single-best decisions -> matches.vprb, matches.txt",
            m.count_matches()
        ),
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mode = parse_mode(&args.mode)?;
    let threshold = parse_threshold(&args.threshold)?;
    let s = pipeline::read_similarity(&args.s_file)?;
    let pairs = vprkit::io::read_pairs(&args.gt_file)
        .with_context(|| format!("reading {}", args.gt_file.display()))?;
    let radius = (args.soft_radius[0], args.soft_radius[1]);
    let gt = build_ground_truth(&pairs, (s.rows(), s.cols()), radius)?;

    // a minimal config carrying the evaluation settings
    let mut cfg = RunConfig::from_str(
        "[dataset]\nkind = synth\n",
        std::path::Path::new("."),
        &Overrides {
            out: Some(args.out.clone()),
            mode: Some(mode),
            threshold: Some(threshold),
            ..Default::default()
        },
    )?;
    cfg.name = args.dataset.clone();
    cfg.soft_radius = radius;
    cfg.gt_pairs = Some(args.gt_file.clone());
    cfg.evaluation.recall_ks = args.recall_ks.clone();

    // the report's provenance describes what was actually evaluated: an
    // imported similarity matrix, not a generated dataset
    let mut resolved = cfg.resolved();
    resolved.remove("synth");
    resolved.remove("descriptor");
    resolved.remove("standardize");
    resolved.remove("similarity");
    let dataset = resolved.get_mut("dataset").expect("dataset section exists");
    dataset.clear();
    dataset.insert("kind".into(), "imported-similarity".into());
    dataset.insert("name".into(), args.dataset.clone());
    dataset.insert("s_file".into(), args.s_file.display().to_string());
    dataset.insert("gt_pairs".into(), args.gt_file.display().to_string());
    dataset.insert("soft_radius".into(), format!("{} {}", radius.0, radius.1));

    let _lock = pipeline::OutputLock::acquire(&cfg.out_dir)?;
    let (m, theta) = pipeline::compute_matches(&s, &cfg)?;
    let evaluation = pipeline::evaluate(&s, &m, &gt, &cfg)?;
    pipeline::write_eval_artifacts(&evaluation, theta, &cfg.out_dir, &resolved)?;
    println!(
        "eval: auprc {:.6}, counts tp={} fp={} fn={} gtp={} -> report.json in {}",
        evaluation.report.auprc,
        evaluation.report.counts.true_positives,
        evaluation.report.counts.false_positives,
        evaluation.report.counts.false_negatives,
        evaluation.report.counts.ground_truth_positives,
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_pipeline(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let evaluation = pipeline::run_pipeline(&cfg)?;
    println!(
        "pipeline: auprc {:.6}, recall@1 {}, tp={} fp={} -> {}",
        evaluation.report.auprc,
        evaluation
            .report
            .recall_at_k
            .get("1")
            .copied()
            .flatten()
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "n/a".into()),
        evaluation.report.counts.true_positives,
        evaluation.report.counts.false_positives,
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Similarity(args) => cmd_similarity(args),
        Command::Match(args) => cmd_match(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
