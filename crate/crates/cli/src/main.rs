//! `simnet` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use simnet::dataset::{
    generate_planted, load_dataset_with, Dataset, Feature, LoadMode, PlantedConfig,
};
use simnet::evaluation::{
    breakdown_table, classify, classify_full, crossval_sweep, kfold_crossval, persistent_isolates,
    unlabeled_report,
};
use simnet::export::export_graph;
use simnet::netgraph::Threshold;
use simnet::optimizer::{optimize_weights, percent_range, threshold_sweep, OptimizerConfig};
use simnet::pipeline::{load_or_build_tensor, run_pipeline, RunConfig};
use simnet::similarity::{SimilarityTensor, WeightVector};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "simnet",
    version,
    about = "Family classification over weighted similarity networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a dataset and print its family census.
    Ingest(DataArgs),
    /// Build the pairwise similarity tensor and write it to the cache file.
    Similarity {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Cluster with fixed weights and report accuracy.
    Cluster(ClusterArgs),
    /// Learn fusion weights at one threshold.
    Optimize(OptimizeArgs),
    /// Learn weights at every threshold in a range.
    Sweep(SweepArgs),
    /// Stratified k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Write the graph document (JSON plus a .dot sibling) for fixed weights.
    Export(ExportArgs),
    /// Generate a synthetic dataset with planted families.
    Generate(GenerateArgs),
    /// Full pipeline: optimize, classify, cross-validate and export.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Line-delimited JSON sample records.
    #[arg(long)]
    dataset: PathBuf,
    /// Drop records with missing fields instead of failing.
    #[arg(long)]
    skip_invalid: bool,
}

#[derive(Args, Debug)]
struct TensorArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Similarity tensor cache, reused when it matches the dataset.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long = "lr", default_value_t = 0.05)]
    learning_rate: f64,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    /// Percent (90) or fraction (0.90).
    #[arg(long, default_value = "90", value_parser = parse_threshold)]
    threshold: Threshold,
    /// api,permission,activity,file
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    weights: WeightVector,
    /// Write report.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value = "90", value_parser = parse_threshold)]
    threshold: Threshold,
    /// Write weights.json and trace.jsonl into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 80)]
    from: u32,
    #[arg(long, default_value_t = 95)]
    to: u32,
    #[arg(long, default_value_t = 1)]
    step: u32,
    /// Cross-validate each threshold with this many folds.
    #[arg(long)]
    k: Option<usize>,
    /// Write sweep.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value = "90", value_parser = parse_threshold)]
    threshold: Threshold,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Write crossval.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    #[arg(long, default_value = "90", value_parser = parse_threshold)]
    threshold: Threshold,
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    weights: WeightVector,
    /// Graph document path; the DOT file is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 8)]
    families: usize,
    #[arg(long, default_value_t = 50)]
    per_family: usize,
    #[arg(long, default_value_t = 0.1)]
    mutation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace one feature with noise: api, permission, activity or file.
    #[arg(long, value_parser = parse_feature)]
    noise: Option<Feature>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    tensor: TensorArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value = "90", value_parser = parse_threshold)]
    threshold: Threshold,
    /// Folds for cross-validation; 1 skips it.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_threshold(s: &str) -> std::result::Result<Threshold, String> {
    if let Ok(p) = s.parse::<u32>() {
        return Threshold::from_percent(p).map_err(|e| e.to_string());
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a threshold"))?;
    if v > 1.0 {
        return Err(format!("fractional threshold {v} must be at most 1"));
    }
    Threshold::new(v).map_err(|e| e.to_string())
}

fn parse_feature(s: &str) -> std::result::Result<Feature, String> {
    Feature::ALL
        .into_iter()
        .find(|f| f.field_name() == s || format!("{f:?}").eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown feature `{s}`"))
}

fn load(args: &DataArgs) -> simnet::Result<Dataset> {
    let mode = if args.skip_invalid {
        LoadMode::SkipInvalid
    } else {
        LoadMode::Strict
    };
    let (ds, skipped) = load_dataset_with(&args.dataset, mode)?;
    if !skipped.is_empty() {
        eprintln!("skipped {} invalid records", skipped.len());
    }
    Ok(ds)
}

fn load_with_tensor(args: &TensorArgs) -> Result<(Dataset, SimilarityTensor)> {
    let ds = load(&args.data)?;
    let started = Instant::now();
    let t = load_or_build_tensor(&ds, args.cache.as_deref())?;
    info!("similarity tensor ready in {:.2?}", started.elapsed());
    Ok((ds, t))
}

fn search_config(search: &SearchArgs, threshold: Threshold, seed: u64) -> Result<OptimizerConfig> {
    let cfg = OptimizerConfig {
        iterations: search.iterations,
        learning_rate: search.learning_rate,
        threshold,
        seed,
        ..OptimizerConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn to_percent(t: Threshold) -> Result<u32> {
    let p = (t.value() * 100.0).round();
    if (t.value() * 100.0 - p).abs() > 1e-9 {
        bail!("threshold {} is not a whole percent", t.value());
    }
    Ok(p as u32)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(args) => {
            let ds = load(&args)?;
            print!("{}", ds.census_report());
        }
        Command::Similarity { data, cache } => {
            let ds = load(&data)?;
            let started = Instant::now();
            let t = SimilarityTensor::build(&ds);
            t.save(&cache)?;
            println!(
                "{} samples, {} pairs in {:.2?}",
                t.n(),
                t.n() * t.n().saturating_sub(1) / 2,
                started.elapsed()
            );
            println!("wrote {}", cache.display());
        }
        Command::Cluster(args) => {
            let (ds, t) = load_with_tensor(&args.tensor)?;
            let r = classify(&t, &ds, &args.weights, args.threshold, args.tensor.seed)?;
            print!("{}", r.to_table());
            if let Some(dir) = &args.out {
                write_json(dir, "report.json", &r)?;
            }
        }
        Command::Optimize(args) => {
            let (ds, t) = load_with_tensor(&args.tensor)?;
            let cfg = search_config(&args.search, args.threshold, args.tensor.seed)?;
            let trace = optimize_weights(&t, &ds, &cfg)?;
            println!("weights      {}", trace.best_weights);
            println!(
                "error        {:.4} -> {:.4}",
                trace.initial_error, trace.best_error
            );
            println!("accepted     {}", trace.accepted_count());
            if let Some(dir) = &args.out {
                write_json(dir, "weights.json", &trace.best_weights)?;
                let path = dir.join("trace.jsonl");
                let f = fs::File::create(&path)
                    .with_context(|| format!("writing {}", path.display()))?;
                trace.write_jsonl(std::io::BufWriter::new(f))?;
            }
        }
        Command::Sweep(args) => {
            let (ds, t) = load_with_tensor(&args.tensor)?;
            let thresholds = percent_range(args.from, args.to, args.step)?;
            let cfg = search_config(&args.search, thresholds[0], args.tensor.seed)?;
            if let Some(k) = args.k {
                let sweep = crossval_sweep(&t, &ds, k, &cfg, &thresholds)?;
                println!(
                    "{:>9}  {:>14}  {:>10}",
                    "threshold", "classification", "prediction"
                );
                for p in &sweep.points {
                    println!(
                        "{:>9}  {:>14.4}  {:>10.4}",
                        p.threshold.to_string(),
                        p.mean_classification_accuracy,
                        p.mean_prediction_accuracy
                    );
                }
                println!("best threshold {}", sweep.best_threshold);
                if let Some(dir) = &args.out {
                    write_json(dir, "sweep.json", &sweep)?;
                }
            } else {
                let sweep = threshold_sweep(&t, &ds, &cfg, &thresholds)?;
                let reports = sweep
                    .points
                    .iter()
                    .map(|p| classify(&t, &ds, &p.best_weights, p.threshold, cfg.seed))
                    .collect::<simnet::Result<Vec<_>>>()?;
                println!("{:>9}  {:>8}  weights", "threshold", "accuracy");
                for p in &sweep.points {
                    println!(
                        "{:>9}  {:>8.4}  {}",
                        p.threshold.to_string(),
                        p.accuracy,
                        p.best_weights
                    );
                }
                println!("best threshold {}\n", sweep.best_threshold);
                let breakdown = unlabeled_report(&reports, &persistent_isolates(&reports));
                print!("{}", breakdown_table(&breakdown));
                if let Some(dir) = &args.out {
                    write_json(dir, "sweep.json", &sweep)?;
                    write_json(dir, "unlabeled.json", &breakdown)?;
                }
            }
        }
        Command::Crossval(args) => {
            let (ds, t) = load_with_tensor(&args.tensor)?;
            let cfg = search_config(&args.search, args.threshold, args.tensor.seed)?;
            let r = kfold_crossval(&t, &ds, args.k, &cfg)?;
            print!("{}", r.to_table());
            if let Some(dir) = &args.out {
                write_json(dir, "crossval.json", &r)?;
            }
        }
        Command::Export(args) => {
            let (ds, t) = load_with_tensor(&args.tensor)?;
            let c = classify_full(&t, &ds, &args.weights, args.threshold, args.tensor.seed)?;
            if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            let dot = export_graph(&c.graph, &c.partition, &ds, &args.out)?;
            println!("wrote {} and {}", args.out.display(), dot.display());
        }
        Command::Generate(args) => {
            let mut cfg =
                PlantedConfig::new(args.families, args.per_family, args.mutation, args.seed);
            if let Some(f) = args.noise {
                cfg = cfg.with_noise(f);
            }
            let ds = generate_planted(&cfg)?;
            ds.save(&args.out)?;
            println!("wrote {} samples to {}", ds.len(), args.out.display());
        }
        Command::Run(args) => {
            let cfg = RunConfig {
                dataset_path: args.tensor.data.dataset,
                threshold_percent: to_percent(args.threshold)?,
                iterations: args.search.iterations,
                learning_rate: args.search.learning_rate,
                k_folds: args.k,
                seed: args.tensor.seed,
                output_dir: args.out,
                cache_path: args.tensor.cache,
                skip_invalid: args.tensor.data.skip_invalid,
            };
            let out = run_pipeline(&cfg)?;
            let r = &out.report;
            println!("accuracy     {:.4}", r.classification.accuracy);
            println!("weights      {}", r.weights);
            println!("modularity   {:.4}", r.classification.modularity);
            if let Some(cv) = &r.crossval {
                println!(
                    "crossval     {:.4} (k = {})",
                    cv.mean_prediction_accuracy, cv.k
                );
            }
            println!("wrote {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn classify_error(e: &simnet::Error) -> u8 {
    use simnet::Error::*;
    match e {
        InvalidConfig(_) | InvalidThreshold(_) | InvalidWeights(_) => EXIT_USAGE,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_PIPELINE,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<simnet::pipeline::PipelineError>() {
            return classify_error(&e.source);
        }
        if let Some(e) = cause.downcast_ref::<simnet::Error>() {
            return classify_error(e);
        }
    }
    EXIT_PIPELINE
}

// Library errors already embed their sources; only append causes that add
// something new.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
