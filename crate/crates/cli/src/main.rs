use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use affeval::data_model::{Dataset, SplitSet, Task};
use affeval::harness::{generate_dataset, generate_predictions, SynthSpec};
use affeval::ingest::{self, AnnotationSchema, ReportFormat};
use affeval::metrics::EvalSet;
use affeval::partition::{partition, validate_partition, PartitionSpec};
use affeval::report::{build_report, Leaderboard, ReportMetadata};

/// Subject-independent partitioning and fairness-aware evaluation for facial
/// affect datasets.
#[derive(Debug, Parser)]
#[command(name = "affeval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split annotations into train/valid/test and write a manifest.
    Partition(PartitionArgs),
    /// Score predictions on one set of a manifest.
    Evaluate(EvaluateArgs),
    /// Check a manifest for subject independence and split ratios.
    Validate(ValidateArgs),
    /// Merge JSON reports into a leaderboard.
    Report(ReportArgs),
    /// Write a synthetic annotation table, and optionally predictions.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Annotation table (CSV with header).
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    task: Task,
    /// Number of expression classes; defaults to the largest class + 1.
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Target train,valid,test shares.
    #[arg(long, value_parser = parse_ratios, default_value = "0.55,0.15,0.30")]
    ratios: [f64; 3],
    /// Valence-arousal grid bin width.
    #[arg(long, default_value_t = 0.2)]
    bin_width: f64,
    /// Allowed deviation of each set's share from its ratio.
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Manifest output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Prediction table (CSV with header).
    #[arg(long)]
    predictions: PathBuf,
    /// Partition manifest; without it the whole dataset is scored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    set: SplitSet,
    /// Model name shown in reports; defaults to the predictions file stem.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON reports written by `evaluate`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    task: Task,
    #[arg(long, default_value_t = 100)]
    subjects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prediction accuracy (expr) or true positive rate (au).
    #[arg(long)]
    accuracy: Option<f64>,
    /// Predictions copy the ground truth.
    #[arg(long)]
    perfect: bool,
    /// Annotation output path.
    #[arg(long)]
    out: PathBuf,
    /// Prediction output path.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated shares, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| format!("`{p}` is not a number"))?;
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("shares sum to {sum}, not 1"));
    }
    Ok(out)
}

fn load_dataset(data: &DataArgs) -> Result<Dataset> {
    let schema = AnnotationSchema {
        num_classes: data.classes,
        ..AnnotationSchema::default()
    };
    let loaded = ingest::load_annotations(&data.annotations, &schema, data.task)
        .with_context(|| format!("loading {}", data.annotations.display()))?;
    let s = &loaded.stats;
    if s.dropped_automatic > 0 {
        eprintln!(
            "note: {} of {} rows dropped as automatically annotated",
            s.dropped_automatic, s.rows
        );
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.dataset)
}

fn spec_from(split: &SplitArgs, seed: u64) -> PartitionSpec {
    PartitionSpec {
        ratios: split.ratios,
        seed,
        tolerance: split.tolerance,
        bin_width: split.bin_width,
        ..PartitionSpec::default()
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_partition(args: &PartitionArgs) -> Result<ExitCode> {
    let dataset = load_dataset(&args.data)?;
    let spec = spec_from(&args.split, args.seed);
    let result = partition(&dataset, &spec)?;
    ingest::save_manifest(&result.partition, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", result.quality);
    if !result.quality.passes(spec.tolerance) {
        eprintln!(
            "warning: a set misses its target share by more than {}",
            spec.tolerance
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let dataset = load_dataset(&args.data)?;
    let predictions = ingest::load_predictions(&args.predictions, args.data.task)
        .with_context(|| format!("loading {}", args.predictions.display()))?;
    let manifest = args
        .manifest
        .as_ref()
        .map(|p| ingest::load_manifest(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let scope = manifest.as_ref().map(|m| m.members(args.set));
    if let Some(ids) = &scope {
        if ids.is_empty() {
            bail!("set {} of the manifest is empty", args.set);
        }
    }
    let set = EvalSet::new(&dataset, &predictions, scope.as_deref())?;
    let model = args.model.clone().unwrap_or_else(|| {
        args.predictions
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    let metadata = ReportMetadata {
        dataset: Some(args.data.annotations.display().to_string()),
        manifest: args.manifest.as_ref().map(|p| p.display().to_string()),
        set: args.manifest.as_ref().map(|_| args.set),
        samples: 0,
    };
    let report = build_report(&set, &model, metadata)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(
        &ingest::write_report(&report, args.format)?,
        args.out.as_deref(),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let dataset = load_dataset(&args.data)?;
    let manifest = ingest::load_manifest(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let spec = spec_from(&args.split, 0);
    let quality = validate_partition(&dataset, &manifest, &spec)?;
    print!("{quality}");
    if quality.passes(spec.tolerance) {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        if !quality.subject_independent {
            println!("FAIL: subjects appear in more than one set");
        }
        if quality.max_ratio_error() > spec.tolerance {
            println!(
                "FAIL: ratio error {:.4} exceeds tolerance {}",
                quality.max_ratio_error(),
                spec.tolerance
            );
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_report(args: &ReportArgs) -> Result<ExitCode> {
    let reports = args
        .reports
        .iter()
        .map(|p| ingest::load_report(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let board = Leaderboard::new(reports)?;
    let text = match args.format {
        ReportFormat::Json => board.to_json()?,
        ReportFormat::Markdown => board.to_markdown(),
    };
    emit(&text, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let mut spec = SynthSpec {
        subjects: args.subjects,
        seed: args.seed,
        perfect: args.perfect,
        ..SynthSpec::default()
    };
    if let Some(a) = args.accuracy {
        spec.accuracy = a;
    }
    let dataset = generate_dataset(&spec, args.task)?;
    let mut buf = Vec::new();
    ingest::write_annotations(&dataset, &mut buf)?;
    fs::write(&args.out, buf).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.predictions {
        let predictions = generate_predictions(&dataset, &spec)?;
        let mut buf = Vec::new();
        ingest::write_predictions(&predictions, dataset.vocabulary(), &mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{} samples from {} subjects", dataset.len(), args.subjects);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
