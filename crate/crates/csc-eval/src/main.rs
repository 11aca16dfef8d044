//! Thin CLI over the library: run evaluation grids, re-score replay logs,
//! and inspect datasets, corpora, and rendered prompts.
//!
//! Exit codes: 0 full success, 2 completed with partial failures (failed
//! sentences in a run, violations found by corpus validate), 1 fatal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csc_eval::corpus::{validate_corpus_file, Corpus, FeatureSet};
use csc_eval::dataset::{select_exemplars, Dataset, Split};
use csc_eval::prompt::{PromptBuilder, PromptConfig, Regime, TemplateStore};
use csc_eval::runner::{run_eval, replay_score, RunConfig};

#[derive(Parser)]
#[command(name = "csc-eval", version, about = "Chinese Spell Checking evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured evaluation grid and write reports
    Run(RunArgs),
    /// Re-score a recorded replay log against a dataset, offline
    Replay(ReplayArgs),
    /// Dataset inspection
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Character-corpus inspection
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Prompt inspection
    #[command(subcommand)]
    Prompt(PromptCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Evaluate only the named dataset entry
    #[arg(long)]
    dataset: Option<String>,
    /// Force a single regime (zero_shot, one_shot, few_shot)
    #[arg(long)]
    regime: Option<String>,
    /// Force a single feature set, comma-separated; "none" for empty
    #[arg(long)]
    features: Option<String>,
    /// Override the backend kind
    #[arg(long)]
    backend: Option<String>,
    /// Override the worker count
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Replay log produced by a run (JSON lines)
    log: PathBuf,
    /// Dataset file the log was recorded against
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset name used in the printed report
    #[arg(long, default_value = "dataset")]
    name: String,
    /// Write the metrics JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Print sentence count, average length, and error counts
    Stats {
        path: PathBuf,
        #[arg(long, default_value = "dataset")]
        name: String,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Check every row and report all violations
    Validate { path: PathBuf },
}

#[derive(Subcommand)]
enum PromptCommand {
    /// Build and print the transcript for one sentence
    Render(RenderArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Character corpus (TSV)
    #[arg(long)]
    corpus: PathBuf,
    /// Sentence to build the query for
    #[arg(long)]
    sentence: String,
    #[arg(long, default_value = "zero_shot")]
    regime: String,
    /// Comma-separated features; "none" for no annotations
    #[arg(long, default_value = "phonetic,radical")]
    features: String,
    #[arg(long, default_value = "zh")]
    template: String,
    /// Train split for exemplar selection (one_shot/few_shot)
    #[arg(long)]
    train: Option<PathBuf>,
    /// Extra template files loaded on top of the bundled ones
    #[arg(long)]
    template_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    // help and version exit 0; bad usage exits 1; exit 2 stays reserved for
    // partial failures reported by the subcommands
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = if error.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
            let _ = error.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Dataset(DatasetCommand::Stats { path, name }) => cmd_stats(path, name),
        Command::Corpus(CorpusCommand::Validate { path }) => cmd_validate(path),
        Command::Prompt(PromptCommand::Render(args)) => cmd_render(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(name) = &args.dataset {
        config.select_dataset(name)?;
    }
    if let Some(regime) = &args.regime {
        config.override_regime(regime);
    }
    if let Some(features) = &args.features {
        config.override_features(features);
    }
    if let Some(kind) = &args.backend {
        config.override_backend_kind(kind)?;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let report = run_eval(&config)?;
    println!("dataset\tregime\tfeatures\tdet_f1\tcorr_f1\tlen_ok\tfailures");
    for cell in &report.cells {
        println!(
            "{}\t{}\t{}\t{:.1}\t{:.1}\t{}/{}\t{}",
            cell.dataset,
            cell.regime.name(),
            cell.features,
            cell.display.detection.f1,
            cell.display.correction.f1,
            cell.metrics.length_unchanged_count,
            cell.metrics.sentence_count,
            cell.failure_count,
        );
    }
    println!("report: {}", config.output_dir.join("report.json").display());
    Ok(if report.total_failures() > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let dataset = Dataset::load(&args.dataset, &args.name, Split::Test)?;
    let metrics = replay_score(&args.log, &dataset)?;
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    match args.out {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(path: PathBuf, name: String) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let dataset = Dataset::load(&path, &name, Split::Test)?;
    let stats = dataset.stats();
    println!("dataset\tsentences\tavg_length\terrors\terroneous_sentences");
    println!(
        "{}\t{}\t{:.1}\t{}\t{}",
        dataset.name,
        stats.sentence_count,
        stats.avg_length,
        stats.error_count,
        stats.erroneous_sentence_count,
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: PathBuf) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let report = validate_corpus_file(&path)?;
    println!(
        "{}: {} rows, {} valid, {} violations",
        path.display(),
        report.rows,
        report.valid,
        report.violations.len(),
    );
    for violation in &report.violations {
        println!("  {violation}");
    }
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_render(args: RenderArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let corpus = Corpus::load(&args.corpus)?;
    let templates = match &args.template_dir {
        Some(dir) => TemplateStore::builtin_with_dir(dir)?,
        None => TemplateStore::builtin(),
    };
    let regime = Regime::parse(&args.regime)?;
    let features = FeatureSet::parse(&args.features)?;
    let exemplars = if regime.exemplar_count() > 0 {
        let train_path = args.train.as_ref().ok_or(
            "this regime needs exemplars; pass --train with a training split",
        )?;
        let train = Dataset::load(train_path, "train", Split::Train)?;
        let picked = select_exemplars(&train, &corpus)?.into_vec();
        picked[..regime.exemplar_count()].to_vec()
    } else {
        Vec::new()
    };
    let config = PromptConfig {
        regime,
        features,
        exemplars,
        template_id: args.template.clone(),
    };
    let builder = PromptBuilder::new(&corpus, &templates);
    let transcript = builder.build_transcript(&args.sentence, &config)?;
    print!("{}", transcript.render_text());
    Ok(ExitCode::SUCCESS)
}
