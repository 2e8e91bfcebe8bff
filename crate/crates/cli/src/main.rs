use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use codeanomaly::corpus::{javap_to_listing, Corpus, IngestConfig};
use codeanomaly::detect::{
    autoencoder_scores, compiler_induced_detect, iforest_fit_score, lof_scores, AnomalyScoreSet, AutoencoderConfig,
    IForestConfig, LofConfig, Normalization,
};
use codeanomaly::features::{extract_features, FeatureMode, FeatureSet, NGramParams};
use codeanomaly::parser::supported_subset;
use codeanomaly::preprocess::{model_path, preprocess, PreprocessConfig};
use codeanomaly::report::{emit_report, run_experiment, Experiment, PipelineConfig, Report, ReportError, ReportFormat};
use codeanomaly::synth::{generate, SynthConfig};

/// Anomaly detection over Kotlin syntax trees and JVM bytecode.
#[derive(Parser)]
#[command(name = "codeanomaly", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse sources, tree files and bytecode listings into a corpus directory.
    Ingest(IngestArgs),
    /// Convert `javap -c` output into the bytecode listing format.
    ConvertJavap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vectorize a corpus.
    Features(FeaturesArgs),
    /// Standardize vectors and project them with PCA.
    Preprocess(PreprocessArgs),
    /// Score vectors with an outlier detector.
    Detect(DetectCommand),
    /// Run or render a whole experiment.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Attach tags to the records of a unit in a report.
    Tag(TagArgs),
    /// Print the supported Kotlin subset as JSON.
    Grammar,
    /// Print the default pipeline configuration as TOML.
    Config,
    /// Write a generated corpus with planted anomalies.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        functions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_planted: bool,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Directory searched recursively for `.kt` files.
    #[arg(long)]
    src: Option<PathBuf>,
    /// Syntax trees in the neutral JSONL format.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Bytecode listing.
    #[arg(long)]
    bytecode: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    mode: FeatureMode,
    #[arg(long, default_value_t = 3)]
    nmax: usize,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    min_df: usize,
    #[arg(long, default_value_t = 0.5)]
    max_df: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Number of principal components; 0 skips the projection.
    #[arg(long, default_value_t = 20)]
    pca_k: usize,
    /// Leave binary metrics unscaled.
    #[arg(long)]
    keep_binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Lof,
    Iforest,
    Autoencoder,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct DetectCommand {
    #[command(subcommand)]
    command: Option<DetectSub>,
    #[command(flatten)]
    args: DetectArgs,
}

#[derive(Subcommand)]
enum DetectSub {
    /// Compare tree and bytecode scores of linked units.
    CompilerInduced(CompilerArgs),
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    /// Fraction flagged by LOF or Isolation Forest.
    #[arg(long)]
    contamination: Option<f64>,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 256)]
    subsample: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 3.0)]
    rms_multiplier: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompilerArgs {
    #[arg(long)]
    tree_scores: PathBuf,
    #[arg(long)]
    bytecode_scores: PathBuf,
    /// Links JSON file or a corpus directory.
    #[arg(long)]
    links: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    delta: f64,
    /// Compare raw scores instead of max-normalized ones.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PipelineCommand {
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        experiment: Experiment,
        /// TOML or JSON configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Drop the records of these units.
        #[arg(long)]
        exclude: Vec<String>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    unit: String,
    #[arg(long = "tag", required = true)]
    tags: Vec<String>,
    /// Reject tags outside the vocabulary.
    #[arg(long)]
    strict: bool,
    /// Output file; the report is rewritten in place when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error and the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure { code: e.exit_code() as u8, error: e.into() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, error: anyhow!(message.into()) }
}

/// Writes to standard output, treating a closed pipe as success.
fn emit(text: &str) -> anyhow::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn ingest(args: IngestArgs) -> Result<(), Failure> {
    if args.src.is_none() && args.trees.is_none() {
        return Err(config_error("ingest needs --src or --trees"));
    }
    let config = IngestConfig { src: args.src, trees: args.trees, bytecode: args.bytecode };
    let corpus = Corpus::ingest(&config).context("ingest failed")?;
    corpus.save(&args.out).context("saving corpus")?;
    let m = &corpus.manifest;
    println!(
        "corpus {}: {} functions, {} classes ({} linked), {} files skipped",
        m.corpus_id,
        m.function_count,
        m.class_count,
        m.linked_class_count,
        m.skipped.len()
    );
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<(), Failure> {
    let params = NGramParams { n_max: args.nmax, window: args.window, min_df: args.min_df, max_df_ratio: args.max_df };
    if params.n_max == 0 || params.window < params.n_max {
        return Err(config_error("need 1 <= --nmax <= --window"));
    }
    let corpus = Corpus::load(&args.corpus).context("loading corpus")?;
    let set = extract_features(&corpus, args.mode, &params).context("feature extraction failed")?;
    set.save(&args.out).context("saving vectors")?;
    println!("{} vectors of dimension {}", set.meta.count, set.meta.dimension);
    Ok(())
}

fn preprocess_cmd(args: PreprocessArgs) -> Result<(), Failure> {
    let set = FeatureSet::load(&args.vectors).context("loading vectors")?;
    let config = PreprocessConfig { pca_k: args.pca_k, scale_binary: !args.keep_binary };
    let (out, model) = preprocess(&set, &config).context("preprocessing failed")?;
    out.save(&args.out).context("saving vectors")?;
    model.save(&model_path(&args.out)).context("saving model")?;
    if let Some(pca) = &model.pca {
        println!("{} components explain {:.4} of the variance", pca.k, pca.cumulative_explained_variance());
    }
    Ok(())
}

fn detect(cmd: DetectCommand) -> Result<(), Failure> {
    if let Some(DetectSub::CompilerInduced(args)) = cmd.command {
        return compiler_induced(args);
    }
    let a = cmd.args;
    let (Some(vectors), Some(algo), Some(out)) = (a.vectors, a.algo, a.out) else {
        return Err(config_error("detect needs --vectors, --algo and --out"));
    };
    let set = FeatureSet::load(&vectors).context("loading vectors")?;
    let scores = match algo {
        Algo::Lof => {
            let config = LofConfig { n_neighbors: a.k, contamination: a.contamination.unwrap_or(0.001) };
            lof_scores(&set.dense(), &set.unit_ids, &config).context("LOF failed")?
        }
        Algo::Iforest => {
            let config = IForestConfig {
                n_estimators: a.trees,
                subsample: a.subsample,
                contamination: a.contamination.unwrap_or(0.0001),
                seed: a.seed,
            };
            iforest_fit_score(&set.dense(), &set.unit_ids, &config).context("Isolation Forest failed")?
        }
        Algo::Autoencoder => {
            let config = AutoencoderConfig {
                compression_rate: a.rate,
                epochs: a.epochs,
                minibatch: a.batch,
                learning_rate: a.learning_rate,
                seed: a.seed,
            };
            config.validate().map_err(|e| config_error(e.to_string()))?;
            let (scores, summary) =
                autoencoder_scores(&set.vectors, &set.unit_ids, &config, a.rms_multiplier).context("autoencoder failed")?;
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".model.json");
            write_json(&out.with_file_name(name), &summary)?;
            scores
        }
    };
    scores.save(&out).context("saving scores")?;
    println!("{}: {} of {} flagged, threshold {}", scores.detector, scores.flagged.len(), scores.scores.len(), scores.threshold);
    Ok(())
}

fn compiler_induced(args: CompilerArgs) -> Result<(), Failure> {
    let tree = AnomalyScoreSet::load(&args.tree_scores).context("loading tree scores")?;
    let bytecode = AnomalyScoreSet::load(&args.bytecode_scores).context("loading bytecode scores")?;
    let links: Vec<(String, Vec<String>)> = if args.links.is_dir() {
        Corpus::load(&args.links).context("loading corpus")?.links()
    } else {
        let text = fs::read_to_string(&args.links).with_context(|| format!("reading {}", args.links.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.links.display()))?
    };
    if links.is_empty() {
        return Err(ReportError::NoLinkedUnits.into());
    }
    let normalization = if args.raw { Normalization::None } else { Normalization::Max };
    let result = compiler_induced_detect(&tree, &bytecode, &links, args.delta, normalization);
    if result.compared == 0 {
        return Err(ReportError::NoLinkedUnits.into());
    }
    write_json(&args.out, &result)?;
    println!("{} of {} compared classes diverge", result.divergences.len(), result.compared);
    Ok(())
}

fn pipeline(cmd: PipelineCommand) -> Result<(), Failure> {
    match cmd {
        PipelineCommand::Run { corpus, experiment, config, out } => {
            let config = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            let corpus = Corpus::load(&corpus).context("loading corpus")?;
            let report = run_experiment(experiment, &corpus, &config, &out)?;
            println!("{experiment}: {} records written to {}", report.records.len(), out.display());
        }
        PipelineCommand::Report { records, format, exclude, out } => {
            let mut report = Report::load(&records)?;
            report.records.retain(|r| !exclude.contains(&r.unit_id));
            let text = emit_report(&report, format);
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => emit(&text)?,
            }
        }
    }
    Ok(())
}

fn tag(args: TagArgs) -> Result<(), Failure> {
    let mut report = Report::load(&args.report)?;
    report.tag(&args.unit, &args.tags, args.strict)?;
    report.save(args.out.as_deref().unwrap_or(&args.report))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::ConvertJavap { input, out } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            fs::write(&out, javap_to_listing(&text)).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Features(args) => features(args),
        Command::Preprocess(args) => preprocess_cmd(args),
        Command::Detect(cmd) => detect(cmd),
        Command::Pipeline { command } => pipeline(command),
        Command::Tag(args) => tag(args),
        Command::Grammar => {
            let json = serde_json::to_string_pretty(&supported_subset()).map_err(anyhow::Error::from)?;
            Ok(emit(&(json + "\n"))?)
        }
        Command::Config => {
            Ok(emit(&PipelineConfig::default().to_toml())?)
        }
        Command::Synth { out, functions, seed, no_planted } => {
            let corpus = generate(&SynthConfig { functions, seed, planted: !no_planted });
            corpus.write(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} files and classes.txt written to {}", corpus.files.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
