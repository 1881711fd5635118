//! The `macneto <verb>` command surface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::{pair_features, write_synth_corpus};
use crate::error::CliError;
use crate::features::{distributions_to_csv, extract_app, FeatureOptions, InstructionVocabulary};
use crate::ingest::manifest::{load_app_source, load_manifest_apps};
use crate::ingest::{load_textual_app, AppModel, CorpusManifest};
use crate::keywords::{fit_tfidf, infer_keywords, Keyword, TokenizerConfig};
use crate::model::{fit_model, PipelineConfig, TrainedModel};
use crate::search::{kfold_evaluate, EvalConfig, RankedResult, System};
use crate::synth::{generate_corpus, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "macneto", version, about = "Obfuscation-resilient search over app bytecode")]
pub struct Cli {
    /// Maximum worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log progress (one line per training epoch) to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one row of instruction counts per app as CSV.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus of apps and obfuscated counterparts.
    Synth(SynthArgs),
    /// Fit a model on the pairs of a corpus.
    Train(TrainArgs),
    /// Rank indexed apps against a query app.
    Search(SearchArgs),
    /// Run the k-fold evaluation of the retrieval systems.
    Evaluate(EvaluateArgs),
    /// Suggest keywords for a query app from its neighbours' descriptions.
    Keywords(KeywordsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Feature options as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of original apps; each gets an obfuscated counterpart.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Directory that receives the manifest and app records.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator options as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "macneto")]
    pub system: System,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline options as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus whose un-paired apps form the search space.
    #[arg(long)]
    pub manifest: PathBuf,
    /// App id from the manifest, or a path to an app.
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Repeat to pick several systems; all three when absent.
    #[arg(long)]
    pub system: Vec<System>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory that receives report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation options as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Debug, Args)]
pub struct KeywordsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub query: String,
    /// Neighbours whose descriptions are pooled.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Keywords returned.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

/// Parses `--config`: inline JSON when it starts with `{`, otherwise a file.
pub fn load_config<T: DeserializeOwned + Default>(spec: Option<&str>) -> Result<T, CliError> {
    let Some(spec) = spec else {
        return Ok(T::default());
    };
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).map_err(|e| CliError::Usage(format!("--config {spec}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--config: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn stdout_error(e: std::io::Error) -> Result<(), CliError> {
    // a closed reader (`| head`) is not a failure
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        return Ok(());
    }
    Err(CliError::Internal(format!("stdout: {e}")))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
        .or_else(stdout_error)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_apps(manifest_path: &Path, vocab: &InstructionVocabulary) -> Result<(CorpusManifest, Vec<AppModel>), CliError> {
    let manifest = CorpusManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let apps = load_manifest_apps(&manifest, base, vocab)?;
    Ok((manifest, apps))
}

fn load_query(spec: &str, apps: &[AppModel], vocab: &InstructionVocabulary) -> Result<AppModel, CliError> {
    if let Some(app) = apps.iter().find(|a| a.app_id == spec) {
        return Ok(app.clone());
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "query `{spec}` is neither an app in the manifest nor an existing path"
        )));
    }
    if path.is_file() {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        if !bytes.starts_with(&[0xCA, 0xFE, 0xBA, 0xBE]) {
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Data(format!("{spec} is neither a class file nor UTF-8 text")))?;
            return Ok(load_textual_app(&text, vocab)?);
        }
    }
    let stem = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
    Ok(load_app_source(&stem, path, vocab)?)
}

/// A loaded model with its search space built from the manifest's un-paired apps.
struct SearchSpace {
    model: TrainedModel,
    apps: Vec<AppModel>,
    index: crate::search::SearchIndex,
}

fn search_space(model: &Path, manifest: &Path, vocab: &InstructionVocabulary) -> Result<SearchSpace, CliError> {
    let model = TrainedModel::load(model, vocab)?;
    let (_, apps) = load_apps(manifest, vocab)?;
    let entries: Vec<(String, Vec<f64>)> = apps
        .iter()
        .filter(|a| a.pair_of.is_none())
        .map(|a| (a.app_id.clone(), model.config.features.extract(a, vocab)))
        .collect();
    let index = model.build_index(&entries)?;
    Ok(SearchSpace { model, apps, index })
}

fn run_search(space: &SearchSpace, query: &str, n: usize, vocab: &InstructionVocabulary) -> Result<RankedResult, CliError> {
    let app = load_query(query, &space.apps, vocab)?;
    let features = space.model.config.features.extract(&app, vocab);
    Ok(space.model.query(&space.index, &features, n)?.with_query_id(app.app_id))
}

fn cmd_ingest(args: &IngestArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let options: FeatureOptions = load_config(args.config.as_deref())?;
    let (_, apps) = load_apps(&args.manifest, vocab)?;
    if apps.is_empty() {
        return Err(CliError::Data(format!("{} lists no apps", args.manifest.display())));
    }
    let dists: Vec<_> = apps.iter().map(|a| extract_app(a, vocab, options.entry_policy)).collect();
    let rows: Vec<_> = apps.iter().zip(&dists).map(|(a, d)| (a.app_id.as_str(), d)).collect();
    let csv = distributions_to_csv(&rows, vocab);
    match &args.out {
        Some(path) => write_file(path, &csv),
        None => emit(out, &csv),
    }
}

#[derive(Serialize)]
struct SynthSummary {
    manifest: PathBuf,
    pairs: usize,
    seed: u64,
}

fn cmd_synth(args: &SynthArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config: SynthConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.obfuscation.seed = seed;
    }
    let pairs = generate_corpus(args.count, &config, vocab)?;
    let manifest = write_synth_corpus(&pairs, &args.out, &format!("synth-{}", config.seed), vocab)?;
    emit(
        out,
        &to_json(&SynthSummary {
            manifest,
            pairs: pairs.len(),
            seed: config.seed,
        }),
    )
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: &'a Path,
    system: System,
    training_pairs: usize,
    epochs: usize,
    first_loss: Option<f64>,
    final_loss: Option<f64>,
    warnings: &'a [String],
}

fn cmd_train(args: &TrainArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config: PipelineConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.training.seed = seed;
    }
    let (_, apps) = load_apps(&args.manifest, vocab)?;
    let pairs = pair_features(&apps, &config.features, vocab)?;
    let model = fit_model(&pairs, args.system, &config, &vocab.fingerprint())?;
    model.save(&args.out)?;
    emit(
        out,
        &to_json(&TrainSummary {
            model: &args.out,
            system: model.system,
            training_pairs: model.metadata.training_pairs,
            epochs: model.loss_history.len(),
            first_loss: model.loss_history.first().copied(),
            final_loss: model.loss_history.last().copied(),
            warnings: &model.metadata.warnings,
        }),
    )
}

fn cmd_search(args: &SearchArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let space = search_space(&args.model, &args.manifest, vocab)?;
    let result = run_search(&space, &args.query, args.n, vocab)?;
    emit(out, &to_json(&result))
}

fn cmd_evaluate(args: &EvaluateArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config: EvalConfig = load_config(args.config.as_deref())?;
    if let Some(k) = args.folds {
        config.folds = k;
    }
    if !args.system.is_empty() {
        config.systems = args.system.clone();
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (manifest, apps) = load_apps(&args.manifest, vocab)?;
    let pairs = pair_features(&apps, &config.pipeline.features, vocab)?;
    let mut report = kfold_evaluate(&pairs, &config, &vocab.fingerprint())?;
    if manifest.corpus_id.starts_with("synth") {
        report
            .notes
            .push("obfuscated apps come from the built-in simulated obfuscator, not a commercial one".into());
    }
    let json = report.to_json();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_file(&dir.join("report.json"), &json)?;
        write_file(&dir.join("report.txt"), &report.render_table())?;
    }
    emit(out, &json)
}

#[derive(Serialize)]
struct KeywordOutput {
    query_id: Option<String>,
    retrieved: Vec<String>,
    keywords: Vec<Keyword>,
}

fn cmd_keywords(args: &KeywordsArgs, vocab: &InstructionVocabulary, out: &mut dyn Write) -> Result<(), CliError> {
    let space = search_space(&args.model, &args.manifest, vocab)?;
    let descriptions: Vec<&str> = space
        .apps
        .iter()
        .filter(|a| a.pair_of.is_none())
        .filter_map(|a| a.description.as_deref())
        .collect();
    let tfidf = fit_tfidf(&descriptions, TokenizerConfig::default())?;
    let result = run_search(&space, &args.query, args.n, vocab)?;
    let retrieved: Vec<String> = result.hits.iter().map(|h| h.app_id.clone()).collect();
    let pooled: Vec<&str> = retrieved
        .iter()
        .filter_map(|id| space.apps.iter().find(|a| &a.app_id == id))
        .filter_map(|a| a.description.as_deref())
        .collect();
    let keywords = infer_keywords(&tfidf, &pooled, args.top);
    emit(
        out,
        &to_json(&KeywordOutput {
            query_id: result.query_id,
            retrieved,
            keywords,
        }),
    )
}

/// Runs a parsed command, writing machine-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let dispatch = |out: &mut dyn Write| match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, &vocab, out),
        Command::Synth(a) => cmd_synth(a, &vocab, out),
        Command::Train(a) => cmd_train(a, &vocab, out),
        Command::Search(a) => cmd_search(a, &vocab, out),
        Command::Evaluate(a) => cmd_evaluate(a, &vocab, out),
        Command::Keywords(a) => cmd_keywords(a, &vocab, out),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let mut buffer = Vec::new();
            pool.install(|| dispatch(&mut buffer))?;
            out.write_all(&buffer).or_else(stdout_error)
        }
        None => dispatch(out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors go to stderr as a single JSON line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).to_line());
            return 1;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}
