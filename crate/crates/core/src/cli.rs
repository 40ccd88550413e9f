//! Command-line interface. [`run`] parses arguments, dispatches to a
//! command and maps failures to exit codes: 0 success, 1 usage error,
//! 2 runtime error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ablation::{run_ablation, AblationSpec, Variant};
use crate::archive::{ModelArchive, TrainingMeta};
use crate::corpus::{build_vocabulary, canonicalize_iob1, iob1_to_iob2, read_corpus, save_corpus, write_corpus, Schema, Sentence};
use crate::embeddings::{load_pretrained, WindowConfig};
use crate::error::Error;
use crate::evaluator::{evaluate, nearest_neighbors, EvalReport};
use crate::model::{Model, ModelConfig};
use crate::network::{Architecture, NetworkConfig};
use crate::synth::{generate, SynthConfig};
use crate::trainer::{tag_corpus, train, EpochRecord, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    /// The library error behind a runtime failure, if any.
    pub source: Option<Error>,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
            source: None,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        // A rejected hyperparameter is a usage problem, not a runtime one.
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: e.to_string(),
            source: Some(e),
        }
    }
}

/// Attaches the offending flag to a runtime error.
fn flagged<T>(flag: &str, r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError {
        code: EXIT_RUNTIME,
        message: format!("{flag}: {e}"),
        source: Some(e),
    })
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    Error::io(path, e).into()
}

pub type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "mclner", version, about = "Neural named-entity tagger for morphologically complex languages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write an archive plus an epoch log.
    Train(TrainArgs),
    /// Append predicted tags to a corpus.
    Tag(TagArgs),
    /// Score predictions against gold tags.
    Eval(EvalArgs),
    /// Nearest neighbours of a word or root in a trained model.
    Neighbors(NeighborsArgs),
    /// Generate a synthetic agglutinative corpus.
    Synth(SynthArgs),
    /// Train several variants on synthetic data and print a score grid.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Plain,
    Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    Words,
    Roots,
}

#[derive(Debug, Clone, Args)]
pub struct SizeArgs {
    #[arg(long, value_enum, default_value = "plain")]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Word embedding size; also the root embedding size unless --root-dim is given.
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long)]
    pub root_dim: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub tag_dim: usize,
    #[arg(long, default_value_t = 300)]
    pub hidden: usize,
    #[arg(long, default_value_t = 50)]
    pub tensor_size: usize,
    #[arg(long, default_value_t = 3)]
    pub factors: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Stop after this many epochs without a dev F1 improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Keep word case instead of lowercasing surface forms.
    #[arg(long)]
    pub keep_case: bool,
}

impl SizeArgs {
    fn model_config(&self, use_root: bool, use_tag: bool, use_features: bool) -> ModelConfig {
        ModelConfig {
            window: WindowConfig {
                window: self.window,
                word_dim: self.dim,
                root_dim: self.root_dim.unwrap_or(self.dim),
                tag_dim: self.tag_dim,
                use_root,
                use_tag_embedding: use_tag,
                use_features,
            },
            network: NetworkConfig {
                architecture: match self.arch {
                    ArchArg::Plain => Architecture::Plain,
                    ArchArg::Tensor => Architecture::Tensor,
                },
                hidden_size: self.hidden,
                tensor_size: self.tensor_size,
                factors: self.factors,
                extra_hidden: None,
            },
        }
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            l2: self.l2,
            epochs: self.epochs,
            seed,
            shuffle: true,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Epoch log path; defaults to the archive path with `.log.tsv` appended.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value = "surface,root,morph,tag")]
    pub schema: String,
    /// Input tags are IOB1 and are converted to IOB2 on load.
    #[arg(long)]
    pub iob1: bool,
    #[arg(long)]
    pub use_root: bool,
    #[arg(long)]
    pub use_tag_emb: bool,
    #[arg(long)]
    pub use_features: bool,
    #[arg(long)]
    pub pretrained_words: Option<PathBuf>,
    #[arg(long)]
    pub pretrained_roots: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sizes: SizeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TagArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    /// Columns of the input; a tag column is passed through unchanged.
    #[arg(long, default_value = "surface,root,morph")]
    pub schema: String,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted file; the last column of each token line is the predicted tag.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long, default_value = "surface,root,morph,tag")]
    pub schema: String,
    #[arg(long)]
    pub iob1: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct NeighborsArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub query: String,
    #[arg(short, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "words")]
    pub table: TableArg,
}

#[derive(Debug, Clone, Args)]
pub struct SynthKnobs {
    #[arg(long, default_value_t = 100)]
    pub roots: usize,
    #[arg(long, default_value_t = 10)]
    pub suffixes: usize,
    #[arg(long, default_value_t = 2)]
    pub max_chain: usize,
    #[arg(long, default_value_t = 30)]
    pub loc: usize,
    #[arg(long, default_value_t = 20)]
    pub org: usize,
    #[arg(long, default_value_t = 40)]
    pub per: usize,
    #[arg(long, default_value_t = 2)]
    pub max_name_len: usize,
    #[arg(long, default_value_t = 500)]
    pub sentences: usize,
    #[arg(long, default_value_t = 4)]
    pub min_len: usize,
    #[arg(long, default_value_t = 12)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.2)]
    pub density: f64,
}

impl SynthKnobs {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            n_roots: self.roots,
            n_suffixes: self.suffixes,
            max_suffix_chain: self.max_chain,
            gazetteer: [self.loc, self.org, self.per],
            max_name_len: self.max_name_len,
            n_sentences: self.sentences,
            min_sentence_len: self.min_len,
            max_sentence_len: self.max_len,
            entity_density: self.density,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Directory receiving train.txt, dev.txt and test.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub knobs: SynthKnobs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    /// Comma-separated variant names.
    #[arg(long, default_value = "NN,NN+root,NN+root+tag,NN+root+tensor")]
    pub variants: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
    #[command(flatten)]
    pub knobs: SynthKnobs,
    #[command(flatten)]
    pub sizes: SizeArgs,
}

fn schema(raw: &str) -> Result<Schema, CliError> {
    raw.parse()
        .map_err(|e: Error| CliError::usage(format!("--schema: {e}")))
}

fn load_corpus(flag: &str, path: &Path, schema: &Schema, iob1: bool) -> Result<Vec<Sentence>, CliError> {
    let mut sentences = flagged(flag, read_corpus(path, schema))?;
    if iob1 {
        flagged(flag, canonicalize_iob1(&mut sentences))?;
    }
    Ok(sentences)
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log.tsv");
    PathBuf::from(s)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> CliResult {
    let schema = schema(&args.schema)?;
    if !schema.has_tag() {
        return Err(CliError::usage("--schema: training data needs a tag column"));
    }
    if args.pretrained_roots.is_some() && !args.use_root {
        return Err(CliError::usage("--pretrained-roots requires --use-root"));
    }
    let train_set = load_corpus("--train", &args.train, &schema, args.iob1)?;
    let dev_set = load_corpus("--dev", &args.dev, &schema, args.iob1)?;
    let config = args
        .sizes
        .model_config(args.use_root, args.use_tag_emb, args.use_features);
    let vocab = build_vocabulary(&train_set, !args.sizes.keep_case, 1);
    let mut model = Model::new(config, vocab, args.seed)?;

    if let Some(path) = &args.pretrained_words {
        let cov = flagged(
            "--pretrained-words",
            load_pretrained(path, &mut model.tables.words, &model.vocab.words, model.vocab.lowercase_words),
        )?;
        log::info!("pretrained words: {} found, {} missing", cov.found, cov.missing);
    }
    if let (Some(path), Some(table)) = (&args.pretrained_roots, &mut model.tables.roots) {
        let cov = flagged("--pretrained-roots", load_pretrained(path, table, &model.vocab.roots, false))?;
        log::info!("pretrained roots: {} found, {} missing", cov.found, cov.missing);
    }

    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    let mut log_text = format!("{}\n", EpochRecord::HEADER);
    writeln!(out, "{}", EpochRecord::HEADER).map_err(|e| io_err(Path::new("<stdout>"), e))?;
    let mut write_failed = None;
    let outcome = train(&train_set, &dev_set, model, &args.sizes.train_config(args.seed), |r| {
        let row = r.to_row();
        log_text.push_str(&row);
        log_text.push('\n');
        if let Err(e) = writeln!(out, "{row}") {
            write_failed.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_failed {
        return Err(io_err(Path::new("<stdout>"), e));
    }
    fs::write(&log_path, log_text).map_err(|e| io_err(&log_path, e))?;
    let archive = ModelArchive::new(
        outcome.model,
        TrainingMeta {
            seed: args.seed,
            epoch: outcome.best_epoch,
            dev_f1: outcome.best_dev_f1,
        },
    );
    flagged("--out", archive.save(&args.out))?;
    log::info!(
        "selected epoch {} with dev F1 {:.2}; wrote {}",
        outcome.best_epoch,
        outcome.best_dev_f1,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_tag(args: &TagArgs, out: &mut dyn Write) -> CliResult {
    let schema = schema(&args.schema)?;
    let archive = flagged("--model", ModelArchive::load(&args.model))?;
    let sentences = flagged("--input", read_corpus(&args.input, &schema))?;
    let predicted = tag_corpus(&archive.model, &sentences)?;

    let mut original = Vec::new();
    write_corpus(&mut original, &sentences, &schema)?;
    let original = String::from_utf8(original).expect("corpus output is UTF-8");
    let mut tags = predicted.iter().flatten();
    let mut text = String::with_capacity(original.len() * 2);
    for line in original.lines() {
        text.push_str(line);
        if !line.is_empty() {
            text.push(' ');
            text.push_str(tags.next().expect("one prediction per token"));
        }
        text.push('\n');
    }
    match &args.output {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

/// Predicted tags from the last column, with the first column kept for
/// alignment checks.
fn read_predictions(path: &Path) -> Result<Vec<Vec<(String, String)>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields.first(), fields.last()) {
            (Some(first), Some(last)) if fields.len() >= 2 => current.push((first.to_string(), last.to_string())),
            (Some(_), _) => {
                return Err(CliError {
                    code: EXIT_RUNTIME,
                    message: format!("--predicted: line {line:?} needs a token and a tag"),
                    source: None,
                })
            }
            _ => {
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Scores a predicted file against a gold corpus. Predictions are read
/// from the last column; first columns must match the gold surfaces.
pub fn evaluate_files(gold: &Path, predicted: &Path, schema: &Schema, iob1: bool) -> Result<EvalReport, CliError> {
    if !schema.has_tag() {
        return Err(CliError::usage("--schema: gold data needs a tag column"));
    }
    let gold = load_corpus("--gold", gold, schema, iob1)?;
    let predicted = read_predictions(predicted)?;
    let mut tags = Vec::with_capacity(predicted.len());
    for (i, (g, p)) in gold.iter().zip(&predicted).enumerate() {
        if let Some(k) = g.tokens.iter().zip(p).position(|(t, (s, _))| t.surface != *s) {
            return Err(Error::Alignment {
                sentence: i + 1,
                message: format!(
                    "token {} is {:?} in gold but {:?} in prediction",
                    k + 1,
                    g.tokens[k].surface,
                    p[k].0
                ),
            }
            .into());
        }
        let raw: Vec<&str> = p.iter().map(|(_, t)| t.as_str()).collect();
        tags.push(if iob1 {
            iob1_to_iob2(&raw)?
        } else {
            raw.iter().map(|s| s.to_string()).collect()
        });
    }
    // Unequal sentence counts are reported by `evaluate`.
    for extra in predicted.iter().skip(gold.len()) {
        tags.push(extra.iter().map(|(_, t)| t.clone()).collect());
    }
    Ok(evaluate(&gold, &tags)?)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let schema = schema(&args.schema)?;
    let report = evaluate_files(&args.gold, &args.predicted, &schema, args.iob1)?;
    let text = match args.format {
        OutputFormat::Text => report.to_string(),
        OutputFormat::Tsv => report.to_tsv(),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

pub fn cmd_neighbors(args: &NeighborsArgs, out: &mut dyn Write) -> CliResult {
    let archive = flagged("--model", ModelArchive::load(&args.model))?;
    let model = &archive.model;
    let (table, lexicon, query) = match args.table {
        TableArg::Words => {
            let q = if model.vocab.lowercase_words {
                args.query.to_lowercase()
            } else {
                args.query.clone()
            };
            (&model.tables.words, &model.vocab.words, q)
        }
        TableArg::Roots => match &model.tables.roots {
            Some(t) => (t, &model.vocab.roots, args.query.clone()),
            None => return Err(CliError::usage("--table roots: the model has no root embeddings")),
        },
    };
    let neighbors = nearest_neighbors(table, lexicon, &query, args.k)?;
    let mut text = String::new();
    for (rank, n) in neighbors.iter().enumerate() {
        text.push_str(&format!("{}\t{}\t{:.6}\n", rank + 1, n.token, n.cosine));
    }
    out.write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult {
    let corpus = generate(&args.knobs.config(args.seed))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let schema = Schema::default();
    for (name, part) in [
        ("train.txt", &corpus.split.train),
        ("dev.txt", &corpus.split.dev),
        ("test.txt", &corpus.split.test),
    ] {
        save_corpus(args.out_dir.join(name), part, &schema)?;
    }
    let r = &corpus.report;
    writeln!(
        out,
        "sentences\t{}\t{}\t{}\ntokens\t{}\nsurface_types\t{}\nroot_types\t{}\ntype_token_ratio\t{:.4}",
        corpus.split.train.len(),
        corpus.split.dev.len(),
        corpus.split.test.len(),
        r.tokens,
        r.surface_types,
        r.root_types,
        r.type_token_ratio()
    )
    .map_err(|e| io_err(Path::new("<stdout>"), e))
}

pub fn cmd_ablate(args: &AblateArgs, out: &mut dyn Write) -> CliResult {
    let variants = args
        .variants
        .split(',')
        .map(|v| v.trim().parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("--variants: {e}")))?;
    let seeds = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("--seeds: {e}")))?;
    let spec = AblationSpec {
        synth: args.knobs.config(0),
        variants,
        seeds,
        model: args.sizes.model_config(false, false, false),
        train: args.sizes.train_config(0),
        lowercase_words: !args.sizes.keep_case,
    };
    let table = run_ablation(&spec)?;
    let text = match args.format {
        OutputFormat::Text => format!("{table}\n"),
        OutputFormat::Tsv => table.to_tsv(),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Tag(a) => cmd_tag(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Neighbors(a) => cmd_neighbors(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
    }
}

/// Runs the CLI on `args` (including the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
