//! Subcommands and their on-disk stage outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cascade_core::corpus::{build_entity_documents, CommentRecord, EntityKey};
use cascade_core::embedding::EmbeddingTable;
use cascade_core::pipeline::{build_context_with, context_vocabulary, train_cascade_with, CascadeModel, ContextBank, EvalReport};
use cascade_core::provenance::{corpus_hash, hash_str};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const USER_DOCS_FILE: &str = "user_documents.txt";
pub const FORUM_DOCS_FILE: &str = "forum_documents.txt";
pub const CONTEXT_FILE: &str = "context.cscd";
pub const MODEL_FILE: &str = "model.cscd";
pub const EVAL_FILE: &str = "eval.json";
pub const CONFIG_ECHO_FILE: &str = "run_config.toml";

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Contextual sarcasm detection")]
pub struct Cli {
    /// TOML run configuration; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Paragraph-vector worker threads; more than one is not reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also train truncated windows in documents too short for a full one.
    #[arg(long, global = true)]
    pub edge_windows: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and write user and forum documents.
    Prepare,
    /// Learn user and forum vectors into a context checkpoint.
    TrainContext,
    /// Train the classifier on top of the context checkpoint.
    Train {
        /// Loss weights for non-sarcastic and sarcastic examples, e.g. `1,3`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        class_weights: Option<Vec<f64>>,
    },
    /// Report metrics on the test split.
    Eval,
    /// Label the comments of a JSONL file.
    Predict {
        input: PathBuf,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write one of the learned vector tables in text form.
    ExportEmbeddings {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare => "prepare",
            Command::TrainContext => "train-context",
            Command::Train { .. } => "train",
            Command::Eval => "eval",
            Command::Predict { .. } => "predict",
            Command::ExportEmbeddings { .. } => "export-embeddings",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    User,
    Forum,
    Stylometric,
    Personality,
}

/// The effective configuration: file (or defaults) with flags applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let mut c = RunConfig::default();
            c.resolve_paths(&std::env::current_dir().map_err(|e| CliError::io(".", e))?);
            c
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if cli.edge_windows {
        config.stylometric.edge_windows = true;
        config.discourse.edge_windows = true;
    }
    if let Command::Train {
        class_weights: Some(w),
    } = &cli.command
    {
        config.classifier.class_weights = Some([w[0], w[1]]);
    }
    config.validate()?;
    Ok(config)
}

struct Run {
    config: RunConfig,
    command: &'static str,
    out: PathBuf,
}

impl Run {
    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn required(&self, name: &str, what: &'static str, command: &'static str) -> Result<PathBuf> {
        let path = self.file(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(CliError::MissingStage { what, path, command })
        }
    }

    fn input(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        let path = path
            .clone()
            .ok_or_else(|| CliError::Config(format!("paths.{key} is not set")))?;
        if !path.is_file() {
            return Err(CliError::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("paths.{key} does not exist")),
            ));
        }
        Ok(path)
    }

    fn comments(&self, path: &Option<PathBuf>, key: &str) -> Result<Vec<CommentRecord>> {
        formats::load_comments(&self.input(path, key)?)
    }

    fn word_vectors(&self) -> Result<Option<EmbeddingTable>> {
        match &self.config.paths.word_vectors {
            Some(_) => Ok(Some(formats::load_embeddings(&self.input(&self.config.paths.word_vectors, "word_vectors")?)?)),
            None => Ok(None),
        }
    }

    /// Echoes the config into the output directory and prints the
    /// provenance line.
    fn announce(&self, corpus: u64) -> Result<()> {
        let toml = self.config.to_toml();
        let echo = self.file(CONFIG_ECHO_FILE);
        fs::write(&echo, &toml).map_err(|e| CliError::io(&echo, e))?;
        let threads = match self.config.threads {
            1 => String::new(),
            n => format!(" threads={n} (nondeterministic)"),
        };
        eprintln!(
            "provenance: command={} config={:016x} seed={} corpus={corpus:016x}{threads}",
            self.command,
            hash_str(&toml),
            self.config.seed
        );
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = effective_config(&cli)?;
    let out = formats::ensure_dir(&config.paths.output)?;
    let run = Run {
        config,
        command: cli.command.name(),
        out,
    };
    match cli.command {
        Command::Prepare => prepare(&run),
        Command::TrainContext => train_context(&run),
        Command::Train { .. } => train(&run),
        Command::Eval => eval(&run).map(|_| ()),
        Command::Predict { input, output } => predict(&run, &input, output.as_deref()),
        Command::ExportEmbeddings { which, output } => export(&run, which, output),
    }
}

fn prepare(run: &Run) -> Result<()> {
    let train = run.comments(&run.config.paths.train, "train")?;
    let essays = formats::load_essays(&run.input(&run.config.paths.essays, "essays")?)?;
    run.announce(corpus_hash(&train))?;
    let vocab = context_vocabulary(&train, &essays, run.config.corpus.min_count).map_err(|e| e.in_stage("vocabulary"))?;
    formats::save_vocabulary(&run.file(VOCAB_FILE), &vocab)?;
    let users = build_entity_documents(&train, EntityKey::User, &vocab);
    let forums = build_entity_documents(&train, EntityKey::Forum, &vocab);
    formats::save_documents(&run.file(USER_DOCS_FILE), &users, &vocab)?;
    formats::save_documents(&run.file(FORUM_DOCS_FILE), &forums, &vocab)?;
    log::info!(
        "{} tokens, {} users, {} forums from {} comments",
        vocab.len(),
        users.len(),
        forums.len(),
        train.len()
    );
    Ok(())
}

fn train_context(run: &Run) -> Result<()> {
    let vocab_path = run.required(VOCAB_FILE, "vocabulary", "prepare")?;
    let train = run.comments(&run.config.paths.train, "train")?;
    let essays = formats::load_essays(&run.input(&run.config.paths.essays, "essays")?)?;
    run.announce(corpus_hash(&train))?;
    let vocab = formats::load_vocabulary(&vocab_path)?;
    if vocab.min_count() != run.config.corpus.min_count {
        log::warn!(
            "vocabulary was built with min_count {}, config says {}; rerun prepare to apply it",
            vocab.min_count(),
            run.config.corpus.min_count
        );
    }
    let vectors = run.word_vectors()?;
    let bank = build_context_with(
        vocab,
        &train,
        &essays,
        &run.config.context_config(),
        run.config.seed,
        vectors.as_ref(),
    )?;
    checkpoint::save(&run.file(CONTEXT_FILE), &bank.to_tensors(""))
}

fn load_bank(run: &Run) -> Result<ContextBank> {
    let path = run.required(CONTEXT_FILE, "context checkpoint", "train-context")?;
    let set = checkpoint::load(&path)?;
    Ok(ContextBank::from_tensors(&set, "")?)
}

fn load_model(run: &Run) -> Result<CascadeModel> {
    let path = run.required(MODEL_FILE, "trained model", "train")?;
    let set = checkpoint::load(&path)?;
    Ok(CascadeModel::from_tensors(&set)?)
}

fn train(run: &Run) -> Result<()> {
    let context = run.required(CONTEXT_FILE, "context checkpoint", "train-context")?;
    let train = run.comments(&run.config.paths.train, "train")?;
    let hash = corpus_hash(&train);
    run.announce(hash)?;
    let bank = ContextBank::from_tensors(&checkpoint::load(&context)?, "")?;
    if bank.provenance.corpus_hash != hash {
        log::warn!("the context checkpoint was built from a different training file");
    }
    let vectors = run.word_vectors()?;
    let (model, history) = train_cascade_with(
        bank,
        &train,
        run.config.ablation(),
        &run.config.classifier_config(),
        run.config.seed,
        vectors.as_ref(),
    )?;
    log::info!(
        "classifier: best epoch {} of {}{}",
        history.best_epoch,
        history.epochs.len(),
        if history.stopped_early { " (stopped early)" } else { "" }
    );
    checkpoint::save(&run.file(MODEL_FILE), &model.to_tensors())
}

pub fn report_json(report: &EvalReport) -> serde_json::Value {
    json!({
        "accuracy": report.accuracy,
        "f1_sarcastic": report.f1_sarcastic,
        "precision_sarcastic": report.precision_sarcastic,
        "recall_sarcastic": report.recall_sarcastic,
        "precision": report.precision,
        "recall": report.recall,
        "confusion": report.confusion,
        "loss_bits": report.loss_bits,
    })
}

fn eval(run: &Run) -> Result<EvalReport> {
    let model = load_model(run)?;
    let test = run.comments(&run.config.paths.test, "test")?;
    run.announce(corpus_hash(&test))?;
    let report = model.evaluate(&test)?;
    let missing = model.bank.missing_lookups();
    if missing > 0 {
        log::info!("{missing} user or forum lookups fell back to zero vectors");
    }
    let text = serde_json::to_string_pretty(&report_json(&report)).expect("report serializes");
    println!("{text}");
    let path = run.file(EVAL_FILE);
    fs::write(&path, format!("{text}\n")).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

fn predict(run: &Run, input: &Path, output: Option<&Path>) -> Result<()> {
    let model = load_model(run)?;
    let records = formats::load_comments(input)?;
    run.announce(corpus_hash(&records))?;
    let mut text = String::new();
    for r in &records {
        let p = model.predict(r)?;
        let line = json!({"id": r.id, "label": p.label.index(), "p_sarcastic": p.probabilities[1]});
        text.push_str(&line.to_string());
        text.push('\n');
    }
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn export(run: &Run, which: Which, output: Option<PathBuf>) -> Result<()> {
    let bank = load_bank(run)?;
    run.announce(bank.provenance.corpus_hash)?;
    let (table, name) = match which {
        Which::User => (&bank.users, "user"),
        Which::Forum => (&bank.forums, "forum"),
        Which::Stylometric => (&bank.stylometric, "stylometric"),
        Which::Personality => (&bank.personality, "personality"),
    };
    let path = output.unwrap_or_else(|| run.file(&format!("{name}_embeddings.txt")));
    formats::save_embeddings(&path, table)?;
    log::info!("wrote {} {name} vectors to {}", table.len(), path.display());
    Ok(())
}
