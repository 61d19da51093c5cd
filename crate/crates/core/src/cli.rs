//! Command-line front end. `main.rs` only forwards to [`main`].

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::augment::{run_augmentation, top_up, AugmentInputs};
use crate::classifier::{train, HierarchicalModel, TrainConfig, DEFAULT_THRESHOLD};
use crate::corpus::{CountingMode, LabeledCorpus};
use crate::error::{Error, Result};
use crate::experiment::{
    check_failure_budget, evaluate_model, experiment, make_backend, write_augment_artifacts, BackendKind,
    BackendSettings, PipelineConfig, RunStamp,
};
use crate::generator::EndpointConfig;
use crate::metrics::{improvement, EvalReport};
use crate::promptgen::{render, spec_for_class, KeywordTable, PromptConfig};
use crate::sampler::{build_plan, Lambda, SamplerConfig};
use crate::synth::{synth_corpus, SynthProfile};
use crate::taxonomy::Taxonomy;
use crate::util;

#[derive(Debug, Parser)]
#[command(
    name = "propaug",
    version,
    about = "Minority-aware LLM augmentation for hierarchical proposal corpora"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Taxonomy utilities
    Taxonomy {
        #[command(subcommand)]
        command: TaxonomyCommand,
    },
    /// Validate a taxonomy file (same as `taxonomy validate`)
    Validate(ValidateArgs),
    /// Corpus utilities
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Print per-class counts (same as `corpus stats`)
    Stats(StatsArgs),
    /// Compute minority scores and the generation budget
    Plan(PlanArgs),
    /// Prompt utilities
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
    /// Render the generation prompt for one class (same as `prompt preview`)
    PromptPreview(PreviewArgs),
    /// Generate synthetic proposals and append them to a corpus
    Augment(AugmentArgs),
    /// Train the hierarchical classifier
    Train(TrainArgs),
    /// Predict disciplines for a text file
    Predict(PredictArgs),
    /// Evaluate a model on a labeled corpus
    Eval(EvalArgs),
    /// Compare a baseline and an augmented evaluation report
    Compare(CompareArgs),
    /// Run the full baseline-vs-augmented experiment
    Experiment(ExperimentArgs),
    /// Write a seeded synthetic taxonomy, corpus and keyword table
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum TaxonomyCommand {
    Validate(ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    Stats(StatsArgs),
}

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    Preview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value = "closure")]
    pub mode: CountingMode,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value = "auto")]
    pub lambda: Lambda,
    #[arg(long)]
    pub total: u64,
    #[arg(long, default_value = "closure")]
    pub mode: CountingMode,
    /// File with one participating class code per line (default: all leaves)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long, default_value = "plan.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long = "class")]
    pub class: String,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Keyword table (JSON map code → keywords)
    #[arg(long)]
    pub keyword_table: Option<PathBuf>,
    /// Number of keywords to draw
    #[arg(long, default_value_t = 3)]
    pub keywords: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub style: Option<String>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub lambda: Lambda,
    #[arg(long)]
    pub total: u64,
    #[arg(long, default_value = "closure")]
    pub mode: CountingMode,
    #[arg(long, default_value = "mock")]
    pub backend: BackendKind,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub keywords_per_prompt: usize,
    #[arg(long, default_value_t = 0)]
    pub top_up_rounds: u32,
    /// Exit with code 3 when more than this fraction of requests fail
    #[arg(long)]
    pub failure_budget: Option<f64>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

/// HTTP backend settings. The API key is read from the environment only.
#[derive(Debug, Args)]
pub struct EndpointArgs {
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable that holds the API key
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub max_concurrency: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub retry_malformed: Option<u32>,
}

impl EndpointArgs {
    fn apply(&self, cfg: &mut EndpointConfig) {
        if let Some(v) = &self.base_url {
            cfg.base_url = v.clone();
        }
        if let Some(v) = &self.model {
            cfg.model_name = v.clone();
        }
        if let Some(v) = &self.api_key_env {
            cfg.api_key_env = v.clone();
        }
        if let Some(v) = self.max_concurrency {
            cfg.max_concurrency = v;
        }
        if let Some(v) = self.max_retries {
            cfg.max_retries = v;
        }
        if let Some(v) = self.timeout {
            cfg.timeout_secs = v;
        }
        if let Some(v) = self.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = self.retry_malformed {
            cfg.retry_malformed = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value = "model.bin")]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub min_df: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub leaves_only: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub augmented: PathBuf,
    #[arg(long, default_value = "delta.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML configuration; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<Lambda>,
    #[arg(long)]
    pub total: Option<u64>,
    #[arg(long)]
    pub mode: Option<CountingMode>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub leaves_only: bool,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

impl ExperimentArgs {
    /// Loads the config file (if any) and applies flag overrides.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.config {
            // relative paths in the file are relative to the file
            let base = p.parent().unwrap_or(Path::new(""));
            let rebase = |path: &mut PathBuf| {
                if path.is_relative() && !path.as_os_str().is_empty() {
                    *path = base.join(&*path);
                }
            };
            rebase(&mut cfg.paths.taxonomy);
            rebase(&mut cfg.paths.corpus);
            rebase(&mut cfg.paths.out_dir);
            if let Some(k) = cfg.paths.keywords.as_mut() {
                rebase(k);
            }
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = &self.taxonomy {
            cfg.paths.taxonomy = v.clone();
        }
        if let Some(v) = &self.corpus {
            cfg.paths.corpus = v.clone();
        }
        if let Some(v) = &self.keywords {
            cfg.paths.keywords = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.paths.out_dir = v.clone();
        }
        if let Some(v) = self.lambda {
            cfg.sampler.lambda = v;
        }
        if let Some(v) = self.total {
            cfg.sampler.total = v;
        }
        if let Some(v) = self.mode {
            cfg.sampler.mode = v;
        }
        if let Some(v) = self.backend {
            cfg.backend.kind = v;
        }
        if let Some(v) = self.test_fraction {
            cfg.eval.test_fraction = v;
        }
        if self.leaves_only {
            cfg.eval.leaves_only = true;
        }
        self.endpoint.apply(&mut cfg.backend.endpoint);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Comma-separated documents per leaf
    #[arg(long, value_delimiter = ',', default_value = "200,200,200,200,10,10")]
    pub profile: Vec<u32>,
    #[arg(long, default_value_t = 3)]
    pub leaves_per_root: usize,
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let t = Taxonomy::load(&args.path)?;
    println!(
        "ok: {} nodes, {} roots, {} leaves, depth {}",
        t.len(),
        t.roots().len(),
        t.leaves().len(),
        t.depth()
    );
    Ok(())
}

fn stats(args: &StatsArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let c = LabeledCorpus::load(&args.path, &t)?;
    let counts = c.count_per_class(&t, args.mode)?;
    println!("{:<16} {:>5} {:>8}", "code", "level", "n");
    for (code, n) in &counts.counts {
        println!("{:<16} {:>5} {:>8}", code, t.level(code)?, n);
    }
    println!(
        "{} proposals ({} generated), mode {}",
        c.len(),
        c.generated_count(),
        args.mode
    );
    Ok(())
}

fn read_class_file(path: &Path) -> Result<BTreeSet<String>> {
    Ok(util::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

fn plan(args: &PlanArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let c = LabeledCorpus::load(&args.corpus, &t)?;
    let mut cfg = SamplerConfig::new(args.lambda, args.total)?.with_mode(args.mode);
    if let Some(p) = &args.classes {
        cfg = cfg.with_classes(read_class_file(p)?);
    }
    let plan = build_plan(&c, &t, &cfg)?;
    println!("lambda = {}, total = {}", plan.lambda, plan.total);
    println!("{:<16} {:>8} {:>12} {:>8}", "code", "n", "score", "alloc");
    for r in &plan.rows {
        println!("{:<16} {:>8} {:>12.6} {:>8}", r.code, r.n, r.score, r.alloc);
    }
    util::write_json(&args.out, &plan)
}

fn preview(args: &PreviewArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let table = match &args.keyword_table {
        Some(p) => KeywordTable::load(p)?,
        None => KeywordTable::default(),
    };
    let mut cfg = PromptConfig {
        keywords_per_prompt: args.keywords,
        ..PromptConfig::default()
    };
    if let Some(style) = &args.style {
        cfg.language_style = style.clone();
    }
    let spec = spec_for_class(&t, &table, &args.class, &cfg, args.seed)?;
    let prompt = render(&spec)?;
    print!("{}", prompt.text);
    Ok(())
}

fn augment(args: &AugmentArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let c = LabeledCorpus::load(&args.corpus, &t)?;
    let table = match &args.keywords {
        Some(p) => KeywordTable::load(p)?,
        None => KeywordTable::default(),
    };
    table.validate(&t)?;
    let sampler = SamplerConfig::new(args.lambda, args.total)?.with_mode(args.mode);
    let prompt = PromptConfig {
        keywords_per_prompt: args.keywords_per_prompt,
        ..PromptConfig::default()
    };
    let mut settings = BackendSettings {
        kind: args.backend,
        ..Default::default()
    };
    args.endpoint.apply(&mut settings.endpoint);
    let backend = make_backend(&settings, &c, &t)?;
    let inputs = AugmentInputs {
        corpus: &c,
        taxonomy: &t,
        keywords: &table,
        sampler: &sampler,
        prompt: &prompt,
    };
    let (mut run, mut augmented) = run_augmentation(&inputs, backend.as_ref(), args.seed)?;
    for _ in 0..args.top_up_rounds {
        if run.failures.is_empty() {
            break;
        }
        (run, augmented) = top_up(&run, &augmented, &inputs, backend.as_ref())?;
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let material = format!("{args:?}");
    let stamp = RunStamp {
        config_hash: util::sha256_hex(material),
        seed: args.seed,
    };
    write_augment_artifacts(&args.out, &stamp, &run, &augmented)?;
    println!(
        "requested {}, succeeded {}, failed {}, appended {}, dropped {} ({:.2?})",
        run.requested(),
        run.succeeded,
        run.failed(),
        run.appended,
        run.dropped,
        run.duration
    );
    check_failure_budget(&run, args.failure_budget)
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let c = LabeledCorpus::load(&args.corpus, &t)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: args.epochs.unwrap_or(d.epochs),
        lr: args.lr.unwrap_or(d.lr),
        l2: args.l2.unwrap_or(d.l2),
        min_df: args.min_df.unwrap_or(d.min_df),
        seed: args.seed.unwrap_or(d.seed),
    };
    let model = train(&c, &t, &cfg)?;
    if !model.skipped.is_empty() {
        eprintln!("skipped classes without positives: {}", model.skipped.join(", "));
    }
    model.save(&args.out)?;
    println!(
        "trained {} classes over {} features on {} proposals",
        model.classes.len(),
        model.vocabulary.len(),
        c.len()
    );
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = HierarchicalModel::load(&args.model)?;
    let text = util::read_to_string(&args.text)?;
    let scores = model.scores(&text);
    for code in model.predict(&text, args.threshold) {
        println!("{code}\t{:.4}", scores[&code]);
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let t = Taxonomy::load(&args.taxonomy)?;
    let c = LabeledCorpus::load(&args.corpus, &t)?;
    let model = HierarchicalModel::load(&args.model)?;
    let report = evaluate_model(&model, &c, &t, args.threshold, args.leaves_only)?;
    println!(
        "micro F1 {:.4}  macro F1 {:.4}  micro P {:.4}  micro R {:.4}",
        report.overall.micro_f1, report.overall.macro_f1, report.overall.micro_precision, report.overall.micro_recall
    );
    util::write_json(&args.out, &report)
}

fn compare(args: &CompareArgs) -> Result<()> {
    let baseline: EvalReport = util::read_json(&args.baseline)?;
    let augmented: EvalReport = util::read_json(&args.augmented)?;
    let delta = improvement(&baseline, &augmented)?;
    print!("{}", delta.to_table());
    util::write_json(&args.out, &delta)
}

fn experiment_cmd(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let report = experiment(&cfg)?;
    let a = &report.augmentation;
    println!(
        "train {} / test {}; generated {} of {} requested ({} appended, {} dropped)",
        report.train_size, report.test_size, a.succeeded, a.requested, a.appended, a.dropped
    );
    print!("{}", report.delta.to_table());
    println!("artifacts written to {}", cfg.paths.out_dir.display());
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let profile = SynthProfile {
        docs_per_leaf: args.profile.clone(),
        leaves_per_root: args.leaves_per_root,
        vocab_size: args.vocab_size,
        seed: args.seed,
        ..SynthProfile::default()
    };
    let s = synth_corpus(&profile)?;
    s.write(&args.out)?;
    println!(
        "wrote {} proposals over {} disciplines to {}",
        s.corpus.len(),
        s.taxonomy.len(),
        args.out.display()
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Taxonomy {
            command: TaxonomyCommand::Validate(a),
        }
        | Command::Validate(a) => validate(a),
        Command::Corpus {
            command: CorpusCommand::Stats(a),
        }
        | Command::Stats(a) => stats(a),
        Command::Plan(a) => plan(a),
        Command::Prompt {
            command: PromptCommand::Preview(a),
        }
        | Command::PromptPreview(a) => preview(a),
        Command::Augment(a) => augment(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::SynthCorpus(a) => synth(a),
    }
}

/// Parses arguments, runs, and maps errors to exit codes
/// (1 usage/config, 2 data validation, 3 backend failure budget).
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
