//! End-to-end baseline-vs-augmented experiment and its configuration.
//!
//! Stages: split → train baseline → evaluate → augment the training split →
//! train augmented → evaluate → compare. Every JSON artifact carries a `run`
//! stamp with the configuration hash and root seed.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{run_augmentation, top_up, AugmentInputs, AugmentRun};
use crate::classifier::{train, HierarchicalModel, TrainConfig, DEFAULT_THRESHOLD};
use crate::corpus::{label_closure, CountingMode, LabeledCorpus};
use crate::error::{Error, Result, StageExt};
use crate::generator::{EndpointConfig, HttpGenerator, MockGenerator, TextGenerator};
use crate::metrics::{evaluate, improvement, DeltaReport, EvalReport, EvalScope};
use crate::promptgen::{KeywordTable, PromptConfig};
use crate::sampler::{Lambda, SamplerConfig};
use crate::taxonomy::Taxonomy;
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Paths {
    pub taxonomy: PathBuf,
    pub corpus: PathBuf,
    pub keywords: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub lambda: Lambda,
    pub total: u64,
    pub mode: CountingMode,
    pub classes: Option<BTreeSet<String>>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            lambda: Lambda::Auto,
            total: 200,
            mode: CountingMode::Closure,
            classes: None,
        }
    }
}

impl SamplerSettings {
    pub fn to_config(&self) -> Result<SamplerConfig> {
        let mut cfg = SamplerConfig::new(self.lambda, self.total)?.with_mode(self.mode);
        if let Some(classes) = &self.classes {
            cfg = cfg.with_classes(classes.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}` (expected mock|http)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub endpoint: EndpointConfig,
    /// Extra passes over failed slots after the main run.
    pub top_up_rounds: u32,
    /// Largest tolerated failed/requested ratio before the run counts as failed.
    pub failure_budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub threshold: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            train: TrainConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub test_fraction: f64,
    pub leaves_only: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            test_fraction: 0.2,
            leaves_only: false,
        }
    }
}

/// Full experiment configuration, usually read from TOML and patched by CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root seed for every random choice. Required.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub sampler: SamplerSettings,
    pub prompt: PromptConfig,
    pub backend: BackendSettings,
    pub classifier: ClassifierSettings,
    pub eval: EvalSettings,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&util::read_to_string(path)?)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a root seed is required (set `seed` or pass --seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let mut required = vec![("taxonomy", &self.paths.taxonomy), ("corpus", &self.paths.corpus)];
        if let Some(k) = &self.paths.keywords {
            required.push(("keywords", k));
        }
        for (what, path) in required {
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("missing path for {what}")));
            }
            if !path.exists() {
                return Err(Error::Config(format!("{what} file {} does not exist", path.display())));
            }
        }
        if self.paths.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("missing output directory".into()));
        }
        self.sampler.to_config()?;
        if self.backend.kind == BackendKind::Http {
            self.backend.endpoint.validate().map_err(Error::Config)?;
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            return Err(Error::Config("eval.test_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Hash of every setting except the output directory, plus the contents of the input files.
    pub fn hash(&self) -> Result<String> {
        let mut settings = self.clone();
        settings.paths = Paths::default();
        let mut material = serde_json::to_string(&settings).map_err(|e| Error::json("config", e))?;
        let mut inputs = vec![&self.paths.taxonomy, &self.paths.corpus];
        if let Some(k) = &self.paths.keywords {
            inputs.push(k);
        }
        for path in inputs {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            material.push('\n');
            material.push_str(&util::sha256_hex(bytes));
        }
        Ok(util::sha256_hex(material))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub run: &'a RunStamp,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn write_stamped<T: Serialize>(path: &Path, stamp: &RunStamp, body: &T) -> Result<()> {
    util::write_json(path, &Stamped { run: stamp, body })
}

/// Predicts every proposal of `corpus` and scores against closure gold labels.
pub fn evaluate_model(
    model: &HierarchicalModel,
    corpus: &LabeledCorpus,
    taxonomy: &Taxonomy,
    threshold: f64,
    leaves_only: bool,
) -> Result<EvalReport> {
    let gold: Vec<BTreeSet<String>> = corpus
        .proposals()
        .iter()
        .map(|p| label_closure(p, taxonomy))
        .collect::<std::result::Result<_, _>>()?;
    let pred: Vec<BTreeSet<String>> = corpus
        .proposals()
        .iter()
        .map(|p| model.predict(&p.abstract_text, threshold))
        .collect();
    let scope = if leaves_only {
        EvalScope::leaves_only(taxonomy)
    } else {
        EvalScope::all_nodes(taxonomy)
    };
    let mut report = evaluate(&gold, &pred, &scope)?;
    report.notes.insert("threshold".into(), threshold.to_string());
    report.notes.insert(
        "model".into(),
        "one-vs-rest logistic regression on tf-idf, closure labels".into(),
    );
    report.notes.insert(
        "prediction".into(),
        "threshold then ancestor closure; argmax leaf fallback".into(),
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub requested: u64,
    pub succeeded: u64,
    pub failed: u64,
    pub appended: u64,
    pub dropped: u64,
    pub original_size: u64,
    pub augmented_size: u64,
}

impl From<&AugmentRun> for RunSummary {
    fn from(run: &AugmentRun) -> Self {
        RunSummary {
            requested: run.requested(),
            succeeded: run.succeeded,
            failed: run.failed(),
            appended: run.appended,
            dropped: run.dropped,
            original_size: run.original_size,
            augmented_size: run.augmented_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub total: u64,
    pub lambda: f64,
    pub backend: BackendKind,
    pub train_size: u64,
    pub test_size: u64,
    pub augmentation: RunSummary,
    pub baseline: EvalReport,
    pub augmented: EvalReport,
    pub delta: DeltaReport,
}

pub fn make_backend(
    settings: &BackendSettings,
    train: &LabeledCorpus,
    taxonomy: &Taxonomy,
) -> Result<Box<dyn TextGenerator>> {
    Ok(match settings.kind {
        BackendKind::Mock => Box::new(MockGenerator::new(train, taxonomy)),
        BackendKind::Http => Box::new(HttpGenerator::new(settings.endpoint.clone()).map_err(Error::Config)?),
    })
}

/// Checks the failed/requested ratio against the configured budget.
pub fn check_failure_budget(run: &AugmentRun, budget: Option<f64>) -> Result<()> {
    let (failed, requested) = (run.failed(), run.requested());
    match budget {
        Some(b) if requested > 0 && failed as f64 / requested as f64 > b => {
            Err(Error::FailureBudget { failed, requested })
        }
        _ => Ok(()),
    }
}

/// Runs the whole experiment and writes every artifact under `paths.out_dir`.
pub fn experiment(cfg: &PipelineConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let stamp = RunStamp {
        config_hash: cfg.hash()?,
        seed,
    };
    let out = &cfg.paths.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let taxonomy = Taxonomy::load(&cfg.paths.taxonomy).stage("load")?;
    let corpus = LabeledCorpus::load(&cfg.paths.corpus, &taxonomy).stage("load")?;
    let keywords = match &cfg.paths.keywords {
        Some(p) => KeywordTable::load(p).stage("load")?,
        None => KeywordTable::default(),
    };
    keywords.validate(&taxonomy).stage("load")?;

    let split_seed = util::derive_seed(seed, &["split"]);
    let (train_set, test_set) = corpus.split(cfg.eval.test_fraction, split_seed).stage("split")?;
    train_set.save(&out.join("train.jsonl"))?;
    test_set.save(&out.join("test.jsonl"))?;

    let train_cfg = TrainConfig {
        seed: util::derive_seed(seed, &["train"]),
        ..cfg.classifier.train
    };
    let threshold = cfg.classifier.threshold;

    let baseline_model = train(&train_set, &taxonomy, &train_cfg).stage("train-baseline")?;
    write_stamped(&out.join("baseline_model.bin"), &stamp, &baseline_model)?;
    let baseline = evaluate_model(&baseline_model, &test_set, &taxonomy, threshold, cfg.eval.leaves_only)
        .stage("eval-baseline")?;
    write_stamped(&out.join("baseline_report.json"), &stamp, &baseline)?;

    let sampler = cfg.sampler.to_config()?;
    let inputs = AugmentInputs {
        corpus: &train_set,
        taxonomy: &taxonomy,
        keywords: &keywords,
        sampler: &sampler,
        prompt: &cfg.prompt,
    };
    let backend = make_backend(&cfg.backend, &train_set, &taxonomy).stage("augment")?;
    let augment_seed = util::derive_seed(seed, &["augment"]);
    let (mut run, mut augmented_set) = run_augmentation(&inputs, backend.as_ref(), augment_seed).stage("augment")?;
    for _ in 0..cfg.backend.top_up_rounds {
        if run.failures.is_empty() {
            break;
        }
        (run, augmented_set) = top_up(&run, &augmented_set, &inputs, backend.as_ref()).stage("augment")?;
    }
    write_augment_artifacts(out, &stamp, &run, &augmented_set)?;

    let augmented_model = train(&augmented_set, &taxonomy, &train_cfg).stage("train-augmented")?;
    write_stamped(&out.join("augmented_model.bin"), &stamp, &augmented_model)?;
    let augmented = evaluate_model(&augmented_model, &test_set, &taxonomy, threshold, cfg.eval.leaves_only)
        .stage("eval-augmented")?;
    write_stamped(&out.join("augmented_report.json"), &stamp, &augmented)?;

    let delta = improvement(&baseline, &augmented).stage("compare")?;
    write_stamped(&out.join("delta.json"), &stamp, &delta)?;

    let report = ExperimentReport {
        total: cfg.sampler.total,
        lambda: run.plan.lambda,
        backend: cfg.backend.kind,
        train_size: train_set.len() as u64,
        test_size: test_set.len() as u64,
        augmentation: RunSummary::from(&run),
        baseline,
        augmented,
        delta,
    };
    write_stamped(&out.join("experiment.json"), &stamp, &report)?;
    check_failure_budget(&run, cfg.backend.failure_budget)?;
    Ok(report)
}

/// `plan.json`, `augmented.jsonl`, `run_report.json` and `failures.jsonl`.
pub fn write_augment_artifacts(
    out: &Path,
    stamp: &RunStamp,
    run: &AugmentRun,
    augmented: &LabeledCorpus,
) -> Result<()> {
    write_stamped(&out.join("plan.json"), stamp, &run.plan)?;
    augmented.save(&out.join("augmented.jsonl"))?;
    #[derive(Serialize)]
    struct Report<'a> {
        corpus_file: &'a str,
        #[serde(flatten)]
        run: &'a AugmentRun,
    }
    write_stamped(
        &out.join("run_report.json"),
        stamp,
        &Report {
            corpus_file: "augmented.jsonl",
            run,
        },
    )?;
    util::write_jsonl(&out.join("failures.jsonl"), &run.failures)
}
