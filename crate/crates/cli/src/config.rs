//! Experiment configuration: a single JSON document.
//!
//! ```json
//! {
//!   "dataset": { "path": "data.csv", "task": "regression", "group_column": "group" },
//!   "objective": { "spectrum": "cvar", "param": 0.5, "nu": 1.0, "divergence": "chi2" },
//!   "optimizers": [ { "name": "prospect", "lr": 0.003 } ],
//!   "training": { "max_passes": 50, "seeds": [1, 2], "log_every": 1 }
//! }
//! ```
//!
//! `dataset` may instead hold `{ "synthetic": { "task": ..., "n": ..., "d": ... } }`.
//! Unset values take the defaults `nu = 1`, `mu = 1/n`, batch size 64 and
//! epoch length `n`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use prospect_core::data::{CsvSchema, SyntheticSpec};
use prospect_core::optim::{DualRate, IndexCoupling, ReferenceOptions};
use prospect_core::{Divergence, SpectrumFamily, Task};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, Result};

pub const DEFAULT_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Prospect,
    ProspectMoreau,
    SaddleSaga,
    Lsvrg,
    Sgd,
    Srda,
}

impl OptimizerKind {
    const TAGS: [&'static str; 6] = ["prospect", "prospect_moreau", "saddlesaga", "lsvrg", "sgd", "srda"];

    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "prospect" => OptimizerKind::Prospect,
            "prospect_moreau" | "prospect-moreau" | "moreau" => OptimizerKind::ProspectMoreau,
            "saddlesaga" | "saddle_saga" => OptimizerKind::SaddleSaga,
            "lsvrg" => OptimizerKind::Lsvrg,
            "sgd" => OptimizerKind::Sgd,
            "srda" => OptimizerKind::Srda,
            other => {
                return Err(CliError::Config(format!(
                    "unknown optimizer `{other}`{} (expected one of {})",
                    suggestion(other, &Self::TAGS),
                    Self::TAGS.join(", ")
                )))
            }
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            OptimizerKind::Prospect => "prospect",
            OptimizerKind::ProspectMoreau => "prospect_moreau",
            OptimizerKind::SaddleSaga => "saddlesaga",
            OptimizerKind::Lsvrg => "lsvrg",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Srda => "srda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv { path: PathBuf, schema: CsvSchema, standardize: bool },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub family: SpectrumFamily,
    pub nu: f64,
    /// `None` means `1/n`.
    pub mu: Option<f64>,
    pub divergence: Divergence,
}

impl ObjectiveSpec {
    pub fn mu_for(&self, n: usize) -> f64 {
        self.mu.unwrap_or(1.0 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Name in the `optimizer` column of the metrics; defaults to the tag.
    pub label: String,
    pub lr: f64,
    /// Minibatch size for SGD and SRDA, capped at `n`.
    pub batch_size: usize,
    /// LSVRG checkpoint period in steps; `None` means `n`.
    pub epoch: Option<usize>,
    pub dual_rate: DualRate,
    pub coupling: IndexCoupling,
}

impl OptimizerSpec {
    pub fn batch_for(&self, n: usize) -> usize {
        self.batch_size.min(n)
    }

    pub fn epoch_for(&self, n: usize) -> usize {
        self.epoch.unwrap_or(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSpec {
    pub max_passes: f64,
    pub seeds: Vec<u64>,
    pub log_every: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub objective: ObjectiveSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub training: TrainingSpec,
    pub reference: ReferenceOptions,
    pub output_dir: PathBuf,
}

// Raw documents. Unknown keys are caught before deserialization so the error
// can suggest a replacement; `deny_unknown_fields` is a backstop.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    #[serde(default)]
    objective: RawObjective,
    optimizers: Vec<RawOptimizer>,
    #[serde(default)]
    training: RawTraining,
    #[serde(default)]
    reference: RawReference,
    output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: Option<PathBuf>,
    task: Option<String>,
    label_column: Option<String>,
    group_column: Option<String>,
    standardize: Option<bool>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    task: String,
    n: usize,
    d: usize,
    #[serde(default)]
    seed: u64,
    noise: Option<f64>,
    num_classes: Option<usize>,
    truth_scale: Option<f64>,
    #[serde(default)]
    groups: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    spectrum: Option<String>,
    param: Option<f64>,
    nu: Option<f64>,
    mu: Option<f64>,
    divergence: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    name: String,
    label: Option<String>,
    lr: f64,
    batch_size: Option<usize>,
    epoch: Option<usize>,
    dual_rate: Option<String>,
    dual_lr: Option<f64>,
    coupling: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    max_passes: Option<f64>,
    seeds: Option<Vec<u64>>,
    log_every: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawReference {
    tol: Option<f64>,
    max_iter: Option<usize>,
}

const TOP_KEYS: &[&str] = &["dataset", "objective", "optimizers", "training", "reference", "output_dir"];
const DATASET_KEYS: &[&str] = &["path", "task", "label_column", "group_column", "standardize", "synthetic"];
const SYNTHETIC_KEYS: &[&str] = &["task", "n", "d", "seed", "noise", "num_classes", "truth_scale", "groups"];
const OBJECTIVE_KEYS: &[&str] = &["spectrum", "param", "nu", "mu", "divergence"];
const OPTIMIZER_KEYS: &[&str] = &["name", "label", "lr", "batch_size", "epoch", "dual_rate", "dual_lr", "coupling"];
const TRAINING_KEYS: &[&str] = &["max_passes", "seeds", "log_every"];
const REFERENCE_KEYS: &[&str] = &["tol", "max_iter"];

/// Common spellings that string distance alone would not map home.
const ALIASES: &[(&str, &str)] = &[
    ("learningrate", "lr"),
    ("learning_rate", "lr"),
    ("eta", "lr"),
    ("step_size", "lr"),
    ("stepsize", "lr"),
    ("batch", "batch_size"),
    ("batchsize", "batch_size"),
    ("epoch_length", "epoch"),
    ("seed", "seeds"),
    ("passes", "max_passes"),
    ("epochs", "max_passes"),
    ("shift_cost", "nu"),
    ("l2", "mu"),
    ("regularization", "mu"),
    ("out", "output_dir"),
    ("output", "output_dir"),
    ("optimizer", "optimizers"),
    ("data", "dataset"),
];

fn suggestion(key: &str, allowed: &[&str]) -> String {
    let lower = key.to_ascii_lowercase();
    let alias = ALIASES.iter().find(|(from, to)| *from == lower && allowed.contains(to)).map(|(_, to)| *to);
    let close = || {
        allowed
            .iter()
            .map(|&k| (strsim::jaro_winkler(&lower, k), k))
            .filter(|(score, _)| *score >= 0.8)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, k)| k)
    };
    match alias.or_else(close) {
        Some(k) => format!("; did you mean `{k}`?"),
        None => String::new(),
    }
}

fn check_keys(value: &Value, allowed: &[&str], path: &str) -> Result<()> {
    let Some(map) = value.as_object() else {
        return Ok(());
    };
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            let at = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            return Err(CliError::Config(format!("unknown key `{at}`{}", suggestion(key, allowed))));
        }
    }
    Ok(())
}

fn check_document(doc: &Value) -> Result<()> {
    if !doc.is_object() {
        return Err(CliError::Config("the config must be a JSON object".into()));
    }
    check_keys(doc, TOP_KEYS, "")?;
    if let Some(dataset) = doc.get("dataset") {
        check_keys(dataset, DATASET_KEYS, "dataset")?;
        if let Some(synthetic) = dataset.get("synthetic") {
            check_keys(synthetic, SYNTHETIC_KEYS, "dataset.synthetic")?;
        }
    }
    if let Some(objective) = doc.get("objective") {
        check_keys(objective, OBJECTIVE_KEYS, "objective")?;
    }
    if let Some(Value::Array(optimizers)) = doc.get("optimizers") {
        for (k, opt) in optimizers.iter().enumerate() {
            check_keys(opt, OPTIMIZER_KEYS, &format!("optimizers[{k}]"))?;
        }
    }
    if let Some(training) = doc.get("training") {
        check_keys(training, TRAINING_KEYS, "training")?;
    }
    if let Some(reference) = doc.get("reference") {
        check_keys(reference, REFERENCE_KEYS, "reference")?;
    }
    Ok(())
}

fn config_err(e: prospect_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("`{name}` must be positive and finite, got {x}")))
    }
}

fn parse_coupling(tag: Option<&str>) -> Result<IndexCoupling> {
    match tag {
        None | Some("shared") => Ok(IndexCoupling::Shared),
        Some("decoupled") => Ok(IndexCoupling::Decoupled),
        Some(other) => Err(CliError::Config(format!(
            "unknown coupling `{other}`{} (expected shared or decoupled)",
            suggestion(other, &["shared", "decoupled"])
        ))),
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. A relative dataset path is resolved
    /// against the config's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        check_document(&doc)?;
        let raw: RawConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;

        let dataset = match (raw.dataset.path, raw.dataset.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("`dataset` takes either `path` or `synthetic`, not both".into()))
            }
            (None, None) => return Err(CliError::Config("`dataset` needs `path` or `synthetic`".into())),
            (Some(path), None) => {
                let task = Task::from_tag(raw.dataset.task.as_deref().unwrap_or("regression")).map_err(config_err)?;
                let mut schema = CsvSchema::new(task);
                if let Some(label) = raw.dataset.label_column {
                    schema.label_column = label;
                }
                schema.group_column = raw.dataset.group_column;
                let path = if path.is_relative() { base_dir.join(path) } else { path };
                DatasetSource::Csv { path, schema, standardize: raw.dataset.standardize.unwrap_or(true) }
            }
            (None, Some(syn)) => {
                if raw.dataset.task.is_some() || raw.dataset.label_column.is_some() {
                    return Err(CliError::Config(
                        "`task` and `label_column` belong inside `dataset.synthetic` or next to `path`".into(),
                    ));
                }
                let task = Task::from_tag(&syn.task).map_err(config_err)?;
                if syn.n < 2 || syn.d < 1 {
                    return Err(CliError::Config(format!("synthetic data needs n >= 2 and d >= 1, got {} x {}", syn.n, syn.d)));
                }
                let mut spec = SyntheticSpec::new(task, syn.n, syn.d, syn.seed);
                if let Some(noise) = syn.noise {
                    spec.noise = noise;
                }
                if let Some(c) = syn.num_classes {
                    spec.num_classes = c;
                }
                if let Some(scale) = syn.truth_scale {
                    spec.truth_scale = scale;
                }
                spec.groups = syn.groups;
                DatasetSource::Synthetic(spec)
            }
        };

        let tag = raw.objective.spectrum.as_deref().unwrap_or("erm");
        let param = raw.objective.param.unwrap_or(0.0);
        if tag != "erm" && raw.objective.param.is_none() {
            return Err(CliError::Config(format!("spectrum `{tag}` needs `param`")));
        }
        let family = SpectrumFamily::from_tag(tag, param).map_err(config_err)?;
        let nu = raw.objective.nu.unwrap_or(1.0);
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(CliError::Config(format!("`nu` must be nonnegative, got {nu}")));
        }
        if let Some(mu) = raw.objective.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(CliError::Config(format!("`mu` must be nonnegative, got {mu}")));
            }
        }
        let divergence = Divergence::from_tag(raw.objective.divergence.as_deref().unwrap_or("chi2")).map_err(config_err)?;
        let objective = ObjectiveSpec { family, nu, mu: raw.objective.mu, divergence };

        if raw.optimizers.is_empty() {
            return Err(CliError::Config("`optimizers` must list at least one optimizer".into()));
        }
        let mut labels = HashSet::new();
        let mut optimizers = Vec::with_capacity(raw.optimizers.len());
        for opt in raw.optimizers {
            let kind = OptimizerKind::from_tag(&opt.name)?;
            let lr = positive("lr", opt.lr)?;
            let dual_rate = match (opt.dual_rate.as_deref(), opt.dual_lr) {
                (None, None) => DualRate::Heuristic,
                (None, Some(delta)) => DualRate::Fixed(positive("dual_lr", delta)?),
                (Some(rule), delta) => DualRate::from_tag(rule, delta).map_err(config_err)?,
            };
            let label = opt.label.unwrap_or_else(|| kind.tag().to_owned());
            if !labels.insert(label.clone()) {
                return Err(CliError::Config(format!(
                    "optimizer label `{label}` is used twice; set a distinct `label` on each entry"
                )));
            }
            if opt.batch_size == Some(0) || opt.epoch == Some(0) {
                return Err(CliError::Config(format!("`batch_size` and `epoch` must be positive for `{label}`")));
            }
            optimizers.push(OptimizerSpec {
                kind,
                label,
                lr,
                batch_size: opt.batch_size.unwrap_or(DEFAULT_BATCH),
                epoch: opt.epoch,
                dual_rate,
                coupling: parse_coupling(opt.coupling.as_deref())?,
            });
        }

        let max_passes = raw.training.max_passes.unwrap_or(100.0);
        if !(max_passes >= 1.0 && max_passes.is_finite()) {
            return Err(CliError::Config(format!("`max_passes` must be at least 1, got {max_passes}")));
        }
        let seeds = raw.training.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(CliError::Config("`seeds` must hold at least one seed".into()));
        }
        let log_every = positive("log_every", raw.training.log_every.unwrap_or(1.0))?;

        let mut reference = ReferenceOptions::default();
        if let Some(tol) = raw.reference.tol {
            reference.tol = positive("tol", tol)?;
        }
        if let Some(max_iter) = raw.reference.max_iter {
            reference.max_iter = max_iter;
        }

        Ok(ExperimentConfig {
            dataset,
            objective,
            optimizers,
            training: TrainingSpec { max_passes, seeds, log_every },
            reference,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("results")),
        })
    }
}
