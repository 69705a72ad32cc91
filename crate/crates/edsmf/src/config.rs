//! Run configuration: one TOML file plus `--set key=value` overrides.
//!
//! Every field has a default, so an empty file is a valid (synthetic-data)
//! configuration. Relative paths resolve against the directory the process
//! runs in.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use edsmf_core::ensemble::{default_grid, EnsembleConfig};
use edsmf_core::evaluation::EvalConfig;
use edsmf_core::experiment::{ExperimentConfig, MixerSettings};
use edsmf_core::features::{FeatureLayout, DEFAULT_EMA_PERIOD};
use edsmf_core::synth::SyntheticSpec;
use edsmf_core::training::{OptimizerKind, Protocol};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Problems found before any stage runs (exit code 2).
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("required file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub bars: PathBuf,
    pub universe: PathBuf,
    /// Sector impact table; when absent the agents output or the built-in
    /// table is used.
    pub sector_table: Option<PathBuf>,
    /// Directory of news articles for the agents stage.
    pub corpus: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            bars: "out/data/bars.csv".into(),
            universe: "out/data/universe.csv".into(),
            sector_table: None,
            corpus: None,
            output: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Window length `T` in steps.
    pub lookback: usize,
    pub ema_period: usize,
    pub layout: FeatureLayout,
    /// Consecutive step counts of the three splits, from the first bar.
    pub train_steps: usize,
    pub valid_steps: usize,
    pub test_steps: usize,
    /// First day with the winner known; defaults to the date of the first
    /// validation step.
    pub election_day: Option<NaiveDate>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        DataConfig {
            lookback: 16,
            ema_period: DEFAULT_EMA_PERIOD,
            layout: FeatureLayout::default(),
            train_steps: spec.train_steps,
            valid_steps: spec.valid_steps,
            test_steps: spec.test_steps,
            election_day: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Checkpoints directory, relative to the output directory.
    pub checkpoint_dir: PathBuf,
    /// Give Model B its own initialization instead of sharing Model A's.
    pub independent_init: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let p = Protocol::default();
        TrainingConfig {
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            alpha: p.alpha,
            optimizer: p.optimizer,
            beta1: p.beta1,
            beta2: p.beta2,
            epsilon: p.epsilon,
            checkpoint_dir: "checkpoints".into(),
            independent_init: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    /// Grid labels such as `20-Candidate-1, 80-Candidate-2`.
    pub grid: Vec<String>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { grid: default_grid().iter().map(|c| c.label()).collect() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}` (expected mock or http)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub backend: BackendKind,
    /// Inclusive publication-date window of the corpus.
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Optional replacement prompt templates, one file per role.
    pub templates: Option<PathBuf>,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            backend: BackendKind::Mock,
            start: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2024, 11, 6).expect("valid date"),
            temperature: 0.0,
            max_tokens: 2048,
            templates: None,
        }
    }
}

pub const STAGES: [&str; 9] = ["synth", "agents", "ingest", "features", "signals", "train", "ensemble", "evaluate", "report"];

/// Stages run by `run` when none are configured.
pub const DEFAULT_STAGES: [&str; 7] = ["ingest", "features", "signals", "train", "ensemble", "evaluate", "report"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub stages: Vec<String>,
    pub paths: Paths,
    pub synthetic: SyntheticSpec,
    pub data: DataConfig,
    pub model: MixerSettings,
    pub training: TrainingConfig,
    pub ensemble: EnsembleSection,
    pub evaluation: EvalConfig,
    pub agents: AgentsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            stages: DEFAULT_STAGES.iter().map(|s| s.to_string()).collect(),
            paths: Paths::default(),
            synthetic: SyntheticSpec::default(),
            data: DataConfig::default(),
            model: MixerSettings::default(),
            training: TrainingConfig::default(),
            ensemble: EnsembleSection::default(),
            evaluation: EvalConfig::default(),
            agents: AgentsConfig::default(),
        }
    }
}

/// Split `a.b.c=value`; the value is parsed as a TOML literal and falls back
/// to a plain string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, raw) = text.split_once('=').ok_or_else(|| ConfigError::BadOverride(text.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(text.into()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.into()));
    Ok((key.split('.').map(String::from).collect(), value))
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let key = path.join(".");
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut table = root;
    for p in parents {
        let entry = table.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override { key: key.clone(), message: format!("`{p}` is not a table") })?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Parse TOML text, apply overrides in order, then validate.
    pub fn from_toml(text: &str, origin: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse { origin: origin.into(), message: e.to_string() })?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse { origin: origin.into(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| match source.kind() {
                    std::io::ErrorKind::NotFound => ConfigError::MissingFile(p.into()),
                    _ => ConfigError::Read { path: p.into(), source },
                })?;
                Self::from_toml(&text, &p.display().to_string(), overrides)
            }
            None => Self::from_toml("", "<defaults>", overrides),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, message: &str| Err(ConfigError::Invalid { field, message: message.into() });
        for s in &self.stages {
            if !STAGES.contains(&s.as_str()) {
                return Err(ConfigError::UnknownStage(s.clone()));
            }
        }
        if self.data.lookback == 0 {
            return invalid("data.lookback", "must be at least 1");
        }
        if self.data.ema_period == 0 {
            return invalid("data.ema_period", "must be at least 1");
        }
        for (field, n) in [
            ("data.train_steps", self.data.train_steps),
            ("data.valid_steps", self.data.valid_steps),
            ("data.test_steps", self.data.test_steps),
        ] {
            if n <= self.data.lookback {
                return Err(ConfigError::Invalid { field, message: format!("{n} steps do not exceed the lookback") });
            }
        }
        self.protocol().validate().map_err(|e| ConfigError::Invalid { field: "training", message: e.to_string() })?;
        self.grid()?;
        if self.evaluation.precision_at.is_empty() || self.evaluation.precision_at.contains(&0) {
            return invalid("evaluation.precision_at", "needs positive cut-offs");
        }
        self.synthetic.validate().map_err(|e| ConfigError::Invalid { field: "synthetic", message: e.to_string() })?;
        if self.agents.start > self.agents.end {
            return invalid("agents.start", "window starts after it ends");
        }
        Ok(())
    }

    /// Files a set of stages reads that no earlier stage in the set writes.
    pub fn check_inputs(&self, stages: &[String]) -> Result<(), ConfigError> {
        let has = |s: &str| stages.iter().any(|x| x == s);
        let mut needed: Vec<&Path> = Vec::new();
        if has("ingest") && !has("synth") {
            needed.extend([self.paths.bars.as_path(), self.paths.universe.as_path()]);
        }
        if has("signals") {
            if let Some(t) = &self.paths.sector_table {
                needed.push(t);
            }
        }
        if has("agents") {
            if let Some(c) = &self.paths.corpus {
                needed.push(c);
            }
            if let Some(t) = &self.agents.templates {
                needed.push(t);
            }
        }
        match needed.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(ConfigError::MissingFile(p.into())),
            None => Ok(()),
        }
    }

    pub fn protocol(&self) -> Protocol {
        let t = &self.training;
        Protocol {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            alpha: t.alpha,
            seed: self.seed,
            optimizer: t.optimizer,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
        }
    }

    pub fn grid(&self) -> Result<Vec<EnsembleConfig>, ConfigError> {
        self.ensemble
            .grid
            .iter()
            .map(|l| EnsembleConfig::parse_label(l).map_err(|e| ConfigError::Invalid { field: "ensemble.grid", message: e.to_string() }))
            .collect()
    }

    pub fn experiment(&self, election_day: NaiveDate) -> ExperimentConfig {
        let mut exp = ExperimentConfig::new(election_day, self.seed);
        exp.mixer = self.model.clone();
        exp.protocol = self.protocol();
        exp.grid = self.grid().expect("validated");
        exp.eval = self.evaluation.clone();
        exp.independent_init = self.training.independent_init;
        exp
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths.output.join(&self.training.checkpoint_dir)
    }

    /// SHA-256 (hex) of the canonical JSON encoding of the config. The
    /// stage list is left out: it selects work, it does not change results.
    pub fn hash(&self) -> String {
        let content = RunConfig { stages: Vec::new(), ..self.clone() };
        let json = serde_json::to_vec(&content).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("", "t", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::from_toml(
            "[training]\nepochs = 5\n",
            "t",
            &["training.learning_rate=0.01".into(), "paths.output=/tmp/x".into(), "data.lookback=8".into()],
        )
        .unwrap();
        assert_eq!(cfg.training.epochs, 5);
        assert_eq!(cfg.training.learning_rate, 0.01);
        assert_eq!(cfg.paths.output, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.data.lookback, 8);
    }

    #[test]
    fn unknown_fields_and_bad_overrides_are_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1", "t", &[]), Err(ConfigError::Parse { .. })));
        for typo in ["[model]\nhiden = 8", "[synthetic]\nn_stock = 3", "[evaluation.policy]\nhold = 2", "[data.layout]\nx = 1"] {
            assert!(matches!(RunConfig::from_toml(typo, "t", &[]), Err(ConfigError::Parse { .. })), "{typo}");
        }
        assert!(matches!(RunConfig::from_toml("", "t", &["novalue".into()]), Err(ConfigError::BadOverride(_))));
        assert!(matches!(
            RunConfig::from_toml("", "t", &["stages=[\"train\", \"fly\"]".into()]),
            Err(ConfigError::UnknownStage(s)) if s == "fly"
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.stages = vec!["train".into()];
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
