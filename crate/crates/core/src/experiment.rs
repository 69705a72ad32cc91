//! The full comparison: candidate-conditioned models A and B, the
//! random-assignment model and the politics-free baseline, trained on the
//! same windows and evaluated on the test split.

use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::{ContextRegime, DatasetError, Prepared, Split};
use crate::ensemble::{default_grid, sweep, EnsembleConfig, EnsembleError, SweepInputs, SweepRow, BASELINE_LABEL};
use crate::evaluation::{evaluate, EvalConfig, PredictionRecord};
use crate::mixer::{MixerConfig, MixerModel};
use crate::political::Candidate;
use crate::seed::{derive_seed, stages};
use crate::training::{select_checkpoint, train, Protocol, TrainObserver, TrainRun};

/// Architecture knobs not implied by the data shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixerSettings {
    pub hidden: usize,
    pub scales: Vec<usize>,
    pub market_dim: usize,
    pub anchor: bool,
}

impl Default for MixerSettings {
    fn default() -> Self {
        let base = MixerConfig::new(1, 1, 1);
        MixerSettings { hidden: base.hidden, scales: base.scales, market_dim: base.market_dim, anchor: base.anchor.is_some() }
    }
}

impl MixerSettings {
    pub fn apply(&self, prepared: &Prepared) -> MixerConfig {
        let mut cfg = prepared.model_config();
        cfg.hidden = self.hidden;
        cfg.scales = self.scales.clone();
        cfg.market_dim = self.market_dim;
        if !self.anchor {
            cfg.anchor = None;
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ModelA,
    ModelB,
    RandomAssignment,
    Baseline,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::ModelA, ModelKind::ModelB, ModelKind::RandomAssignment, ModelKind::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ModelA => "model_a",
            ModelKind::ModelB => "model_b",
            ModelKind::RandomAssignment => "random_assignment",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mixer: MixerSettings,
    pub protocol: Protocol,
    pub grid: Vec<EnsembleConfig>,
    pub eval: EvalConfig,
    pub election_day: NaiveDate,
    pub root_seed: u64,
    /// Give Model B its own initialization seed instead of sharing Model A's.
    pub independent_init: bool,
}

impl ExperimentConfig {
    pub fn new(election_day: NaiveDate, root_seed: u64) -> Self {
        ExperimentConfig {
            mixer: MixerSettings::default(),
            protocol: Protocol { seed: root_seed, ..Protocol::default() },
            grid: default_grid(),
            eval: EvalConfig::default(),
            election_day,
            root_seed,
            independent_init: false,
        }
    }

    pub fn regime(&self, kind: ModelKind) -> ContextRegime {
        match kind {
            ModelKind::ModelA => ContextRegime::Fixed(Candidate::One),
            ModelKind::ModelB => ContextRegime::Fixed(Candidate::Two),
            ModelKind::RandomAssignment => ContextRegime::Random {
                election_day: self.election_day,
                seed: derive_seed(self.root_seed, stages::CONTEXT),
            },
            ModelKind::Baseline => ContextRegime::Ablated,
        }
    }

    pub fn init_seed(&self, kind: ModelKind) -> u64 {
        if kind == ModelKind::ModelB && self.independent_init {
            derive_seed(self.root_seed, stages::INIT_B)
        } else {
            derive_seed(self.root_seed, stages::INIT)
        }
    }
}

/// Training hooks that also learn which model is being trained.
pub trait ExperimentObserver: TrainObserver {
    fn begin_model(&mut self, _kind: ModelKind) {}
}

impl ExperimentObserver for crate::training::Silent {}

/// Train one model under its context regime; returns the run and the
/// minimum-validation-loss model.
pub fn train_model<O: ExperimentObserver + ?Sized>(
    prepared: &Prepared,
    config: &ExperimentConfig,
    kind: ModelKind,
    observer: &mut O,
) -> Result<(TrainRun, MixerModel), DatasetError> {
    observer.begin_model(kind);
    let regime = config.regime(kind);
    let model = MixerModel::init(config.mixer.apply(prepared), config.init_seed(kind))?;
    let train_set = prepared.samples(Split::Train, &regime);
    let valid_set = prepared.samples(Split::Valid, &regime);
    let run = train(model, &train_set, &valid_set, &config.protocol, observer)?;
    let best = select_checkpoint(&run)?;
    Ok((run, best))
}

/// Test-split predictions of a trained model under its regime's test rule.
pub fn test_predictions(
    prepared: &Prepared,
    config: &ExperimentConfig,
    kind: ModelKind,
    model: &MixerModel,
) -> Result<Vec<PredictionRecord>, DatasetError> {
    prepared.samples(Split::Test, &config.regime(kind)).predict(model)
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub run: TrainRun,
    pub best: MixerModel,
    pub test: Vec<PredictionRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{kind:?}: {source}")]
    Model { kind: ModelKind, source: DatasetError },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub models: Vec<TrainedModel>,
    /// Ensemble grid rows, Model A, Model B, random assignment, baseline.
    pub rows: Vec<SweepRow>,
}

impl Comparison {
    pub fn model(&self, kind: ModelKind) -> &TrainedModel {
        self.models.iter().find(|m| m.kind == kind).expect("all kinds trained")
    }
}

/// Build the comparison rows from test predictions of all four models.
pub fn compare(
    config: &ExperimentConfig,
    test: &[(ModelKind, &[PredictionRecord])],
) -> Result<Vec<SweepRow>, EnsembleError> {
    let get = |k| test.iter().find(|(kind, _)| *kind == k).map(|(_, s)| *s).unwrap_or(&[]);
    let inputs = SweepInputs {
        model_a: get(ModelKind::ModelA),
        model_b: get(ModelKind::ModelB),
        random_assignment: get(ModelKind::RandomAssignment),
    };
    let mut rows = sweep(&inputs, &config.grid, &config.eval)?;
    let baseline = evaluate(BASELINE_LABEL, get(ModelKind::Baseline), &config.eval)?;
    rows.push(SweepRow { config: None, report: baseline });
    Ok(rows)
}

/// Train all four models and evaluate every comparison row.
pub fn run_comparison<O: ExperimentObserver + ?Sized>(
    prepared: &Prepared,
    config: &ExperimentConfig,
    observer: &mut O,
) -> Result<Comparison, ExperimentError> {
    let mut models = Vec::with_capacity(4);
    for kind in ModelKind::ALL {
        let wrap = |source| ExperimentError::Model { kind, source };
        let (run, best) = train_model(prepared, config, kind, observer).map_err(wrap)?;
        let test = test_predictions(prepared, config, kind, &best).map_err(wrap)?;
        models.push(TrainedModel { kind, run, best, test });
    }
    let streams: Vec<(ModelKind, &[PredictionRecord])> = models.iter().map(|m| (m.kind, &m.test[..])).collect();
    let rows = compare(config, &streams)?;
    Ok(Comparison { models, rows })
}
