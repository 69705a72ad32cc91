//! The staged command pipeline. Each stage reads the artifacts of earlier
//! stages from the output directory, so any stage can be rerun alone.
//!
//! Output layout (relative to `paths.output`):
//!
//! | stage    | artifacts |
//! |----------|-----------|
//! | synth    | `paths.bars`, `paths.universe`, `synth.json` |
//! | agents   | `agents/report.md`, `agents/sector_impacts.csv`, `agents/transcript.json` |
//! | ingest   | `panel.csv`, `repair.log`, `ingest.json` |
//! | features | `features.csv`, `normalization.json` |
//! | signals  | `sector_impacts.csv`, `political.csv`, `context/<model>.csv`, `signals.json` |
//! | train    | `checkpoints/<model>.json`, `logs/<model>_epochs.csv`, `train.json` |
//! | ensemble | `predictions/<label>.csv` (four models and each grid config), `ensemble.json` |
//! | evaluate | `reports/<label>.json`, `comparison.csv` |
//! | report   | `plot_data.csv`, `summary.md` |
//!
//! Every run ends by rewriting `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use edsmf_core::agents::{filter_corpus, run_pipeline, AgentRole, GenerationParams, MockBackend, Templates, TextBackend};
use edsmf_core::dataset::{ContextRegime, Prepared};
use edsmf_core::ensemble::{combine_streams, BASELINE_LABEL, MODEL_A_LABEL, MODEL_B_LABEL, RANDOM_LABEL};
use edsmf_core::evaluation::{evaluate, EvaluationReport, PredictionRecord};
use edsmf_core::experiment::{test_predictions, train_model, ExperimentConfig, ExperimentObserver, ModelKind};
use edsmf_core::features::FeatureTensor;
use edsmf_core::market::{repair_gaps, split_ranges, step_date, AlignedPanel, DatasetSplit};
use edsmf_core::political::{assign_context_random, Candidate, ContextAssignment, SectorImpactTable};
use edsmf_core::seed::{derive_seed, stages};
use edsmf_core::synth::generate_synthetic;
use edsmf_core::training::{EpochRecord, TrainObserver};
use serde::{Deserialize, Serialize};

use crate::backend::HttpBackend;
use crate::checkpoint::Checkpoint;
use crate::config::{BackendKind, RunConfig, STAGES};
use crate::formats::{
    fmt_opt, read_bars, read_json, read_predictions, read_sector_table, read_universe, write_bars, write_context,
    write_epoch_log, write_feature_dump, write_json, write_panel, write_predictions, write_sector_table, write_text,
    write_universe,
};
use crate::manifest::write_manifest;

/// A stage that failed, with its name for the exit message.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source:#}")]
pub struct StageError {
    pub stage: String,
    pub source: anyhow::Error,
}

/// Metadata written next to the other artifacts of a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageInfo<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub info: T,
}

/// Report file: the evaluation report plus the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub label: String,
    pub steps: usize,
    pub ic: Option<f64>,
    pub ric: Option<f64>,
    pub prec: BTreeMap<usize, f64>,
    pub sr: Option<f64>,
    pub degenerate_steps: usize,
    pub backtest: Vec<f64>,
    pub policy: edsmf_core::evaluation::BacktestPolicy,
    pub config_hash: String,
}

impl ReportFile {
    pub fn new(report: EvaluationReport, config_hash: &str) -> Self {
        ReportFile {
            label: report.label,
            steps: report.steps,
            ic: report.ic,
            ric: report.ric,
            prec: report.prec,
            sr: report.sr,
            degenerate_steps: report.degenerate_steps,
            backtest: report.backtest,
            policy: report.policy,
            config_hash: config_hash.into(),
        }
    }
}

/// File-name form of a label: lowercase alphanumerics joined by `_`.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn kind_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::ModelA => MODEL_A_LABEL,
        ModelKind::ModelB => MODEL_B_LABEL,
        ModelKind::RandomAssignment => RANDOM_LABEL,
        ModelKind::Baseline => BASELINE_LABEL,
    }
}

/// Echo progress to stderr unless quiet.
struct Progress {
    quiet: bool,
    started: Instant,
    current: Option<ModelKind>,
}

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

impl TrainObserver for Progress {
    fn now_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, r: &EpochRecord) {
        let name = self.current.map_or("model", |k| k.name());
        self.say(format!(
            "  {name} epoch {:>3}  train {:.6}  valid {:.6}  ({:.1}s)",
            r.epoch, r.train_loss, r.valid_loss, r.seconds
        ));
    }
}

impl ExperimentObserver for Progress {
    fn begin_model(&mut self, kind: ModelKind) {
        self.current = Some(kind);
        self.say(format!("training {}", kind.name()));
    }
}

pub struct Pipeline {
    pub config: RunConfig,
    pub hash: String,
    progress: Progress,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SynthInfo {
    seed: u64,
    election_day: NaiveDate,
    steps: usize,
    stocks: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct IngestInfo {
    rows: usize,
    stocks: usize,
    steps: usize,
    repairs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NormalizationInfo {
    features: Vec<String>,
    stocks: Vec<String>,
    mean: Vec<Vec<f64>>,
    std: Vec<Vec<f64>>,
    /// `(stock, feature)` pairs with zero training variance.
    zero_std: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SignalsInfo {
    table_source: String,
    election_day: NaiveDate,
    context_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TrainedInfo {
    model: ModelKind,
    best_epoch: usize,
    valid_loss: f64,
    epochs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TrainInfo {
    models: Vec<TrainedInfo>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EnsembleInfo {
    /// Comparison label to predictions file, in row order.
    rows: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AgentsInfo {
    backend: String,
    articles: Vec<String>,
    rejected: Vec<String>,
    transcript: Vec<edsmf_core::agents::AgentRun>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        let hash = config.hash();
        Pipeline { config, hash, progress: Progress { quiet: false, started: Instant::now(), current: None } }
    }

    pub fn quiet(mut self, quiet: bool) -> Self {
        self.progress.quiet = quiet;
        self
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.config.paths.output.join(rel)
    }

    fn ensure_dir(&self, rel: &str) -> Result<PathBuf> {
        let dir = self.out(rel);
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }

    fn info<T: Serialize>(&self, rel: &str, info: T) -> Result<()> {
        write_json(&self.out(rel), &StageInfo { config_hash: self.hash.clone(), info })
    }

    /// Run stages in the given order, then write the manifest. Partial
    /// artifacts of a failed stage are kept.
    pub fn run(&mut self, stages: &[String]) -> Result<(), StageError> {
        fn wrap(stage: &str) -> impl FnOnce(anyhow::Error) -> StageError + '_ {
            move |source| StageError { stage: stage.into(), source }
        }
        self.ensure_dir("").map_err(wrap("setup"))?;
        for stage in stages {
            self.progress.say(format!("== {stage}"));
            let result = match stage.as_str() {
                "synth" => self.synth(),
                "agents" => self.agents(),
                "ingest" => self.ingest(),
                "features" => self.features(),
                "signals" => self.signals(),
                "train" => self.train(),
                "ensemble" => self.ensemble(),
                "evaluate" => self.evaluate(),
                "report" => self.report(),
                other => Err(anyhow::anyhow!("unknown stage `{other}` (known: {})", STAGES.join(", "))),
            };
            if let Err(e) = result {
                let _ = write_manifest(&self.config.paths.output, &self.hash, self.config.seed);
                return Err(wrap(stage)(e));
            }
        }
        write_manifest(&self.config.paths.output, &self.hash, self.config.seed).map_err(wrap("manifest"))?;
        Ok(())
    }

    pub fn synth(&mut self) -> Result<()> {
        let mut spec = self.config.synthetic.clone();
        spec.seed = derive_seed(self.config.seed, stages::SYNTH);
        let table = match &self.config.paths.sector_table {
            Some(p) => read_sector_table(p)?,
            None => SectorImpactTable::default(),
        };
        let data = generate_synthetic(&spec, &table)?;
        for p in [&self.config.paths.bars, &self.config.paths.universe] {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
        }
        write_bars(&self.config.paths.bars, &data.bars)?;
        write_universe(&self.config.paths.universe, &data.universe)?;
        self.info(
            "synth.json",
            SynthInfo {
                seed: spec.seed,
                election_day: data.election_day,
                steps: data.timestamps.len(),
                stocks: data.universe.len(),
            },
        )
    }

    fn backend(&self) -> Result<Box<dyn TextBackend>> {
        Ok(match self.config.agents.backend {
            BackendKind::Mock => Box::new(MockBackend::default()),
            BackendKind::Http => Box::new(HttpBackend::from_env().map_err(anyhow::Error::msg)?),
        })
    }

    fn templates(&self) -> Result<Templates> {
        let mut t = Templates::default();
        if let Some(dir) = &self.config.agents.templates {
            for (role, slot) in [
                (AgentRole::NewsAnalyst, &mut t.news),
                (AgentRole::PolicyAnalyst, &mut t.policy),
                (AgentRole::MarketAnalyst, &mut t.market),
                (AgentRole::SynthesisAnalyst, &mut t.synthesis),
            ] {
                let path = dir.join(format!("{}.txt", slug(role.name())));
                if path.exists() {
                    *slot = std::fs::read_to_string(&path)?;
                }
            }
        }
        Ok(t)
    }

    pub fn agents(&mut self) -> Result<()> {
        let a = &self.config.agents;
        let articles = match &self.config.paths.corpus {
            Some(dir) => crate::corpus::load_corpus(dir)?,
            None => Vec::new(),
        };
        let (kept, rejected) = filter_corpus(articles, a.start, a.end);
        let backend = self.backend()?;
        let params = GenerationParams { temperature: a.temperature, max_tokens: a.max_tokens };
        let out = run_pipeline(&kept, backend.as_ref(), &self.templates()?, &params).map_err(|e| {
            if let Some(raw) = e.raw_output() {
                let _ = self.ensure_dir("agents").and_then(|d| write_text(&d.join("failed_output.md"), raw));
            }
            anyhow::Error::new(e)
        })?;
        let dir = self.ensure_dir("agents")?;
        write_text(&dir.join("report.md"), &out.markdown_report)?;
        write_sector_table(&dir.join("sector_impacts.csv"), &out.sector_table)?;
        self.info(
            "agents/transcript.json",
            AgentsInfo {
                backend: backend.backend_id(),
                articles: kept.iter().map(|a| a.article_id.clone()).collect(),
                rejected,
                transcript: out.transcript,
            },
        )
    }

    pub fn ingest(&mut self) -> Result<()> {
        let universe = read_universe(&self.config.paths.universe)?;
        let bars = read_bars(&self.config.paths.bars, &universe)?;
        let (panel, repairs) = repair_gaps(&bars)?;
        write_panel(&self.out("panel.csv"), &panel)?;
        let log: String = repairs.iter().map(|r| format!("{r}\n")).collect();
        write_text(&self.out("repair.log"), &log)?;
        self.progress.say(format!(
            "  {} rows, {} stocks x {} steps, {} repaired cells",
            bars.row_count,
            panel.n_stocks(),
            panel.steps(),
            repairs.len()
        ));
        self.info(
            "ingest.json",
            IngestInfo { rows: bars.row_count, stocks: panel.n_stocks(), steps: panel.steps(), repairs: repairs.len() },
        )
    }

    /// The ingested panel; it is dense, so re-reading needs no repair.
    pub fn load_panel(&self) -> Result<AlignedPanel> {
        let universe = read_universe(&self.config.paths.universe)?;
        let bars = read_bars(&self.out("panel.csv"), &universe).context("run the ingest stage first")?;
        let (panel, repairs) = repair_gaps(&bars)?;
        if !repairs.is_empty() {
            bail!("panel.csv has gaps; rerun ingest");
        }
        Ok(panel)
    }

    fn split(&self, panel: &AlignedPanel) -> Result<DatasetSplit> {
        let d = &self.config.data;
        Ok(DatasetSplit::from_counts(&panel.timestamps, d.train_steps, d.valid_steps, d.test_steps)?)
    }

    fn election_day(&self, panel: &AlignedPanel, split: &DatasetSplit) -> Result<NaiveDate> {
        Ok(match self.config.data.election_day {
            Some(d) => d,
            None => {
                let ranges = split_ranges(&panel.timestamps, split)?;
                step_date(&panel.timestamps[ranges.valid.start])
            }
        })
    }

    fn prepare(&self, panel: AlignedPanel, table: SectorImpactTable) -> Result<Prepared> {
        let split = self.split(&panel)?;
        let d = &self.config.data;
        Ok(Prepared::new(panel, &split, d.lookback, d.ema_period, d.layout, table)?)
    }

    pub fn features(&mut self) -> Result<()> {
        let panel = self.load_panel()?;
        let prepared = self.prepare(panel, SectorImpactTable::default())?;
        let layout = prepared.layout;
        let names = layout.names();
        let f = layout.market_width();
        let (n, steps) = (prepared.panel.n_stocks(), prepared.panel.steps());
        // market block of every step, normalized with training statistics
        let window = edsmf_core::market::Window { start: 0, lookback: steps, target: steps };
        let full = edsmf_core::features::assemble(
            &window,
            &prepared.indicators,
            &prepared.panel.universe,
            None,
            &prepared.stats,
            &layout,
        )?;
        let mut market = FeatureTensor::zeros(n, steps, f);
        for i in 0..n {
            for t in 0..steps {
                market.row_mut(i, t).copy_from_slice(&full.row(i, t)[..f]);
            }
        }
        let universe = &prepared.panel.universe;
        write_feature_dump(&self.out("features.csv"), &names[..f], universe, &prepared.panel.timestamps, &market)?;
        let indicator_names = &names[..edsmf_core::features::INDICATOR_COUNT];
        self.info(
            "normalization.json",
            NormalizationInfo {
                features: indicator_names.to_vec(),
                stocks: universe.iter().map(|(id, _)| id.to_string()).collect(),
                mean: prepared.stats.mean.iter().map(|m| m.to_vec()).collect(),
                std: prepared.stats.std.iter().map(|s| s.to_vec()).collect(),
                zero_std: prepared
                    .stats
                    .zero_std()
                    .into_iter()
                    .map(|(i, j)| (universe.id(i).to_string(), indicator_names[j].clone()))
                    .collect(),
            },
        )
    }

    /// The table the model uses: configured file, else the agents' output,
    /// else the built-in one.
    fn resolve_table(&self) -> Result<(SectorImpactTable, String)> {
        if let Some(p) = &self.config.paths.sector_table {
            return Ok((read_sector_table(p)?, p.display().to_string()));
        }
        let agents = self.out("agents/sector_impacts.csv");
        if agents.exists() {
            return Ok((read_sector_table(&agents)?, "agents/sector_impacts.csv".into()));
        }
        Ok((SectorImpactTable::default(), "built-in".into()))
    }

    pub fn signals(&mut self) -> Result<()> {
        let panel = self.load_panel()?;
        let split = self.split(&panel)?;
        let ranges = split_ranges(&panel.timestamps, &split)?;
        let election_day = self.election_day(&panel, &split)?;
        let (table, source) = self.resolve_table()?;
        write_sector_table(&self.out("sector_impacts.csv"), &table)?;

        let mut w = csv::Writer::from_path(self.out("political.csv"))?;
        w.write_record(["stock_id", "sector", "candidate_impact_1", "candidate_impact_2"])?;
        for (id, sector) in panel.universe.iter() {
            w.write_record([
                id,
                sector.name(),
                &table.impact(Candidate::One, sector).to_string(),
                &table.impact(Candidate::Two, sector).to_string(),
            ])?;
        }
        w.flush()?;

        let exp = self.config.experiment(election_day);
        let dir = self.ensure_dir("context")?;
        let mut context_seed = 0;
        for kind in ModelKind::ALL {
            let contexts = match exp.regime(kind) {
                ContextRegime::Ablated => continue,
                ContextRegime::Fixed(c) => {
                    let contexts = (0..panel.steps())
                        .map(|t| if ranges.test.contains(&t) { Candidate::One } else { c })
                        .collect();
                    ContextAssignment { contexts, seed: None, election_day: None }
                }
                ContextRegime::Random { election_day, seed } => {
                    context_seed = seed;
                    assign_context_random(&panel.timestamps, election_day, seed)
                }
            };
            write_context(&dir.join(format!("{}.csv", kind.name())), &panel.timestamps, &contexts)?;
        }
        self.info("signals.json", SignalsInfo { table_source: source, election_day, context_seed })
    }

    fn used_table(&self) -> Result<SectorImpactTable> {
        read_sector_table(&self.out("sector_impacts.csv")).context("run the signals stage first")
    }

    fn experiment_inputs(&self) -> Result<(Prepared, ExperimentConfig)> {
        let panel = self.load_panel()?;
        let split = self.split(&panel)?;
        let election_day = self.election_day(&panel, &split)?;
        let prepared = self.prepare(panel, self.used_table()?)?;
        Ok((prepared, self.config.experiment(election_day)))
    }

    pub fn train(&mut self) -> Result<()> {
        let (prepared, exp) = self.experiment_inputs()?;
        let ckpt_dir = self.config.checkpoint_dir();
        std::fs::create_dir_all(&ckpt_dir)?;
        let logs = self.ensure_dir("logs")?;
        let mut models = Vec::new();
        for kind in ModelKind::ALL {
            self.progress.started = Instant::now();
            let (run, best) = train_model(&prepared, &exp, kind, &mut self.progress)?;
            write_epoch_log(&logs.join(format!("{}_epochs.csv", kind.name())), &run.epochs)?;
            let best_epoch = run.best_epoch().context("no epochs recorded")?;
            let valid_loss = run.epochs[best_epoch - 1].valid_loss;
            Checkpoint::from_model(kind, &best, best_epoch, valid_loss, &self.hash)
                .save(&ckpt_dir.join(format!("{}.json", kind.name())))?;
            models.push(TrainedInfo { model: kind, best_epoch, valid_loss, epochs: run.epochs.len() });
        }
        self.info("train.json", TrainInfo { models })
    }

    pub fn ensemble(&mut self) -> Result<()> {
        let (prepared, exp) = self.experiment_inputs()?;
        let dir = self.ensure_dir("predictions")?;
        let universe = &prepared.panel.universe;
        let mut streams = BTreeMap::new();
        for kind in ModelKind::ALL {
            let ckpt = Checkpoint::load(&self.config.checkpoint_dir().join(format!("{}.json", kind.name())))
                .context("run the train stage first")?;
            if ckpt.config_hash != self.hash {
                self.progress.say(format!("  note: {} checkpoint was trained under config {}", kind.name(), ckpt.config_hash));
            }
            let model = ckpt.to_model()?;
            streams.insert(kind, test_predictions(&prepared, &exp, kind, &model)?);
        }
        let mut rows = Vec::new();
        for cfg in &exp.grid {
            let combined = combine_streams(&streams[&ModelKind::ModelA], &streams[&ModelKind::ModelB], cfg)?;
            let file = format!("predictions/{}.csv", slug(&cfg.label()));
            write_predictions(&self.out(&file), universe, &combined)?;
            rows.push((cfg.label(), file));
        }
        for kind in [ModelKind::ModelA, ModelKind::ModelB, ModelKind::RandomAssignment, ModelKind::Baseline] {
            let file = format!("predictions/{}.csv", kind.name());
            write_predictions(&dir.join(format!("{}.csv", kind.name())), universe, &streams[&kind])?;
            rows.push((kind_label(kind).to_string(), file));
        }
        self.info("ensemble.json", EnsembleInfo { rows })
    }

    fn ensemble_rows(&self) -> Result<Vec<(String, String)>> {
        let info: StageInfo<EnsembleInfo> = read_json(&self.out("ensemble.json")).context("run the ensemble stage first")?;
        Ok(info.info.rows)
    }

    pub fn evaluate(&mut self) -> Result<()> {
        let universe = read_universe(&self.config.paths.universe)?;
        let dir = self.ensure_dir("reports")?;
        let mut reports = Vec::new();
        for (label, file) in self.ensemble_rows()? {
            let stream: Vec<PredictionRecord> = read_predictions(&self.out(&file), &universe)?;
            let report = evaluate(&label, &stream, &self.config.evaluation).with_context(|| format!("evaluating `{label}`"))?;
            write_json(&dir.join(format!("{}.json", slug(&label))), &ReportFile::new(report.clone(), &self.hash))?;
            reports.push(report);
        }
        write_comparison(&self.out("comparison.csv"), &self.config.evaluation.precision_at, &reports)
    }

    fn load_reports(&self) -> Result<Vec<ReportFile>> {
        self.ensemble_rows()?
            .iter()
            .map(|(label, _)| read_json(&self.out(&format!("reports/{}.json", slug(label)))).context("run the evaluate stage first"))
            .collect()
    }

    pub fn report(&mut self) -> Result<()> {
        let reports = self.load_reports()?;
        let cuts = &self.config.evaluation.precision_at;
        let mut w = csv::Writer::from_path(self.out("plot_data.csv"))?;
        w.write_record(["model_label", "metric", "value"])?;
        for r in &reports {
            for n in cuts {
                w.write_record([r.label.as_str(), &format!("prec_at_{n}"), &fmt_opt(r.prec.get(n).copied())])?;
            }
            for (m, v) in [("ic", r.ic), ("ric", r.ric), ("sr", r.sr)] {
                w.write_record([r.label.as_str(), m, &fmt_opt(v)])?;
            }
        }
        w.flush()?;

        let mut md = String::from("# Comparison on the test split\n\n");
        md.push_str(&format!("Config hash: `{}`\n\n", self.hash));
        let mut header = String::from("| model |");
        let mut rule = String::from("|---|");
        for n in cuts {
            header.push_str(&format!(" Prec@{n} |"));
            rule.push_str("---:|");
        }
        header.push_str(" IC | RIC | SR |\n");
        rule.push_str("---:|---:|---:|\n");
        md.push_str(&header);
        md.push_str(&rule);
        let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        for r in &reports {
            md.push_str(&format!("| {} |", r.label));
            for n in cuts {
                md.push_str(&format!(" {} |", cell(r.prec.get(n).copied())));
            }
            md.push_str(&format!(" {} | {} | {} |\n", cell(r.ic), cell(r.ric), cell(r.sr)));
        }
        if let Some(r) = reports.first() {
            let p = &r.policy;
            md.push_str(&format!(
                "\nBacktest: hold the top {} predicted stock(s) each step, risk-free rate {}, transaction costs {}, \
                 annualized {}. {} test steps.\n",
                p.hold_top,
                p.risk_free,
                if p.transaction_costs { "on" } else { "off" },
                if p.annualized { "yes" } else { "no" },
                r.steps
            ));
        }
        if let Ok(info) = read_json::<StageInfo<TrainInfo>>(&self.out("train.json")) {
            md.push_str("\n| model | best epoch | validation loss |\n|---|---:|---:|\n");
            for m in info.info.models {
                md.push_str(&format!("| {} | {} / {} | {:.6} |\n", m.model.name(), m.best_epoch, m.epochs, m.valid_loss));
            }
        }
        write_text(&self.out("summary.md"), &md)
    }
}

/// `model_label, prec_at_<n>..., ic, ric, sr`; undefined values are empty.
pub fn write_comparison(path: &Path, cuts: &[usize], reports: &[EvaluationReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["model_label".to_string()];
    header.extend(cuts.iter().map(|n| format!("prec_at_{n}")));
    header.extend(["ic", "ric", "sr"].map(String::from));
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.label.clone()];
        row.extend(cuts.iter().map(|n| fmt_opt(r.precision(*n))));
        row.extend([r.ic, r.ric, r.sr].map(fmt_opt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
