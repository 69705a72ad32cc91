//! Weighted averaging of the two candidate-conditioned models and the weight
//! sweep that produces the comparison table.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{evaluate, EvalConfig, EvaluationError, EvaluationReport, PredictionRecord};

pub const WEIGHT_TOLERANCE: f64 = 1e-12;
pub const MODEL_A_LABEL: &str = "Model A (Candidate-1 context)";
pub const MODEL_B_LABEL: &str = "Model B (Candidate-2 context)";
pub const RANDOM_LABEL: &str = "Random Assignment";
pub const BASELINE_LABEL: &str = "StockMixer (Baseline)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid weights ({w1}, {w2}): {reason}")]
    InvalidWeights { w1: f64, w2: f64, reason: &'static str },
    #[error("prediction lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty weight grid")]
    EmptyGrid,
    #[error("cannot parse ensemble label {0:?}")]
    BadLabel(String),
    #[error("prediction streams are not aligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

/// Convex weights over Model A (candidate-1 context) and Model B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub w1: f64,
    pub w2: f64,
}

impl EnsembleConfig {
    pub fn new(w1: f64, w2: f64) -> Result<Self, EnsembleError> {
        let bad = |reason| Err(EnsembleError::InvalidWeights { w1, w2, reason });
        if !w1.is_finite() || !w2.is_finite() {
            return bad("weights must be finite");
        }
        if !(0.0..=1.0).contains(&w1) || !(0.0..=1.0).contains(&w2) {
            return bad("weights must lie in [0, 1]");
        }
        if (w1 + w2 - 1.0).abs() > WEIGHT_TOLERANCE {
            return bad("weights must sum to 1");
        }
        Ok(EnsembleConfig { w1, w2 })
    }

    /// `k` percent on Model A, the rest on Model B.
    pub fn from_percent(k: u32) -> Result<Self, EnsembleError> {
        if k > 100 {
            return Err(EnsembleError::InvalidWeights { w1: k as f64 / 100.0, w2: 0.0, reason: "percent above 100" });
        }
        EnsembleConfig::new(k as f64 / 100.0, (100 - k) as f64 / 100.0)
    }

    /// `"20-Candidate-1, 80-Candidate-2"`. Whole percentages print without a
    /// fraction; anything else prints the shortest round-tripping decimal.
    pub fn label(&self) -> String {
        format!("{}-Candidate-1, {}-Candidate-2", percent_text(self.w1), percent_text(self.w2))
    }

    pub fn parse_label(label: &str) -> Result<Self, EnsembleError> {
        let bad = || EnsembleError::BadLabel(label.into());
        let (first, second) = label.split_once(", ").ok_or_else(bad)?;
        let p1 = first.strip_suffix("-Candidate-1").ok_or_else(bad)?;
        let p2 = second.strip_suffix("-Candidate-2").ok_or_else(bad)?;
        let w1 = parse_percent(p1).ok_or_else(bad)?;
        let w2 = parse_percent(p2).ok_or_else(bad)?;
        EnsembleConfig::new(w1, w2)
    }
}

fn percent_text(w: f64) -> String {
    let p = w * 100.0;
    let rounded = libm::round(p);
    if (p - rounded).abs() <= 1e-9 && w == rounded / 100.0 {
        format!("{}", rounded as i64)
    } else {
        // Written as a weight so the label parses back to the exact value.
        format!("w{w:?}")
    }
}

fn parse_percent(text: &str) -> Option<f64> {
    if let Some(w) = text.strip_prefix('w') {
        return w.parse().ok();
    }
    let k: u32 = text.parse().ok()?;
    (k <= 100).then(|| k as f64 / 100.0)
}

/// Default grid: 20/80, 40/60, 60/40, 80/20.
pub fn default_grid() -> Vec<EnsembleConfig> {
    [20, 40, 60, 80].iter().map(|k| EnsembleConfig::from_percent(*k).expect("static grid")).collect()
}

/// `w1 * a + w2 * b` per stock, clamped into `[min(a, b), max(a, b)]` so
/// rounding never leaves the convex hull.
pub fn combine(pred_a: &[f64], pred_b: &[f64], config: &EnsembleConfig) -> Result<Vec<f64>, EnsembleError> {
    EnsembleConfig::new(config.w1, config.w2)?;
    if pred_a.len() != pred_b.len() {
        return Err(EnsembleError::LengthMismatch(pred_a.len(), pred_b.len()));
    }
    Ok(pred_a
        .iter()
        .zip(pred_b)
        .map(|(&a, &b)| {
            let v = config.w1 * a + config.w2 * b;
            v.clamp(a.min(b), a.max(b))
        })
        .collect())
}

/// Combine two aligned prediction streams record by record.
pub fn combine_streams(
    a: &[PredictionRecord],
    b: &[PredictionRecord],
    config: &EnsembleConfig,
) -> Result<Vec<PredictionRecord>, EnsembleError> {
    if a.len() != b.len() {
        return Err(EnsembleError::Misaligned(format!("{} vs {} records", a.len(), b.len())));
    }
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            if ra.timestamp != rb.timestamp || ra.realized != rb.realized {
                return Err(EnsembleError::Misaligned(format!("records at {} and {} differ", ra.timestamp, rb.timestamp)));
            }
            Ok(PredictionRecord {
                timestamp: ra.timestamp,
                predicted: combine(&ra.predicted, &rb.predicted, config)?,
                realized: ra.realized.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: Option<EnsembleConfig>,
    pub report: EvaluationReport,
}

/// Test-split predictions of the models entering the comparison.
pub struct SweepInputs<'a> {
    pub model_a: &'a [PredictionRecord],
    pub model_b: &'a [PredictionRecord],
    pub random_assignment: &'a [PredictionRecord],
}

/// One row per grid config, then Model A, Model B and the random-assignment
/// model.
pub fn sweep(
    inputs: &SweepInputs<'_>,
    grid: &[EnsembleConfig],
    eval: &EvalConfig,
) -> Result<Vec<SweepRow>, EnsembleError> {
    if grid.is_empty() {
        return Err(EnsembleError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(grid.len() + 3);
    for config in grid {
        let stream = combine_streams(inputs.model_a, inputs.model_b, config)?;
        let report = evaluate(&config.label(), &stream, eval)?;
        rows.push(SweepRow { config: Some(*config), report });
    }
    for (label, stream) in
        [(MODEL_A_LABEL, inputs.model_a), (MODEL_B_LABEL, inputs.model_b), (RANDOM_LABEL, inputs.random_assignment)]
    {
        rows.push(SweepRow { config: None, report: evaluate(label, stream, eval)? });
    }
    Ok(rows)
}
