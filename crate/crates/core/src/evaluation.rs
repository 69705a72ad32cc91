//! Cross-sectional forecast metrics: IC, rank IC, Prec@N and the Sharpe ratio
//! of a top-1 backtest.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("constant input: the statistic is undefined")]
    Degenerate,
    #[error("non-finite input")]
    NonFinite,
    #[error("top-N size {n} is outside 1..={len}")]
    BadN { n: usize, len: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("empty prediction stream")]
    EmptyStream,
    #[error("record {index}: {source}")]
    Record { index: usize, source: MetricError },
    #[error("top-N list is empty")]
    NoPrecisionLevels,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Product-moment correlation. A constant vector on either side has no
/// correlation and yields [`MetricError::Degenerate`].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(MetricError::Degenerate);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Degenerate);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Stock indices by descending prediction; equal predictions keep index order.
pub fn top_n(predicted: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| predicted[b].total_cmp(&predicted[a]));
    order.truncate(n);
    order
}

/// Share of the `n` highest-predicted stocks whose realized return is positive.
pub fn precision_at_n(predicted: &[f64], realized: &[f64], n: usize) -> Result<f64, MetricError> {
    if predicted.len() != realized.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), realized.len()));
    }
    if n == 0 || n > predicted.len() {
        return Err(MetricError::BadN { n, len: predicted.len() });
    }
    let hits = top_n(predicted, n).into_iter().filter(|&i| realized[i] > 0.0).count();
    Ok(hits as f64 / n as f64)
}

/// `mean(r - rf) / std(r - rf)` with population std, not annualized.
pub fn sharpe(returns: &[f64], risk_free: f64) -> Result<f64, MetricError> {
    if returns.len() < 2 {
        return Err(MetricError::TooShort { needed: 2, got: returns.len() });
    }
    if !risk_free.is_finite() || returns.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free).collect();
    if is_constant(&excess) {
        return Err(MetricError::Degenerate);
    }
    let m = mean(&excess);
    let var = excess.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / excess.len() as f64;
    let sd = libm::sqrt(var);
    if sd == 0.0 {
        return Err(MetricError::Degenerate);
    }
    Ok(m / sd)
}

/// Model output and realized one-step returns for one test step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub timestamp: NaiveDateTime,
    pub predicted: Vec<f64>,
    pub realized: Vec<f64>,
}

/// How the Sharpe ratio's portfolio is formed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestPolicy {
    /// Equal-weight the `hold_top` highest-predicted stocks each step.
    pub hold_top: usize,
    pub risk_free: f64,
    pub transaction_costs: bool,
    pub annualized: bool,
}

impl Default for BacktestPolicy {
    fn default() -> Self {
        BacktestPolicy { hold_top: 1, risk_free: 0.0, transaction_costs: false, annualized: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub precision_at: Vec<usize>,
    pub policy: BacktestPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { precision_at: vec![10], policy: BacktestPolicy::default() }
    }
}

/// `None` marks a statistic with no defined value (every step degenerate, or
/// a flat backtest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub label: String,
    pub steps: usize,
    pub ic: Option<f64>,
    pub ric: Option<f64>,
    pub prec: BTreeMap<usize, f64>,
    pub sr: Option<f64>,
    /// Steps with a constant cross-section, left out of the IC and RIC means.
    pub degenerate_steps: usize,
    pub backtest: Vec<f64>,
    pub policy: BacktestPolicy,
}

impl EvaluationReport {
    pub fn precision(&self, n: usize) -> Option<f64> {
        self.prec.get(&n).copied()
    }
}

pub fn evaluate(label: &str, stream: &[PredictionRecord], config: &EvalConfig) -> Result<EvaluationReport, EvaluationError> {
    if stream.is_empty() {
        return Err(EvaluationError::EmptyStream);
    }
    if config.precision_at.is_empty() {
        return Err(EvaluationError::NoPrecisionLevels);
    }
    let (mut ic_sum, mut ric_sum, mut used, mut degenerate) = (0.0, 0.0, 0usize, 0usize);
    let mut prec_sum: BTreeMap<usize, f64> = config.precision_at.iter().map(|n| (*n, 0.0)).collect();
    let mut backtest = Vec::with_capacity(stream.len());
    for (index, rec) in stream.iter().enumerate() {
        let wrap = |source| EvaluationError::Record { index, source };
        match (pearson(&rec.predicted, &rec.realized), spearman(&rec.predicted, &rec.realized)) {
            (Ok(ic), Ok(ric)) => {
                ic_sum += ic;
                ric_sum += ric;
                used += 1;
            }
            (Err(MetricError::Degenerate), _) | (_, Err(MetricError::Degenerate)) => degenerate += 1,
            (Err(e), _) | (_, Err(e)) => return Err(wrap(e)),
        }
        for (n, acc) in prec_sum.iter_mut() {
            *acc += precision_at_n(&rec.predicted, &rec.realized, *n).map_err(wrap)?;
        }
        let k = config.policy.hold_top.min(rec.predicted.len());
        if k == 0 {
            return Err(wrap(MetricError::BadN { n: config.policy.hold_top, len: rec.predicted.len() }));
        }
        let held = top_n(&rec.predicted, k);
        backtest.push(held.iter().map(|&i| rec.realized[i]).sum::<f64>() / k as f64);
    }
    let steps = stream.len();
    let sr = match sharpe(&backtest, config.policy.risk_free) {
        Ok(v) => Some(v),
        Err(MetricError::Degenerate | MetricError::TooShort { .. }) => None,
        Err(e) => return Err(EvaluationError::Record { index: 0, source: e }),
    };
    Ok(EvaluationReport {
        label: label.into(),
        steps,
        ic: (used > 0).then(|| ic_sum / used as f64),
        ric: (used > 0).then(|| ric_sum / used as f64),
        prec: prec_sum.into_iter().map(|(n, s)| (n, s / steps as f64)).collect(),
        sr,
        degenerate_steps: degenerate,
        backtest,
        policy: config.policy.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn pearson_examples() {
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0));
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap(), -1.0));
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::Degenerate));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(MetricError::TooShort { needed: 2, got: 1 }));
    }

    #[test]
    fn spearman_examples() {
        assert!(close(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), -0.5));
        let x = [0.3, -1.0, 2.5, 7.0];
        let y: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
        assert!(close(spearman(&x, &y).unwrap(), 1.0));
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        // ranks (1.5, 1.5, 3) vs (1, 2, 3): r = 0.75 / sqrt(0.5 * 2) = sqrt(3)/2
        assert!(close(spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), libm::sqrt(3.0) / 2.0));
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_n(&[3.0, 2.0, 1.0], &[0.1, -0.1, 0.2], 2).unwrap(), 0.5);
        assert_eq!(precision_at_n(&[0.0, 0.0, 0.0], &[0.1, 0.2, 0.3], 3).unwrap(), 1.0);
        assert_eq!(precision_at_n(&[1.0, 2.0], &[1.0, -1.0], 2).unwrap(), 0.5);
        // ties keep index order: stock 0 wins
        assert_eq!(precision_at_n(&[1.0, 1.0], &[1.0, -1.0], 1).unwrap(), 1.0);
        assert!(precision_at_n(&[1.0], &[1.0], 0).is_err());
        assert!(precision_at_n(&[1.0], &[1.0], 2).is_err());
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(sharpe(&[0.01, -0.01], 0.0).unwrap(), 0.0);
        assert_eq!(sharpe(&[0.1, 0.1, 0.1], 0.0), Err(MetricError::Degenerate));
        // mean 0.02, population std 0.01
        assert!(close(sharpe(&[0.01, 0.03], 0.0).unwrap(), 2.0));
    }

    fn record(pred: &[f64], real: &[f64]) -> PredictionRecord {
        let ts = NaiveDate::from_ymd_opt(2024, 11, 6).unwrap().and_hms_opt(9, 30, 0).unwrap();
        PredictionRecord { timestamp: ts, predicted: pred.to_vec(), realized: real.to_vec() }
    }

    #[test]
    fn perfect_and_inverted_forecasts() {
        let real = [[0.01, -0.02, 0.03, 0.005], [-0.01, 0.02, -0.03, 0.004]];
        let cfg = EvalConfig { precision_at: vec![2], ..EvalConfig::default() };
        let perfect: Vec<_> = real.iter().map(|r| record(r, r)).collect();
        let rep = evaluate("p", &perfect, &cfg).unwrap();
        assert!(close(rep.ic.unwrap(), 1.0) && close(rep.ric.unwrap(), 1.0));
        assert_eq!(rep.precision(2), Some(1.0));
        let inverted: Vec<_> = real.iter().map(|r| record(&r.map(|v| -v), r)).collect();
        let rep = evaluate("n", &inverted, &cfg).unwrap();
        assert!(close(rep.ic.unwrap(), -1.0) && close(rep.ric.unwrap(), -1.0));
    }

    #[test]
    fn degenerate_steps_counted() {
        let cfg = EvalConfig { precision_at: vec![1], ..EvalConfig::default() };
        let stream = [record(&[0.0, 0.0], &[0.1, 0.2]), record(&[1.0, 2.0], &[0.1, 0.2])];
        let rep = evaluate("d", &stream, &cfg).unwrap();
        assert_eq!(rep.degenerate_steps, 1);
        assert!(close(rep.ic.unwrap(), 1.0));
        assert_eq!(rep.backtest, vec![0.1, 0.2]);
        assert!(evaluate("e", &[], &cfg).is_err());
    }
}
