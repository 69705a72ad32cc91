//! Synthetic minute bars with a candidate-conditioned sector drift after
//! election day, for desk-scale end-to-end checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{DatasetSplit, MarketError, MinuteBar, Sector, StockUniverse, SECTOR_COUNT};
use crate::political::{Candidate, SectorImpactTable};

/// Regular-session minutes per trading day, 09:30 through 15:59.
pub const MINUTES_PER_DAY: usize = 390;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("at least one stock is required")]
    NoStocks,
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_stocks: usize,
    pub train_steps: usize,
    pub valid_steps: usize,
    pub test_steps: usize,
    /// Per-step log-return standard deviation.
    pub base_volatility: f64,
    /// Per-step log drift magnitude applied from election day on.
    pub drift: f64,
    pub winner: Candidate,
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Trading-day index (0-based) of election day; `None` means the day of
    /// the first validation step.
    pub election_day_index: Option<usize>,
    pub start_price: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_stocks: 33,
            train_steps: 1560,
            valid_steps: 390,
            test_steps: 390,
            base_volatility: 1e-4,
            drift: 3e-4,
            winner: Candidate::One,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2024, 10, 30).expect("valid date"),
            election_day_index: None,
            start_price: 100.0,
        }
    }
}

impl SyntheticSpec {
    pub fn total_steps(&self) -> usize {
        self.train_steps + self.valid_steps + self.test_steps
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_stocks < 1 {
            return Err(SynthError::NoStocks);
        }
        if self.train_steps == 0 || self.valid_steps == 0 || self.test_steps == 0 {
            return Err(SynthError::Invalid("every split needs at least one step".into()));
        }
        if !(self.drift >= 0.0) || !self.drift.is_finite() {
            return Err(SynthError::Invalid("drift must be finite and non-negative".into()));
        }
        if !(self.base_volatility >= 0.0) || !self.base_volatility.is_finite() {
            return Err(SynthError::Invalid("volatility must be finite and non-negative".into()));
        }
        if !(self.start_price > 0.0) || !self.start_price.is_finite() {
            return Err(SynthError::Invalid("start price must be positive".into()));
        }
        Ok(())
    }
}

/// Sectors dealt round-robin so every sector is covered once `n >= 11`.
pub fn synthetic_universe(n: usize) -> Result<StockUniverse, SynthError> {
    if n == 0 {
        return Err(SynthError::NoStocks);
    }
    let stocks = (0..n).map(|i| (format!("SYN{i:03}"), Sector::ALL[i % SECTOR_COUNT])).collect();
    Ok(StockUniverse::new(stocks)?)
}

/// Weekday trading days from `start` (weekends skipped).
pub fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = start;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day += Duration::days(1);
    }
    out
}

/// Minute stamps of `steps` consecutive session minutes.
pub fn session_timestamps(start: NaiveDate, steps: usize) -> Vec<NaiveDateTime> {
    let open = NaiveTime::from_hms_opt(9, 30, 0).expect("valid time");
    let days = trading_days(start, steps.div_ceil(MINUTES_PER_DAY));
    (0..steps)
        .map(|k| days[k / MINUTES_PER_DAY].and_time(open) + Duration::minutes((k % MINUTES_PER_DAY) as i64))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub universe: StockUniverse,
    pub timestamps: Vec<NaiveDateTime>,
    /// Timestamp-major: all stocks at step 0, then step 1, ...
    pub bars: Vec<MinuteBar>,
    pub split: DatasetSplit,
    pub election_day: NaiveDate,
}

/// Geometric random walk per stock. From election day on, each stock drifts
/// by `drift * impact(winner, sector)`.
pub fn generate_synthetic(spec: &SyntheticSpec, table: &SectorImpactTable) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let universe = synthetic_universe(spec.n_stocks)?;
    let total = spec.total_steps();
    let timestamps = session_timestamps(spec.start_date, total);
    let election_day = match spec.election_day_index {
        Some(k) => *trading_days(spec.start_date, k + 1).last().expect("k + 1 days"),
        None => timestamps[spec.train_steps].date(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.base_volatility;
    let drifts: Vec<f64> =
        universe.iter().map(|(_, s)| spec.drift * table.impact(spec.winner, s) as f64).collect();
    let mut last_close: Vec<f64> =
        (0..universe.len()).map(|_| spec.start_price * (1.0 + 0.5 * rng.random::<f64>())).collect();

    let mut bars = Vec::with_capacity(total * universe.len());
    for ts in &timestamps {
        let post = ts.date() >= election_day;
        for (i, (id, _)) in universe.iter().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            let up: f64 = rng.sample(StandardNormal);
            let down: f64 = rng.sample(StandardNormal);
            let vol: f64 = rng.sample(StandardNormal);
            let drift = if post { drifts[i] } else { 0.0 };
            let open = last_close[i];
            let close = open * libm::exp(drift + sigma * eps);
            let high = open.max(close) * libm::exp(libm::fabs(up) * sigma / 2.0);
            let low = open.min(close) * libm::exp(-libm::fabs(down) * sigma / 2.0);
            bars.push(MinuteBar {
                stock_id: id.into(),
                timestamp: *ts,
                open,
                high,
                low,
                close,
                volume: libm::round(1000.0 * libm::exp(0.5 * vol)),
            });
            last_close[i] = close;
        }
    }
    let split = DatasetSplit::from_counts(&timestamps, spec.train_steps, spec.valid_steps, spec.test_steps)?;
    Ok(SyntheticData { universe, timestamps, bars, split, election_day })
}
