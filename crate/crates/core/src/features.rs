//! Per-stock market indicators, training-split normalization and assembly of
//! the `N x T x (F + 3)` model input.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AlignedPanel, Ohlcv, StockUniverse, Window, SECTOR_COUNT};
use crate::political::PoliticalFeatures;

/// Market indicators in canonical column order.
pub const MARKET_INDICATORS: [&str; 7] = ["open", "close", "high", "low", "volume", "daily_variation", "ema"];
pub const INDICATOR_COUNT: usize = MARKET_INDICATORS.len();
/// Column of the close price in both the indicator set and the assembled tensor.
pub const CLOSE_INDEX: usize = 1;
/// EMA lookback for one-minute bars.
pub const DEFAULT_EMA_PERIOD: usize = 45;
pub const POLITICAL_SLOTS: [&str; 3] = ["candidate_impact_1", "candidate_impact_2", "candidate_context"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("EMA period must be at least 1")]
    BadPeriod,
    #[error("EMA of an empty series")]
    EmptySeries,
    #[error("cannot fit normalization on an empty training split")]
    EmptyTraining,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at stock {stock}, step {step}, feature {feature}")]
    NonFinite { stock: usize, step: usize, feature: usize },
}

/// Exponential moving average seeded with the first price,
/// `ema[t] = a * p[t] + (1 - a) * ema[t-1]`, `a = 2 / (n + 1)`.
pub fn ema(prices: &[f64], period: usize) -> Result<Vec<f64>, FeatureError> {
    if period < 1 {
        return Err(FeatureError::BadPeriod);
    }
    let (&first, rest) = prices.split_first().ok_or(FeatureError::EmptySeries)?;
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(prices.len());
    out.push(first);
    let mut prev = first;
    for &p in rest {
        prev = alpha * p + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

/// High minus low of a single bar at its native frequency.
pub fn daily_variation(bar: &Ohlcv) -> f64 {
    bar.high - bar.low
}

pub type IndicatorVector = [f64; INDICATOR_COUNT];

/// Raw (unnormalized) indicators, `values[stock * steps + step]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorPanel {
    pub n_stocks: usize,
    pub steps: usize,
    pub values: Vec<IndicatorVector>,
}

impl IndicatorPanel {
    pub fn get(&self, stock: usize, step: usize) -> &IndicatorVector {
        &self.values[stock * self.steps + step]
    }

    pub fn slice(&self, range: Range<usize>) -> IndicatorPanel {
        let mut values = Vec::with_capacity(self.n_stocks * range.len());
        for i in 0..self.n_stocks {
            values.extend_from_slice(&self.values[i * self.steps + range.start..i * self.steps + range.end]);
        }
        IndicatorPanel { n_stocks: self.n_stocks, steps: range.len(), values }
    }
}

/// Indicators for every stock and step. EMA runs over the whole panel, so only
/// past closes feed each value.
pub fn compute_indicators(panel: &AlignedPanel, ema_period: usize) -> Result<IndicatorPanel, FeatureError> {
    let steps = panel.steps();
    let mut values = Vec::with_capacity(panel.n_stocks() * steps);
    for bars in &panel.bars {
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        let ema = ema(&closes, ema_period)?;
        for (bar, e) in bars.iter().zip(ema) {
            values.push([bar.open, bar.close, bar.high, bar.low, bar.volume, daily_variation(bar), e]);
        }
    }
    Ok(IndicatorPanel { n_stocks: panel.n_stocks(), steps, values })
}

/// Per-(stock, indicator) mean and population standard deviation of the
/// training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<IndicatorVector>,
    pub std: Vec<IndicatorVector>,
}

impl NormalizationStats {
    pub fn n_stocks(&self) -> usize {
        self.mean.len()
    }

    /// `(stock, indicator)` pairs whose training std is zero.
    pub fn zero_std(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, s) in self.std.iter().enumerate() {
            for (f, v) in s.iter().enumerate() {
                if *v == 0.0 {
                    out.push((i, f));
                }
            }
        }
        out
    }

    /// z-score; zero-std features map to 0.
    pub fn normalize(&self, stock: usize, feature: usize, value: f64) -> f64 {
        let std = self.std[stock][feature];
        if std == 0.0 {
            0.0
        } else {
            (value - self.mean[stock][feature]) / std
        }
    }

    /// Training mean and std of a stock's close.
    pub fn close(&self, stock: usize) -> (f64, f64) {
        (self.mean[stock][CLOSE_INDEX], self.std[stock][CLOSE_INDEX])
    }
}

pub fn fit_normalizer(train: &IndicatorPanel) -> Result<NormalizationStats, FeatureError> {
    if train.steps == 0 {
        return Err(FeatureError::EmptyTraining);
    }
    let count = train.steps as f64;
    let mut mean = vec![[0.0; INDICATOR_COUNT]; train.n_stocks];
    let mut std = vec![[0.0; INDICATOR_COUNT]; train.n_stocks];
    for i in 0..train.n_stocks {
        let rows = &train.values[i * train.steps..(i + 1) * train.steps];
        for f in 0..INDICATOR_COUNT {
            let m = rows.iter().map(|r| r[f]).sum::<f64>() / count;
            let var = rows.iter().map(|r| (r[f] - m) * (r[f] - m)).sum::<f64>() / count;
            mean[i][f] = m;
            std[i][f] = libm::sqrt(var);
        }
    }
    Ok(NormalizationStats { mean, std })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorEncoding {
    /// One centered scalar, `index / (S - 1) * 2 - 1`.
    #[default]
    Scalar,
    OneHot,
}

/// Column bookkeeping of the assembled tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureLayout {
    pub sector_encoding: SectorEncoding,
}

impl FeatureLayout {
    /// `F`: market indicators plus the sector encoding.
    pub fn market_width(&self) -> usize {
        INDICATOR_COUNT
            + match self.sector_encoding {
                SectorEncoding::Scalar => 1,
                SectorEncoding::OneHot => SECTOR_COUNT,
            }
    }

    /// `F + 3`.
    pub fn width(&self) -> usize {
        self.market_width() + POLITICAL_SLOTS.len()
    }

    pub fn political_offset(&self) -> usize {
        self.market_width()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = MARKET_INDICATORS.iter().map(|s| String::from(*s)).collect();
        match self.sector_encoding {
            SectorEncoding::Scalar => names.push("sector".into()),
            SectorEncoding::OneHot => {
                for s in crate::market::Sector::ALL {
                    let mut name = String::from("sector_");
                    name.push_str(&s.name().replace(' ', "_").to_lowercase());
                    names.push(name);
                }
            }
        }
        names.extend(POLITICAL_SLOTS.iter().map(|s| String::from(*s)));
        names
    }

    fn write_sector(&self, sector_index: usize, out: &mut [f64]) {
        match self.sector_encoding {
            SectorEncoding::Scalar => {
                out[0] = sector_index as f64 / (SECTOR_COUNT - 1) as f64 * 2.0 - 1.0;
            }
            SectorEncoding::OneHot => {
                out.fill(0.0);
                out[sector_index] = 1.0;
            }
        }
    }
}

/// Dense `n x t x d` array, row-major with the feature axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(n: usize, t: usize, d: usize) -> Self {
        FeatureTensor { n, t, d, values: vec![0.0; n * t * d] }
    }

    #[inline]
    pub fn index(&self, i: usize, t: usize, f: usize) -> usize {
        (i * self.t + t) * self.d + f
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize, f: usize) -> f64 {
        self.values[self.index(i, t, f)]
    }

    pub fn row(&self, i: usize, t: usize) -> &[f64] {
        let start = self.index(i, t, 0);
        &self.values[start..start + self.d]
    }

    pub fn row_mut(&mut self, i: usize, t: usize) -> &mut [f64] {
        let start = self.index(i, t, 0);
        &mut self.values[start..start + self.d]
    }

    pub fn check_finite(&self) -> Result<(), FeatureError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(FeatureError::NonFinite {
                stock: k / (self.t * self.d),
                step: (k / self.d) % self.t,
                feature: k % self.d,
            }),
        }
    }
}

/// Build one model input. `indicators` and `political.context` are indexed by
/// the same steps as `window`; `None` for `political` zeroes the three slots
/// (the ablation without political signals).
pub fn assemble(
    window: &Window,
    indicators: &IndicatorPanel,
    universe: &StockUniverse,
    political: Option<&PoliticalFeatures>,
    stats: &NormalizationStats,
    layout: &FeatureLayout,
) -> Result<FeatureTensor, FeatureError> {
    let n = indicators.n_stocks;
    if universe.len() != n || stats.n_stocks() != n {
        return Err(FeatureError::Shape(alloc::format!(
            "indicators have {n} stocks, universe {}, stats {}",
            universe.len(),
            stats.n_stocks()
        )));
    }
    if window.start + window.lookback > indicators.steps {
        return Err(FeatureError::Shape(alloc::format!(
            "window ends at step {} but only {} steps are available",
            window.start + window.lookback,
            indicators.steps
        )));
    }
    if let Some(p) = political {
        if p.impact_1.len() != n || p.impact_2.len() != n || p.context.len() < window.start + window.lookback {
            return Err(FeatureError::Shape("political features do not cover the window".into()));
        }
    }
    let f = layout.market_width();
    let mut x = FeatureTensor::zeros(n, window.lookback, layout.width());
    for i in 0..n {
        let sector = universe.sector(i).index();
        for (k, step) in window.steps().enumerate() {
            let raw = indicators.get(i, step);
            let row = x.row_mut(i, k);
            for (j, v) in raw.iter().enumerate() {
                row[j] = stats.normalize(i, j, *v);
            }
            layout.write_sector(sector, &mut row[INDICATOR_COUNT..f]);
            if let Some(p) = political {
                row[f] = p.impact_1[i];
                row[f + 1] = p.impact_2[i];
                row[f + 2] = p.context[step];
            }
        }
    }
    x.check_finite()?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Sector;
    use crate::political::{assign_context_fixed, Candidate, PoliticalFeatures, SectorImpactTable};

    #[test]
    fn ema_constant_series_is_fixed_point() {
        for n in [1, 2, 45, 200] {
            assert_eq!(ema(&[10.0, 10.0, 10.0], n).unwrap(), vec![10.0, 10.0, 10.0]);
        }
    }

    #[test]
    fn ema_period_one_tracks_prices() {
        let p = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(ema(&p, 1).unwrap(), p.to_vec());
    }

    #[test]
    fn ema_two_points_period_45() {
        // a = 1/23: 123/23 + 2200/23 = 2323/23 = 101
        let out = ema(&[100.0, 123.0], 45).unwrap();
        let mut brute = 100.0;
        let a = 2.0 / 46.0;
        brute = a * 123.0 + (1.0 - a) * brute;
        assert!((out[1] - 101.0).abs() < 1e-12);
        assert_eq!(out[1], brute);
    }

    #[test]
    fn ema_errors() {
        assert_eq!(ema(&[1.0], 0).unwrap_err(), FeatureError::BadPeriod);
        assert_eq!(ema(&[], 3).unwrap_err(), FeatureError::EmptySeries);
    }

    #[test]
    fn daily_variation_examples() {
        let bar = |h: f64, l: f64| Ohlcv { open: l, high: h, low: l, close: l, volume: 0.0 };
        assert_eq!(daily_variation(&bar(105.0, 100.0)), 5.0);
        assert_eq!(daily_variation(&bar(100.0, 100.0)), 0.0);
        assert_eq!(daily_variation(&bar(101.25, 100.75)), 0.5);
    }

    fn panel(values: Vec<IndicatorVector>, steps: usize) -> IndicatorPanel {
        IndicatorPanel { n_stocks: values.len() / steps, steps, values }
    }

    #[test]
    fn normalizer_stats() {
        let mut rows = vec![[5.0; 7]; 2];
        rows[0][0] = 0.0;
        rows[1][0] = 2.0;
        let stats = fit_normalizer(&panel(rows.clone(), 2)).unwrap();
        assert_eq!(stats.mean[0][0], 1.0);
        assert_eq!(stats.std[0][0], 1.0);
        assert_eq!(stats.mean[0][1], 5.0);
        assert_eq!(stats.std[0][1], 0.0);
        assert_eq!(stats.zero_std().len(), 6);
        assert_eq!(stats.normalize(0, 1, 123.0), 0.0);
        assert_eq!(fit_normalizer(&panel(rows, 2)).unwrap(), stats);
        assert_eq!(fit_normalizer(&IndicatorPanel { n_stocks: 1, steps: 0, values: vec![] }).unwrap_err(), FeatureError::EmptyTraining);
    }

    fn two_stock_universe() -> StockUniverse {
        StockUniverse::new(vec![("E".into(), Sector::Energy), ("T".into(), Sector::InformationTechnology)]).unwrap()
    }

    #[test]
    fn assemble_shape_and_political_slots() {
        let universe = two_stock_universe();
        let values: Vec<IndicatorVector> =
            (0..6).map(|k| core::array::from_fn(|f| (k * 7 + f) as f64)).collect();
        let ind = panel(values, 3);
        let stats = fit_normalizer(&ind).unwrap();
        let ctx = assign_context_fixed(3, Candidate::One);
        let pol = PoliticalFeatures::new(&universe, &SectorImpactTable::default(), &ctx);
        let layout = FeatureLayout::default();
        let window = Window { start: 0, lookback: 3, target: 3 };
        let x = assemble(&window, &ind, &universe, Some(&pol), &stats, &layout).unwrap();
        assert_eq!((x.n, x.t, x.d), (2, 3, 11));
        let energy = x.row(0, 2);
        assert_eq!(&energy[8..], &[1.0, -1.0, 1.0]);
        let tech = x.row(1, 0);
        assert_eq!(&tech[8..], &[-1.0, 1.0, 1.0]);
        // sector scalar: Energy index 0 -> -1, IT index 8 -> 0.6
        assert_eq!(energy[7], -1.0);
        assert!((tech[7] - 0.6).abs() < 1e-15);

        let ablated = assemble(&window, &ind, &universe, None, &stats, &layout).unwrap();
        assert_eq!(&ablated.row(0, 2)[8..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn assemble_zero_std_feature_maps_to_zero() {
        let universe = two_stock_universe();
        let ind = panel(vec![[7.0; 7]; 4], 2);
        let stats = fit_normalizer(&ind).unwrap();
        let window = Window { start: 0, lookback: 2, target: 2 };
        let x = assemble(&window, &ind, &universe, None, &stats, &FeatureLayout::default()).unwrap();
        assert!(x.values.iter().take(7).all(|v| *v == 0.0));
    }

    #[test]
    fn assemble_rejects_shape_mismatch() {
        let universe = two_stock_universe();
        let ind = panel(vec![[1.0; 7]; 3], 3);
        let stats = fit_normalizer(&ind).unwrap();
        let window = Window { start: 0, lookback: 2, target: 2 };
        assert!(matches!(
            assemble(&window, &ind, &universe, None, &stats, &FeatureLayout::default()),
            Err(FeatureError::Shape(_))
        ));
    }

    #[test]
    fn one_hot_layout_width() {
        let layout = FeatureLayout { sector_encoding: SectorEncoding::OneHot };
        assert_eq!(layout.market_width(), 18);
        assert_eq!(layout.width(), 21);
        assert_eq!(layout.names().len(), 21);
        assert_eq!(FeatureLayout::default().names().len(), 11);
    }
}
