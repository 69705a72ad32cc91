//! Minute-bar panels: universe definition, validated ingestion, gap repair,
//! chronological splits and lookback windows.
//!
//! Everything here is a pure transformation. Text parsing of the input files
//! lives in the companion IO crate; this module receives already-typed rows
//! together with their source line numbers so errors can point back at them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of sector labels in the impact table.
pub const SECTOR_COUNT: usize = 11;

/// Display format used for timestamps in logs and output files.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: unknown stock_id `{stock_id}`")]
    UnknownStock { line: usize, stock_id: String },
    #[error("line {line}: timestamp {timestamp} for `{stock_id}` is not after the previous bar")]
    NonMonotone { line: usize, stock_id: String, timestamp: String },
    #[error("line {line}: invalid bar for `{stock_id}`: {reason}")]
    InvalidBar { line: usize, stock_id: String, reason: String },
    #[error("duplicate stock_id `{0}` in universe")]
    DuplicateStock(String),
    #[error("unknown sector `{0}`")]
    UnknownSector(String),
    #[error("stock `{0}` has no bars in range")]
    EmptyStock(String),
    #[error("{0} split is empty")]
    EmptyRange(&'static str),
    #[error("split ranges overlap or are out of order: {0}")]
    Overlap(String),
    #[error("panel has {steps} steps; lookback {lookback} needs at least {needed}", needed = lookback + 1)]
    TooFewSteps { steps: usize, lookback: usize },
}

/// The eleven sector labels, in impact-table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    Energy,
    Industrials,
    Financials,
    Materials,
    ConsumerDiscretionary,
    RealEstate,
    Utilities,
    CommunicationServices,
    InformationTechnology,
    HealthCare,
    ConsumerStaples,
}

impl Sector {
    pub const ALL: [Sector; SECTOR_COUNT] = [
        Sector::Energy,
        Sector::Industrials,
        Sector::Financials,
        Sector::Materials,
        Sector::ConsumerDiscretionary,
        Sector::RealEstate,
        Sector::Utilities,
        Sector::CommunicationServices,
        Sector::InformationTechnology,
        Sector::HealthCare,
        Sector::ConsumerStaples,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Energy => "Energy",
            Sector::Industrials => "Industrials",
            Sector::Financials => "Financials",
            Sector::Materials => "Materials",
            Sector::ConsumerDiscretionary => "Consumer Discretionary",
            Sector::RealEstate => "Real Estate",
            Sector::Utilities => "Utilities",
            Sector::CommunicationServices => "Communication Services",
            Sector::InformationTechnology => "Information Technology",
            Sector::HealthCare => "Health Care",
            Sector::ConsumerStaples => "Consumer Staples",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Exact-spelling lookup (surrounding whitespace ignored).
    pub fn from_name(name: &str) -> Result<Sector, MarketError> {
        let name = name.trim();
        Sector::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or_else(|| MarketError::UnknownSector(name.into()))
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Open/high/low/close/volume of one bar, without identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ohlcv {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Ohlcv {
    /// A flat bar at `price` with no trades.
    pub fn flat(price: f64) -> Self {
        Ohlcv { open: price, high: price, low: price, close: price, volume: 0.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.high {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!("open {} outside [low {}, high {}]", self.open, self.low, self.high));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!("close {} outside [low {}, high {}]", self.close, self.low, self.high));
        }
        Ok(())
    }
}

/// One stock's record at one minute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub stock_id: String,
    pub timestamp: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl MinuteBar {
    pub fn ohlcv(&self) -> Ohlcv {
        Ohlcv {
            open: self.open,
            high: self.high,
            low: self.low,
            close: self.close,
            volume: self.volume,
        }
    }
}

/// Ordered stock list; the order defines the stock axis of every tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct StockUniverse {
    stocks: Vec<(String, Sector)>,
    index: BTreeMap<String, usize>,
}

impl StockUniverse {
    pub fn new(stocks: Vec<(String, Sector)>) -> Result<Self, MarketError> {
        let mut index = BTreeMap::new();
        for (i, (id, _)) in stocks.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(MarketError::DuplicateStock(id.clone()));
            }
        }
        Ok(StockUniverse { stocks, index })
    }

    pub fn len(&self) -> usize {
        self.stocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stocks.is_empty()
    }

    pub fn position(&self, stock_id: &str) -> Option<usize> {
        self.index.get(stock_id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.stocks[i].0
    }

    pub fn sector(&self, i: usize) -> Sector {
        self.stocks[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Sector)> {
        self.stocks.iter().map(|(id, s)| (id.as_str(), *s))
    }
}

/// Accumulates validated rows into a sparse panel.
#[derive(Debug)]
pub struct PanelBuilder {
    universe: StockUniverse,
    rows: Vec<BTreeMap<NaiveDateTime, Ohlcv>>,
    last: Vec<Option<NaiveDateTime>>,
    row_count: usize,
}

impl PanelBuilder {
    pub fn new(universe: StockUniverse) -> Self {
        let n = universe.len();
        PanelBuilder {
            universe,
            rows: (0..n).map(|_| BTreeMap::new()).collect(),
            last: alloc::vec![None; n],
            row_count: 0,
        }
    }

    pub fn push(&mut self, line: usize, bar: &MinuteBar) -> Result<(), MarketError> {
        let i = self.universe.position(&bar.stock_id).ok_or_else(|| MarketError::UnknownStock {
            line,
            stock_id: bar.stock_id.clone(),
        })?;
        let ohlcv = bar.ohlcv();
        ohlcv.validate().map_err(|reason| MarketError::InvalidBar {
            line,
            stock_id: bar.stock_id.clone(),
            reason,
        })?;
        if let Some(prev) = self.last[i] {
            if bar.timestamp <= prev {
                return Err(MarketError::NonMonotone {
                    line,
                    stock_id: bar.stock_id.clone(),
                    timestamp: format!("{}", bar.timestamp.format(TIMESTAMP_FORMAT)),
                });
            }
        }
        self.last[i] = Some(bar.timestamp);
        self.rows[i].insert(bar.timestamp, ohlcv);
        self.row_count += 1;
        Ok(())
    }

    pub fn build(self) -> BarPanel {
        let mut union: BTreeMap<NaiveDateTime, ()> = BTreeMap::new();
        for rows in &self.rows {
            for ts in rows.keys() {
                union.insert(*ts, ());
            }
        }
        let timestamps: Vec<NaiveDateTime> = union.into_keys().collect();
        let cells = self
            .rows
            .iter()
            .map(|rows| timestamps.iter().map(|ts| rows.get(ts).copied()).collect())
            .collect();
        BarPanel { universe: self.universe, timestamps, cells, row_count: self.row_count }
    }
}

/// Ingested panel aligned on the union of timestamps; cells may be missing.
#[derive(Clone, Debug, PartialEq)]
pub struct BarPanel {
    pub universe: StockUniverse,
    pub timestamps: Vec<NaiveDateTime>,
    /// `cells[stock][step]`
    pub cells: Vec<Vec<Option<Ohlcv>>>,
    pub row_count: usize,
}

impl BarPanel {
    pub fn from_bars<'a>(
        universe: StockUniverse,
        bars: impl IntoIterator<Item = (usize, &'a MinuteBar)>,
    ) -> Result<BarPanel, MarketError> {
        let mut builder = PanelBuilder::new(universe);
        for (line, bar) in bars {
            builder.push(line, bar)?;
        }
        Ok(builder.build())
    }

    pub fn steps(&self) -> usize {
        self.timestamps.len()
    }
}

/// A `REPAIR <stock_id> <timestamp>` log line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairEntry {
    pub stock_id: String,
    pub timestamp: NaiveDateTime,
}

impl fmt::Display for RepairEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "REPAIR {} {}", self.stock_id, self.timestamp.format(TIMESTAMP_FORMAT))
    }
}

/// Dense panel: every stock has a bar at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedPanel {
    pub universe: StockUniverse,
    pub timestamps: Vec<NaiveDateTime>,
    /// `bars[stock][step]`
    pub bars: Vec<Vec<Ohlcv>>,
}

impl AlignedPanel {
    pub fn steps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_stocks(&self) -> usize {
        self.universe.len()
    }

    pub fn slice(&self, range: Range<usize>) -> AlignedPanel {
        AlignedPanel {
            universe: self.universe.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            bars: self.bars.iter().map(|b| b[range.clone()].to_vec()).collect(),
        }
    }

    pub fn closes(&self, stock: usize) -> impl Iterator<Item = f64> + '_ {
        self.bars[stock].iter().map(|b| b.close)
    }

    /// Realized one-step return of every stock from `step` to `step + 1`.
    pub fn returns_at(&self, step: usize) -> Vec<f64> {
        self.bars
            .iter()
            .map(|b| (b[step + 1].close - b[step].close) / b[step].close)
            .collect()
    }
}

/// Fill missing cells: forward from the last close, leading gaps back from the
/// first bar's open. Inserted bars carry zero volume.
pub fn repair_gaps(panel: &BarPanel) -> Result<(AlignedPanel, Vec<RepairEntry>), MarketError> {
    let mut log = Vec::new();
    let mut bars = Vec::with_capacity(panel.cells.len());
    for (i, cells) in panel.cells.iter().enumerate() {
        let stock_id = panel.universe.id(i);
        let first = cells
            .iter()
            .flatten()
            .next()
            .ok_or_else(|| MarketError::EmptyStock(stock_id.into()))?;
        let mut fill = first.open;
        let mut out = Vec::with_capacity(cells.len());
        for (t, cell) in cells.iter().enumerate() {
            match cell {
                Some(bar) => {
                    out.push(*bar);
                    fill = bar.close;
                }
                None => {
                    out.push(Ohlcv::flat(fill));
                    log.push(RepairEntry { stock_id: stock_id.into(), timestamp: panel.timestamps[t] });
                }
            }
        }
        bars.push(out);
    }
    Ok((
        AlignedPanel { universe: panel.universe.clone(), timestamps: panel.timestamps.clone(), bars },
        log,
    ))
}

/// Inclusive timestamp range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TimeRange {
    pub fn contains(&self, ts: &NaiveDateTime) -> bool {
        *ts >= self.start && *ts <= self.end
    }
}

/// Chronological train/valid/test boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: TimeRange,
    pub valid: TimeRange,
    pub test: TimeRange,
}

impl DatasetSplit {
    /// Boundaries from consecutive step counts over an index of timestamps.
    pub fn from_counts(
        timestamps: &[NaiveDateTime],
        train: usize,
        valid: usize,
        test: usize,
    ) -> Result<DatasetSplit, MarketError> {
        let names = ["train", "valid", "test"];
        let mut start = 0;
        let mut ranges = [None; 3];
        for (k, count) in [train, valid, test].into_iter().enumerate() {
            if count == 0 {
                return Err(MarketError::EmptyRange(names[k]));
            }
            let end = start + count;
            if end > timestamps.len() {
                return Err(MarketError::Overlap(format!(
                    "{} steps requested, panel has {}",
                    train + valid + test,
                    timestamps.len()
                )));
            }
            ranges[k] = Some(TimeRange { start: timestamps[start], end: timestamps[end - 1] });
            start = end;
        }
        Ok(DatasetSplit {
            train: ranges[0].unwrap(),
            valid: ranges[1].unwrap(),
            test: ranges[2].unwrap(),
        })
    }
}

/// Step-index ranges of each split within the parent panel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn step_counts(&self) -> [usize; 3] {
        [self.train.len(), self.valid.len(), self.test.len()]
    }

    /// One-step return observations per split (each split loses its last step).
    pub fn return_points(&self) -> [usize; 3] {
        self.step_counts().map(|c| c.saturating_sub(1))
    }
}

fn resolve(timestamps: &[NaiveDateTime], range: &TimeRange, name: &'static str) -> Result<Range<usize>, MarketError> {
    if range.start > range.end {
        return Err(MarketError::Overlap(format!("{name} range starts after it ends")));
    }
    let start = timestamps.partition_point(|ts| *ts < range.start);
    let end = timestamps.partition_point(|ts| *ts <= range.end);
    if start >= end {
        return Err(MarketError::EmptyRange(name));
    }
    Ok(start..end)
}

/// Resolve boundaries against a panel's timestamps.
pub fn split_ranges(timestamps: &[NaiveDateTime], split: &DatasetSplit) -> Result<SplitRanges, MarketError> {
    if split.train.end >= split.valid.start {
        return Err(MarketError::Overlap("train must end before valid starts".into()));
    }
    if split.valid.end >= split.test.start {
        return Err(MarketError::Overlap("valid must end before test starts".into()));
    }
    Ok(SplitRanges {
        train: resolve(timestamps, &split.train, "train")?,
        valid: resolve(timestamps, &split.valid, "valid")?,
        test: resolve(timestamps, &split.test, "test")?,
    })
}

#[derive(Clone, Debug)]
pub struct SplitPanels {
    pub train: AlignedPanel,
    pub valid: AlignedPanel,
    pub test: AlignedPanel,
    pub ranges: SplitRanges,
}

pub fn split(panel: &AlignedPanel, boundaries: &DatasetSplit) -> Result<SplitPanels, MarketError> {
    let ranges = split_ranges(&panel.timestamps, boundaries)?;
    Ok(SplitPanels {
        train: panel.slice(ranges.train.clone()),
        valid: panel.slice(ranges.valid.clone()),
        test: panel.slice(ranges.test.clone()),
        ranges,
    })
}

/// `lookback` consecutive steps `[start, start + lookback)` predicting `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub lookback: usize,
    pub target: usize,
}

impl Window {
    pub fn last(&self) -> usize {
        self.start + self.lookback - 1
    }

    pub fn steps(&self) -> Range<usize> {
        self.start..self.start + self.lookback
    }
}

/// Every window over `steps` steps; there are `steps - lookback` of them.
pub fn windows_for(steps: usize, lookback: usize) -> Result<Vec<Window>, MarketError> {
    if lookback == 0 || steps < lookback + 1 {
        return Err(MarketError::TooFewSteps { steps, lookback });
    }
    Ok((0..steps - lookback)
        .map(|start| Window { start, lookback, target: start + lookback })
        .collect())
}

pub fn windows(panel: &AlignedPanel, lookback: usize) -> Result<Vec<Window>, MarketError> {
    windows_for(panel.steps(), lookback)
}

/// Calendar date of a step; used by the election-day rule.
pub fn step_date(ts: &NaiveDateTime) -> NaiveDate {
    ts.date()
}
