//! Glue between an aligned panel and the model: indicators, training-split
//! normalization, per-split windows, and the context regime of each model.

use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;
use thiserror::Error;

use crate::evaluation::PredictionRecord;
use crate::features::{
    assemble, compute_indicators, fit_normalizer, FeatureError, FeatureLayout, IndicatorPanel, NormalizationStats,
};
use crate::market::{split_ranges, windows_for, AlignedPanel, DatasetSplit, MarketError, SplitRanges, Window};
use crate::mixer::{MixerConfig, MixerError, MixerModel, ReturnScale};
use crate::political::{assign_context_fixed, assign_context_random, Candidate, PoliticalFeatures, SectorImpactTable};
use crate::training::{Sample, SampleSource, TrainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] MixerError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Everything derived from the bars that does not depend on the context
/// regime.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub panel: AlignedPanel,
    pub ranges: SplitRanges,
    pub indicators: IndicatorPanel,
    pub stats: NormalizationStats,
    pub layout: FeatureLayout,
    pub lookback: usize,
    pub table: SectorImpactTable,
}

impl Prepared {
    pub fn new(
        panel: AlignedPanel,
        split: &DatasetSplit,
        lookback: usize,
        ema_period: usize,
        layout: FeatureLayout,
        table: SectorImpactTable,
    ) -> Result<Self, DatasetError> {
        let ranges = split_ranges(&panel.timestamps, split)?;
        for r in [&ranges.train, &ranges.valid, &ranges.test] {
            windows_for(r.len(), lookback)?;
        }
        let indicators = compute_indicators(&panel, ema_period)?;
        let stats = fit_normalizer(&indicators.slice(ranges.train.clone()))?;
        Ok(Prepared { panel, ranges, indicators, stats, layout, lookback, table })
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.ranges.train.clone(),
            Split::Valid => self.ranges.valid.clone(),
            Split::Test => self.ranges.test.clone(),
        }
    }

    /// Windows lying wholly inside `split`, in panel step coordinates.
    pub fn windows(&self, split: Split) -> Vec<Window> {
        let range = self.range(split);
        windows_for(range.len(), self.lookback)
            .expect("checked in Prepared::new")
            .into_iter()
            .map(|w| Window { start: w.start + range.start, lookback: w.lookback, target: w.target + range.start })
            .collect()
    }

    pub fn model_config(&self) -> MixerConfig {
        MixerConfig::new(self.panel.n_stocks(), self.lookback, self.layout.width())
    }

    pub fn return_scale(&self, window: &Window) -> ReturnScale {
        let n = self.panel.n_stocks();
        let last = window.last();
        ReturnScale {
            last_close: (0..n).map(|i| self.panel.bars[i][last].close).collect(),
            close_mean: (0..n).map(|i| self.stats.close(i).0).collect(),
            close_std: (0..n).map(|i| self.stats.close(i).1).collect(),
        }
    }

    /// Political features covering every panel step under `contexts`.
    pub fn political(&self, contexts: &ContextRegime, split: Split) -> Option<PoliticalFeatures> {
        let steps = self.panel.steps();
        let assignment = match (contexts, split) {
            (ContextRegime::Ablated, _) => return None,
            // test-time rule: every model conditions on the winner
            (ContextRegime::Fixed(_), Split::Test) => assign_context_fixed(steps, Candidate::One),
            (ContextRegime::Fixed(c), _) => assign_context_fixed(steps, *c),
            (ContextRegime::Random { election_day, seed }, _) => {
                assign_context_random(&self.panel.timestamps, *election_day, *seed)
            }
        };
        Some(PoliticalFeatures::new(&self.panel.universe, &self.table, &assignment))
    }

    pub fn samples(&self, split: Split, contexts: &ContextRegime) -> SplitSamples<'_> {
        SplitSamples { prepared: self, windows: self.windows(split), political: self.political(contexts, split) }
    }
}

/// How the candidate-context slot is filled for one model.
#[derive(Clone, Debug, PartialEq)]
pub enum ContextRegime {
    /// Political slots zeroed.
    Ablated,
    /// One candidate for training and validation; the winner at test time.
    Fixed(Candidate),
    /// Coin flip per step before election day, the winner afterwards.
    Random { election_day: NaiveDate, seed: u64 },
}

/// Lazily assembled samples of one split under one context regime.
pub struct SplitSamples<'a> {
    prepared: &'a Prepared,
    windows: Vec<Window>,
    political: Option<PoliticalFeatures>,
}

impl SplitSamples<'_> {
    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn political(&self) -> Option<&PoliticalFeatures> {
        self.political.as_ref()
    }

    /// Test-style prediction stream of `model` over this split.
    pub fn predict(&self, model: &MixerModel) -> Result<Vec<PredictionRecord>, DatasetError> {
        let mut out = Vec::with_capacity(self.windows.len());
        for (k, w) in self.windows.iter().enumerate() {
            let s = self.sample(k)?;
            let scores = model.forward(&s.x)?;
            out.push(PredictionRecord {
                timestamp: self.prepared.panel.timestamps[w.target],
                predicted: s.scale.returns(&scores)?,
                realized: s.target,
            });
        }
        Ok(out)
    }
}

impl SampleSource for SplitSamples<'_> {
    type Error = DatasetError;

    fn len(&self) -> usize {
        self.windows.len()
    }

    fn sample(&self, index: usize) -> Result<Sample, DatasetError> {
        let p = self.prepared;
        let w = &self.windows[index];
        let x = assemble(w, &p.indicators, &p.panel.universe, self.political.as_ref(), &p.stats, &p.layout)?;
        Ok(Sample { x, scale: p.return_scale(w), target: p.panel.returns_at(w.last()) })
    }
}
