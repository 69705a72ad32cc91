//! Candidate impact per stock and candidate-context assignment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Sector, StockUniverse, SECTOR_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoliticalError {
    #[error("stock `{0}` is not in the universe")]
    UnknownStock(String),
    #[error("candidate context must be 1 or 2, got {0}")]
    BadContext(i64),
    #[error("sector table: missing header `sector,candidate_1,candidate_2`")]
    MissingHeader,
    #[error("sector table line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("sector table: unknown sector `{0}`")]
    UnknownSector(String),
    #[error("sector table: sector `{0}` listed twice")]
    DuplicateSector(String),
    #[error("sector table: missing sector(s) {0}")]
    MissingSectors(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Candidate {
    One,
    Two,
}

impl Candidate {
    pub fn label(self) -> u8 {
        match self {
            Candidate::One => 1,
            Candidate::Two => 2,
        }
    }

    pub fn from_label(label: i64) -> Result<Candidate, PoliticalError> {
        match label {
            1 => Ok(Candidate::One),
            2 => Ok(Candidate::Two),
            other => Err(PoliticalError::BadContext(other)),
        }
    }

    /// Model-input encoding: 1 -> +1, 2 -> -1.
    pub fn encoded(self) -> f64 {
        match self {
            Candidate::One => 1.0,
            Candidate::Two => -1.0,
        }
    }
}

/// Encode a raw context label for the model input.
pub fn encode_context(label: i64) -> Result<f64, PoliticalError> {
    Candidate::from_label(label).map(Candidate::encoded)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Positive => "Positive",
            Polarity::Negative => "Negative",
        }
    }

    fn parse(s: &str) -> Option<Polarity> {
        match s.trim() {
            "Positive" => Some(Polarity::Positive),
            "Negative" => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// Per-sector polarity for each candidate, in `Sector::ALL` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorImpactTable {
    rows: [[Polarity; 2]; SECTOR_COUNT],
}

const CSV_HEADER: &str = "sector,candidate_1,candidate_2";

impl Default for SectorImpactTable {
    /// The eight cyclical/value sectors favour candidate 1; technology,
    /// health care and staples favour candidate 2.
    fn default() -> Self {
        use Polarity::*;
        let mut rows = [[Positive, Negative]; SECTOR_COUNT];
        for s in [Sector::InformationTechnology, Sector::HealthCare, Sector::ConsumerStaples] {
            rows[s.index()] = [Negative, Positive];
        }
        SectorImpactTable { rows }
    }
}

impl SectorImpactTable {
    pub fn from_rows(rows: [[Polarity; 2]; SECTOR_COUNT]) -> Self {
        SectorImpactTable { rows }
    }

    pub fn polarity(&self, candidate: Candidate, sector: Sector) -> Polarity {
        self.rows[sector.index()][candidate as usize]
    }

    pub fn impact(&self, candidate: Candidate, sector: Sector) -> i8 {
        self.polarity(candidate, sector).sign()
    }

    /// CSV text: header plus one row per sector, `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in Sector::ALL {
            let [a, b] = self.rows[s.index()];
            out.push_str(&format!("{},{},{}\n", s.name(), a.name(), b.name()));
        }
        out
    }

    /// Parse the CSV schema; every sector must appear exactly once.
    pub fn parse_csv(text: &str) -> Result<Self, PoliticalError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim().replace(' ', "") == CSV_HEADER => {}
            _ => return Err(PoliticalError::MissingHeader),
        }
        let mut rows: [Option<[Polarity; 2]>; SECTOR_COUNT] = [None; SECTOR_COUNT];
        for (k, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(PoliticalError::BadRow { line: k + 1, reason: format!("expected 3 fields, got {}", fields.len()) });
            }
            let sector = Sector::from_name(fields[0]).map_err(|_| PoliticalError::UnknownSector(fields[0].into()))?;
            let mut pair = [Polarity::Positive; 2];
            for c in 0..2 {
                pair[c] = Polarity::parse(fields[c + 1]).ok_or_else(|| PoliticalError::BadRow {
                    line: k + 1,
                    reason: format!("`{}` is not Positive or Negative", fields[c + 1]),
                })?;
            }
            if rows[sector.index()].replace(pair).is_some() {
                return Err(PoliticalError::DuplicateSector(sector.name().into()));
            }
        }
        let missing: Vec<&str> = Sector::ALL.iter().filter(|s| rows[s.index()].is_none()).map(|s| s.name()).collect();
        if !missing.is_empty() {
            return Err(PoliticalError::MissingSectors(missing.join(", ")));
        }
        Ok(SectorImpactTable { rows: rows.map(Option::unwrap) })
    }
}

/// Impact of `candidate` on one stock: the polarity of its sector.
pub fn candidate_impact(
    stock_id: &str,
    candidate: Candidate,
    table: &SectorImpactTable,
    universe: &StockUniverse,
) -> Result<i8, PoliticalError> {
    let i = universe.position(stock_id).ok_or_else(|| PoliticalError::UnknownStock(stock_id.into()))?;
    Ok(table.impact(candidate, universe.sector(i)))
}

/// Context label for each step of a stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAssignment {
    pub contexts: Vec<Candidate>,
    pub seed: Option<u64>,
    pub election_day: Option<NaiveDate>,
}

impl ContextAssignment {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn encoded(&self) -> Vec<f64> {
        self.contexts.iter().map(|c| c.encoded()).collect()
    }

    pub fn slice(&self, range: core::ops::Range<usize>) -> ContextAssignment {
        ContextAssignment { contexts: self.contexts[range].to_vec(), seed: self.seed, election_day: self.election_day }
    }
}

/// Fair coin per step before election day, candidate 1 from election day on.
pub fn assign_context_random(timestamps: &[NaiveDateTime], election_day: NaiveDate, seed: u64) -> ContextAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contexts = timestamps
        .iter()
        .map(|ts| {
            if ts.date() < election_day {
                if rng.random_bool(0.5) {
                    Candidate::One
                } else {
                    Candidate::Two
                }
            } else {
                Candidate::One
            }
        })
        .collect();
    ContextAssignment { contexts, seed: Some(seed), election_day: Some(election_day) }
}

pub fn assign_context_fixed(steps: usize, candidate: Candidate) -> ContextAssignment {
    ContextAssignment { contexts: alloc::vec![candidate; steps], seed: None, election_day: None }
}

/// The three political input slots, already in model units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoliticalFeatures {
    /// Per stock.
    pub impact_1: Vec<f64>,
    pub impact_2: Vec<f64>,
    /// Per step, encoded as +1 / -1.
    pub context: Vec<f64>,
}

impl PoliticalFeatures {
    pub fn new(universe: &StockUniverse, table: &SectorImpactTable, contexts: &ContextAssignment) -> Self {
        let impact = |c| universe.iter().map(|(_, s)| table.impact(c, s) as f64).collect();
        PoliticalFeatures { impact_1: impact(Candidate::One), impact_2: impact(Candidate::Two), context: contexts.encoded() }
    }

    pub fn with_context(&self, contexts: &ContextAssignment) -> Self {
        PoliticalFeatures { impact_1: self.impact_1.clone(), impact_2: self.impact_2.clone(), context: contexts.encoded() }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}
