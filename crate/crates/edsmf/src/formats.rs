//! CSV/JSON readers and writers for every artifact the pipeline exchanges.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use edsmf_core::evaluation::PredictionRecord;
use edsmf_core::features::FeatureTensor;
use edsmf_core::market::{
    AlignedPanel, BarPanel, MarketError, MinuteBar, PanelBuilder, Sector, StockUniverse, TIMESTAMP_FORMAT,
};
use edsmf_core::political::{ContextAssignment, SectorImpactTable};
use edsmf_core::training::EpochRecord;
use serde::Serialize;

pub const BAR_COLUMNS: [&str; 7] = ["stock_id", "timestamp", "open", "high", "low", "close", "volume"];

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        bail!("{}: expected columns {:?}, found {:?}", path.display(), expected.join(","), got.join(","));
    }
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M"))
        .ok()
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Universe file: `stock_id,sector`.
pub fn read_universe(path: &Path) -> Result<StockUniverse> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["stock_id", "sector"])?;
    let mut stocks = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{}: unreadable row", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            bail!("{}: line {line}: expected 2 fields, found {}", path.display(), rec.len());
        }
        let sector =
            Sector::from_name(&rec[1]).with_context(|| format!("{}: line {line}", path.display()))?;
        stocks.push((rec[0].to_string(), sector));
    }
    Ok(StockUniverse::new(stocks)?)
}

pub fn write_universe(path: &Path, universe: &StockUniverse) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stock_id", "sector"])?;
    for (id, sector) in universe.iter() {
        w.write_record([id, sector.name()])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(rec: &csv::StringRecord, k: usize, line: u64) -> Result<f64, MarketError> {
    rec[k].parse::<f64>().map_err(|_| MarketError::MalformedRow {
        line: line as usize,
        reason: format!("{} `{}` is not a number", BAR_COLUMNS[k], &rec[k]),
    })
}

/// Minute-bar file against a universe; errors name the offending line.
pub fn read_bars(path: &Path, universe: &StockUniverse) -> Result<BarPanel> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &BAR_COLUMNS)?;
    let mut builder = PanelBuilder::new(universe.clone());
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(MarketError::MalformedRow { line: line as usize, reason: e.to_string() })
                    .with_context(|| path.display().to_string());
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let timestamp = parse_timestamp(&rec[1])
            .ok_or_else(|| MarketError::MalformedRow { line: line as usize, reason: format!("bad timestamp `{}`", &rec[1]) })
            .with_context(|| path.display().to_string())?;
        let bar = MinuteBar {
            stock_id: rec[0].to_string(),
            timestamp,
            open: parse_field(&rec, 2, line)?,
            high: parse_field(&rec, 3, line)?,
            low: parse_field(&rec, 4, line)?,
            close: parse_field(&rec, 5, line)?,
            volume: parse_field(&rec, 6, line)?,
        };
        builder.push(line as usize, &bar).with_context(|| path.display().to_string())?;
    }
    Ok(builder.build())
}

pub fn write_bars<'a>(path: &Path, bars: impl IntoIterator<Item = &'a MinuteBar>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BAR_COLUMNS)?;
    for b in bars {
        w.write_record([
            b.stock_id.clone(),
            format_timestamp(&b.timestamp),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned panel in the bar-file format, timestamp-major.
pub fn write_panel(path: &Path, panel: &AlignedPanel) -> Result<()> {
    let mut bars = Vec::with_capacity(panel.steps() * panel.n_stocks());
    for (t, ts) in panel.timestamps.iter().enumerate() {
        for (i, (id, _)) in panel.universe.iter().enumerate() {
            let b = panel.bars[i][t];
            bars.push(MinuteBar {
                stock_id: id.into(),
                timestamp: *ts,
                open: b.open,
                high: b.high,
                low: b.low,
                close: b.close,
                volume: b.volume,
            });
        }
    }
    write_bars(path, &bars)
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .read_to_string(&mut s)?;
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_sector_table(path: &Path) -> Result<SectorImpactTable> {
    SectorImpactTable::parse_csv(&read_text(path)?).with_context(|| path.display().to_string())
}

pub fn write_sector_table(path: &Path, table: &SectorImpactTable) -> Result<()> {
    write_text(path, &table.to_csv())
}

/// `timestamp,context` with labels 1 / 2.
pub fn write_context(path: &Path, timestamps: &[NaiveDateTime], ctx: &ContextAssignment) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "context"])?;
    for (ts, c) in timestamps.iter().zip(&ctx.contexts) {
        w.write_record([format_timestamp(ts), c.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_context(path: &Path) -> Result<Vec<(NaiveDateTime, u8)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["timestamp", "context"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts = parse_timestamp(&rec[0]).with_context(|| format!("{}: line {line}: bad timestamp", path.display()))?;
        let c: u8 = rec[1].parse().with_context(|| format!("{}: line {line}: bad context", path.display()))?;
        out.push((ts, c));
    }
    Ok(out)
}

/// One row per (stock, step): `stock_id,timestamp,<feature names...>`.
pub fn write_feature_dump(
    path: &Path,
    names: &[String],
    universe: &StockUniverse,
    timestamps: &[NaiveDateTime],
    tensor: &FeatureTensor,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["stock_id".to_string(), "timestamp".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..tensor.n {
        for t in 0..tensor.t {
            let mut row = vec![universe.id(i).to_string(), format_timestamp(&timestamps[t])];
            row.extend(tensor.row(i, t).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format: `timestamp,stock_id,predicted,realized`.
pub fn write_predictions(path: &Path, universe: &StockUniverse, stream: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "stock_id", "predicted", "realized"])?;
    for rec in stream {
        let ts = format_timestamp(&rec.timestamp);
        for (i, (id, _)) in universe.iter().enumerate() {
            w.write_record([ts.as_str(), id, &rec.predicted[i].to_string(), &rec.realized[i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path, universe: &StockUniverse) -> Result<Vec<PredictionRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["timestamp", "stock_id", "predicted", "realized"])?;
    let n = universe.len();
    let mut out: Vec<PredictionRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let ctx = || format!("{}: line {line}", path.display());
        let ts = parse_timestamp(&rec[0]).with_context(ctx)?;
        let i = universe.position(&rec[1]).with_context(|| format!("{}: unknown stock `{}`", ctx(), &rec[1]))?;
        let (p, r): (f64, f64) = (rec[2].parse().with_context(ctx)?, rec[3].parse().with_context(ctx)?);
        if out.last().is_none_or(|last| last.timestamp != ts) {
            out.push(PredictionRecord { timestamp: ts, predicted: vec![f64::NAN; n], realized: vec![f64::NAN; n] });
        }
        let last = out.last_mut().expect("pushed above");
        last.predicted[i] = p;
        last.realized[i] = r;
    }
    if let Some(rec) = out.iter().find(|r| r.predicted.iter().any(|v| v.is_nan())) {
        bail!("{}: step {} does not cover every stock", path.display(), format_timestamp(&rec.timestamp));
    }
    Ok(out)
}

pub fn write_epoch_log(path: &Path, epochs: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "valid_loss", "seconds"])?;
    for e in epochs {
        w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.valid_loss.to_string(), format!("{:.6}", e.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_epoch_log(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["epoch", "train_loss", "valid_loss", "seconds"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(EpochRecord {
            epoch: rec[0].parse()?,
            train_loss: rec[1].parse()?,
            valid_loss: rec[2].parse()?,
            seconds: rec[3].parse()?,
        });
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
