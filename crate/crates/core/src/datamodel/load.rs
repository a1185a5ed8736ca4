use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::{
    CounterfactualTrial, CutoffManifest, DecisionLog, DecisionRecord, PriceBar, PriceSeries,
};
use crate::calibration::CalibrationTrial;
use crate::error::{Error, Result};

const PRICE_HEADER: [&str; 7] = ["date", "open", "high", "low", "close", "volume", "spread"];

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a price CSV. The ticker is taken from the caller.
pub fn parse_prices(ticker: &str, text: &str, origin: &Path) -> Result<PriceSeries> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(PRICE_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`", PRICE_HEADER.join(",")),
        ));
    }
    let mut bars = Vec::new();
    for row in reader.deserialize::<PriceBar>() {
        let bar = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        bars.push(bar);
    }
    PriceSeries::new(ticker, bars)
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let ticker = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| {
        Error::validation(
            "price file",
            format!("{}: no ticker in filename", path.display()),
        )
    })?;
    parse_prices(ticker, &read(path)?, path)
}

/// Loads every `<TICKER>.csv` in a directory.
pub fn load_prices_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, PriceSeries>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::validation(
            "price directory",
            format!("{}: no .csv files", dir.display()),
        ));
    }
    let mut out = BTreeMap::new();
    for p in paths {
        let series = load_prices(&p)?;
        out.insert(series.ticker().to_string(), series);
    }
    Ok(out)
}

pub fn write_prices<W: Write>(series: &PriceSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::validation("price csv", e.to_string());
    for bar in series.bars() {
        w.serialize(bar).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<price csv>"),
        source,
    })
}

fn parse_lines<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn parse_decisions(text: &str, origin: &Path) -> Result<DecisionLog> {
    let rows: Vec<(usize, DecisionRecord)> = parse_lines(text, origin)?;
    for (line, r) in &rows {
        r.validate().map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: *line,
            message: e.to_string(),
        })?;
    }
    DecisionLog::new(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn load_decisions(path: impl AsRef<Path>) -> Result<DecisionLog> {
    let path = path.as_ref();
    parse_decisions(&read(path)?, path)
}

pub fn write_decisions<W: Write>(log: &DecisionLog, mut out: W) -> Result<()> {
    for r in log.records() {
        let line =
            serde_json::to_string(r).map_err(|e| Error::validation("decision", e.to_string()))?;
        writeln!(out, "{line}").map_err(|source| Error::Io {
            path: PathBuf::from("<decision log>"),
            source,
        })?;
    }
    Ok(())
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<CutoffManifest> {
    let manifest: CutoffManifest = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| {
            text[..s.start.min(text.len())].matches('\n').count() + 1
        });
        Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<CutoffManifest> {
    let path = path.as_ref();
    parse_manifest(&read(path)?, path)
}

pub fn write_manifest(manifest: &CutoffManifest) -> Result<String> {
    toml::to_string(manifest).map_err(|e| Error::validation("manifest", e.to_string()))
}

pub fn load_counterfactual_trials(path: impl AsRef<Path>) -> Result<Vec<CounterfactualTrial>> {
    let path = path.as_ref();
    let rows: Vec<(usize, CounterfactualTrial)> = parse_lines(&read(path)?, path)?;
    rows.into_iter()
        .map(|(line, t)| {
            t.validate().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            Ok(t)
        })
        .collect()
}

pub fn load_calibration_trials(path: impl AsRef<Path>) -> Result<Vec<CalibrationTrial>> {
    let path = path.as_ref();
    let rows: Vec<(usize, CalibrationTrial)> = parse_lines(&read(path)?, path)?;
    rows.into_iter()
        .map(|(line, t)| {
            t.validate().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            Ok(t)
        })
        .collect()
}
