use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use super::series::FrequencySeries;
use super::Document;
use crate::error::{Error, Result};
use crate::month::{MonthWindow, YearMonth};

/// Opens a file, transparently decompressing gzip input (detected by magic bytes).
pub(crate) fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    BadTimestamp,
    OutOfWindow,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub id: String,
    pub reason: RejectionReason,
}

/// Result of reading a corpus file.
///
/// Records that fail to parse at all land in `malformed`; records that parse
/// but cannot be used (bad date, outside the window, repeated id) land in
/// `rejected`.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub documents: Vec<Document>,
    pub rejected: Vec<Rejection>,
    pub malformed: Vec<(usize, String)>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    timestamp: String,
    #[serde(default)]
    category: Option<String>,
    text: String,
}

fn parse_timestamp(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|dt| dt.naive_utc().date())
}

/// Reads newline-delimited JSON records `{id, timestamp, category?, text}`.
pub fn read_documents(path: &Path, window: MonthWindow) -> Result<IngestOutcome> {
    let reader = open_maybe_gzip(path)?;
    let mut out = IngestOutcome::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                out.malformed.push((lineno, e.to_string()));
                continue;
            }
        };
        let reject = |reason| Rejection {
            line: lineno,
            id: rec.id.clone(),
            reason,
        };
        let Some(date) = parse_timestamp(&rec.timestamp) else {
            out.rejected.push(reject(RejectionReason::BadTimestamp));
            continue;
        };
        if !window.contains(YearMonth::of_date(date)) {
            out.rejected.push(reject(RejectionReason::OutOfWindow));
            continue;
        }
        if !seen.insert(rec.id.clone()) {
            out.rejected.push(reject(RejectionReason::DuplicateId));
            continue;
        }
        out.documents.push(Document {
            id: rec.id,
            timestamp: date,
            category: rec.category,
            text: rec.text,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FrequencyRow {
    word: String,
    year: i32,
    month: u32,
    doc_count: u64,
    contain_count: u64,
    log_rel_freq: f64,
}

/// Writes `word,year,month,doc_count,contain_count,log_rel_freq`, one row per
/// word and month, words in map order and months ascending.
pub fn write_frequency_csv<W: Write>(
    out: W,
    series: &BTreeMap<String, FrequencySeries>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for s in series.values() {
        for (t, ym) in s.window.months().enumerate() {
            w.serialize(FrequencyRow {
                word: s.word.clone(),
                year: ym.year,
                month: ym.month,
                doc_count: s.doc_count[t],
                contain_count: s.contain_count[t],
                log_rel_freq: s.log_rel_freq[t],
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<frequency csv>", e))?;
    Ok(())
}

/// Reads a frequency CSV back. Every word must cover the same contiguous
/// month grid; `log_rel_freq` is recomputed from the counts.
pub fn read_frequency_csv(path: &Path) -> Result<BTreeMap<String, FrequencySeries>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: BTreeMap<String, Vec<(YearMonth, u64, u64)>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<FrequencyRow>().enumerate() {
        let row = rec?;
        let ym = YearMonth::new(row.year, row.month).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.entry(row.word)
            .or_default()
            .push((ym, row.doc_count, row.contain_count));
    }
    let mut out = BTreeMap::new();
    let mut grid: Option<MonthWindow> = None;
    for (word, mut r) in rows {
        r.sort_by_key(|x| x.0);
        let window = MonthWindow::new(r[0].0, r[r.len() - 1].0)
            .map_err(|e| e.context(format!("word '{word}'")))?;
        if window.len() != r.len() || r.windows(2).any(|p| p[0].0.offset(1) != p[1].0) {
            return Err(Error::InvalidInput(format!(
                "word '{word}' has a non-contiguous month grid"
            )));
        }
        match grid {
            None => grid = Some(window),
            Some(g) if g != window => {
                return Err(Error::DimensionMismatch(format!(
                    "word '{word}' covers {}..{}, expected {}..{}",
                    window.start, window.end, g.start, g.end
                )))
            }
            _ => {}
        }
        let series = FrequencySeries::from_counts(
            word.clone(),
            window,
            r.iter().map(|x| x.1).collect(),
            r.iter().map(|x| x.2).collect(),
        )?;
        out.insert(word, series);
    }
    Ok(out)
}
