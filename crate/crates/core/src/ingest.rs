//! Weekly chart parsing and selection of each country's persistent top tracks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Country code reserved for the worldwide chart.
pub const GLOBAL: &str = "GLOBAL";

const CHART_HEADER: [&str; 6] = ["country", "week", "track_id", "title", "artist", "views"];
const SELECTION_HEADER: [&str; 4] = ["country", "track_id", "total_views", "max_run"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: duplicate row for country {country}, week {week}, track {track_id}")]
    Duplicate {
        line: u64,
        country: String,
        week: u32,
        track_id: String,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("longest run of an empty week set is undefined")]
    EmptyWeeks,
    #[error("{0} must be at least 1")]
    InvalidParam(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// `true` for `GLOBAL` or exactly two uppercase ASCII letters.
pub fn is_valid_country(code: &str) -> bool {
    code == GLOBAL || (code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub country: String,
    pub week: u32,
    pub track_id: String,
    pub title: String,
    pub artist: String,
    pub views: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackSelection {
    pub country: String,
    pub track_id: String,
    pub total_views: u64,
    /// Longest count of consecutive chart weeks.
    pub max_run: u32,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    if found.iter().map(str::trim).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(IngestError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

fn csv_reader<R: Read>(stream: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(stream)
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses a chart CSV with header `country,week,track_id,title,artist,views`.
///
/// Entries come back in file order. Errors carry the 1-based line number of
/// the offending row.
pub fn parse_chart_file<R: Read>(stream: R) -> Result<Vec<ChartEntry>, IngestError> {
    let mut rdr = csv_reader(stream);
    check_header(rdr.headers()?, &CHART_HEADER)?;

    let mut seen: HashSet<(String, u32, String)> = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let malformed = |msg: String| IngestError::Malformed { line, msg };
        if rec.len() != CHART_HEADER.len() {
            return Err(malformed(format!(
                "expected {} columns, found {}",
                CHART_HEADER.len(),
                rec.len()
            )));
        }
        let country = rec[0].trim().to_string();
        if !is_valid_country(&country) {
            return Err(malformed(format!("invalid country code `{country}`")));
        }
        let week: u32 = rec[1]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("week `{}` is not a non-negative integer", &rec[1])))?;
        let track_id = rec[2].trim().to_string();
        if track_id.is_empty() {
            return Err(malformed("empty track_id".into()));
        }
        let views: u64 = rec[5]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("views `{}` is not a non-negative integer", &rec[5])))?;

        if !seen.insert((country.clone(), week, track_id.clone())) {
            return Err(IngestError::Duplicate {
                line,
                country,
                week,
                track_id,
            });
        }
        out.push(ChartEntry {
            country,
            week,
            track_id,
            title: rec[3].to_string(),
            artist: rec[4].to_string(),
            views,
        });
    }
    Ok(out)
}

/// Length of the longest run of consecutive integers in `weeks`.
pub fn longest_consecutive_run(weeks: &BTreeSet<u32>) -> Result<u32, IngestError> {
    let mut iter = weeks.iter();
    let Some(&first) = iter.next() else {
        return Err(IngestError::EmptyWeeks);
    };
    let (mut best, mut cur, mut prev) = (1u32, 1u32, first);
    for &w in iter {
        cur = if w == prev + 1 { cur + 1 } else { 1 };
        best = best.max(cur);
        prev = w;
    }
    Ok(best)
}

/// Keeps tracks charting at least `min_weeks` consecutive weeks and returns the
/// `top_n` of them per country by total views (ties: ascending track id).
pub fn select_tracks(
    entries: &[ChartEntry],
    min_weeks: u32,
    top_n: usize,
) -> Result<BTreeMap<String, Vec<TrackSelection>>, IngestError> {
    if min_weeks < 1 {
        return Err(IngestError::InvalidParam("min_weeks"));
    }
    if top_n < 1 {
        return Err(IngestError::InvalidParam("top_n"));
    }

    struct Acc {
        views: u64,
        weeks: BTreeSet<u32>,
    }
    let mut per_country: BTreeMap<&str, HashMap<&str, Acc>> = BTreeMap::new();
    for e in entries {
        let acc = per_country
            .entry(e.country.as_str())
            .or_default()
            .entry(e.track_id.as_str())
            .or_insert_with(|| Acc {
                views: 0,
                weeks: BTreeSet::new(),
            });
        acc.views += e.views;
        acc.weeks.insert(e.week);
    }

    let mut out = BTreeMap::new();
    for (country, tracks) in per_country {
        let mut kept = Vec::new();
        for (track_id, acc) in tracks {
            let max_run = longest_consecutive_run(&acc.weeks)?;
            if max_run >= min_weeks {
                kept.push(TrackSelection {
                    country: country.to_string(),
                    track_id: track_id.to_string(),
                    total_views: acc.views,
                    max_run,
                });
            }
        }
        kept.sort_by(|a, b| {
            b.total_views
                .cmp(&a.total_views)
                .then_with(|| a.track_id.cmp(&b.track_id))
        });
        kept.truncate(top_n);
        out.insert(country.to_string(), kept);
    }
    Ok(out)
}

/// Writes selections as CSV `country,track_id,total_views,max_run`.
pub fn write_selections<W: Write>(
    selections: &BTreeMap<String, Vec<TrackSelection>>,
    sink: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SELECTION_HEADER)?;
    for sel in selections.values().flatten() {
        w.write_record([
            sel.country.as_str(),
            sel.track_id.as_str(),
            &sel.total_views.to_string(),
            &sel.max_run.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the CSV written by [`write_selections`], preserving row order per country.
pub fn read_selections<R: Read>(stream: R) -> Result<BTreeMap<String, Vec<TrackSelection>>, IngestError> {
    let mut rdr = csv_reader(stream);
    check_header(rdr.headers()?, &SELECTION_HEADER)?;
    let mut out: BTreeMap<String, Vec<TrackSelection>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let malformed = |msg: &str| IngestError::Malformed {
            line,
            msg: msg.to_string(),
        };
        if rec.len() != SELECTION_HEADER.len() {
            return Err(malformed("wrong column count"));
        }
        let country = rec[0].trim().to_string();
        if !is_valid_country(&country) {
            return Err(malformed("invalid country code"));
        }
        let sel = TrackSelection {
            country: country.clone(),
            track_id: rec[1].trim().to_string(),
            total_views: rec[2].trim().parse().map_err(|_| malformed("bad total_views"))?,
            max_run: rec[3].trim().parse().map_err(|_| malformed("bad max_run"))?,
        };
        if sel.track_id.is_empty() || sel.max_run < 1 {
            return Err(malformed("empty track_id or zero max_run"));
        }
        out.entry(country).or_default().push(sel);
    }
    Ok(out)
}
