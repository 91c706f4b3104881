//! Country → World Values Survey cultural zone mapping.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{is_valid_country, GLOBAL};

/// Mapping shipped with the crate, covering the 61 chart countries.
/// The same file lives at `crates/core/data/wvs_zones_2023.csv`.
pub const DEFAULT_MAPPING_CSV: &str = include_str!("../data/wvs_zones_2023.csv");

#[derive(Debug, Error, PartialEq)]
pub enum CultureError {
    #[error("line {line}: unknown zone `{zone}`")]
    UnknownZone { line: u64, zone: String },
    #[error("line {line}: duplicate country {country}")]
    DuplicateCountry { line: u64, country: String },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("no cultural zone for {0}")]
    NotMapped(String),
    #[error("no cultural zone for: {}", .0.join(", "))]
    NotMappedMany(Vec<String>),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for CultureError {
    fn from(e: csv::Error) -> Self {
        CultureError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CultureZone {
    ProtestantEurope,
    CatholicEurope,
    EnglishSpeaking,
    LatinAmerica,
    Confucian,
    WestSouthAsia,
    OrthodoxEurope,
    AfricanIslamic,
}

impl CultureZone {
    pub const ALL: [CultureZone; 8] = [
        CultureZone::ProtestantEurope,
        CultureZone::CatholicEurope,
        CultureZone::EnglishSpeaking,
        CultureZone::LatinAmerica,
        CultureZone::Confucian,
        CultureZone::WestSouthAsia,
        CultureZone::OrthodoxEurope,
        CultureZone::AfricanIslamic,
    ];

    /// Stable serialization name.
    pub fn as_str(self) -> &'static str {
        match self {
            CultureZone::ProtestantEurope => "ProtestantEurope",
            CultureZone::CatholicEurope => "CatholicEurope",
            CultureZone::EnglishSpeaking => "EnglishSpeaking",
            CultureZone::LatinAmerica => "LatinAmerica",
            CultureZone::Confucian => "Confucian",
            CultureZone::WestSouthAsia => "WestSouthAsia",
            CultureZone::OrthodoxEurope => "OrthodoxEurope",
            CultureZone::AfricanIslamic => "AfricanIslamic",
        }
    }

    /// Human-readable name for figures.
    pub fn display_name(self) -> &'static str {
        match self {
            CultureZone::ProtestantEurope => "Protestant Europe",
            CultureZone::CatholicEurope => "Catholic Europe",
            CultureZone::EnglishSpeaking => "English Speaking",
            CultureZone::LatinAmerica => "Latin America",
            CultureZone::Confucian => "Confucian",
            CultureZone::WestSouthAsia => "West & South Asia",
            CultureZone::OrthodoxEurope => "Orthodox Europe",
            CultureZone::AfricanIslamic => "African-Islamic",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CultureZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CultureZone {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CultureZone::ALL.into_iter().find(|z| z.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CultureMapping {
    pub entries: BTreeMap<String, CultureZone>,
}

impl CultureMapping {
    pub fn bundled() -> Self {
        load_mapping(DEFAULT_MAPPING_CSV.as_bytes()).expect("bundled mapping is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `country,zone` rows in country order.
    pub fn write<W: Write>(&self, sink: W) -> Result<(), CultureError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["country", "zone"])?;
        for (c, z) in &self.entries {
            w.write_record([c.as_str(), z.as_str()])?;
        }
        w.flush().map_err(|e| CultureError::Csv(e.to_string()))
    }
}

/// Loads a `country,zone` CSV.
pub fn load_mapping<R: Read>(stream: R) -> Result<CultureMapping, CultureError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != ["country", "zone"] {
        return Err(CultureError::Malformed {
            line: 1,
            msg: format!("expected header `country,zone`, found `{}`", header.join(",")),
        });
    }
    let mut entries = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(CultureError::Malformed {
                line,
                msg: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let country = rec[0].trim();
        if !is_valid_country(country) || country == GLOBAL {
            return Err(CultureError::Malformed {
                line,
                msg: format!("invalid country code `{country}`"),
            });
        }
        let zone_str = rec[1].trim();
        let zone = zone_str.parse().map_err(|_| CultureError::UnknownZone {
            line,
            zone: zone_str.to_string(),
        })?;
        if entries.insert(country.to_string(), zone).is_some() {
            return Err(CultureError::DuplicateCountry {
                line,
                country: country.to_string(),
            });
        }
    }
    Ok(CultureMapping { entries })
}

pub fn map_country(m: &CultureMapping, code: &str) -> Result<CultureZone, CultureError> {
    m.entries
        .get(code)
        .copied()
        .ok_or_else(|| CultureError::NotMapped(code.to_string()))
}

/// Zones aligned index-for-index with `countries`; every unmapped code is
/// listed in the error.
pub fn zone_labels<S: AsRef<str>>(m: &CultureMapping, countries: &[S]) -> Result<Vec<CultureZone>, CultureError> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(countries.len());
    for c in countries {
        match m.entries.get(c.as_ref()) {
            Some(&z) => out.push(z),
            None => missing.push(c.as_ref().to_string()),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(CultureError::NotMappedMany(missing))
    }
}
