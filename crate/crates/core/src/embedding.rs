//! Per-(track, country) embeddings: CEMB/text storage, country profiles,
//! contrastive deviations from the global profile, and z-scoring.
//!
//! # CEMB layout (little-endian)
//!
//! ```text
//! "CEMB" | version: u16 = 1 | dim: u16 = 512 | count: u64
//! count × ( id_len: u16 | id: [u8] | cc_len: u8 | cc: [u8] | dim × f32 )
//! ```
//!
//! The text fallback has one record per line:
//! `track_id<TAB>country<TAB>v1,v2,...,v512`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{is_valid_country, GLOBAL};

pub const EMBEDDING_DIM: usize = 512;
pub const CEMB_MAGIC: &[u8; 4] = b"CEMB";
pub const CEMB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("byte {offset}: bad magic, expected `CEMB`")]
    BadMagic { offset: u64 },
    #[error("byte {offset}: unsupported format version {version}")]
    Version { offset: u64, version: u16 },
    #[error("byte {offset}: dimension {dim}, expected {EMBEDDING_DIM}")]
    Dimension { offset: u64, dim: usize },
    #[error("byte {offset}: non-finite value at component {component}")]
    NonFinite { offset: u64, component: usize },
    #[error("byte {offset}: truncated record")]
    Truncated { offset: u64 },
    #[error("byte {offset}: {msg}")]
    Invalid { offset: u64, msg: String },
    #[error("byte {offset}: duplicate record for track {track_id} in {country}")]
    Duplicate {
        offset: u64,
        track_id: String,
        country: String,
    },
    #[error("cannot build a profile from zero records")]
    EmptyProfile,
    #[error("profile records mix countries {0} and {1}")]
    MixedCountries(String, String),
    #[error("track {track_id} has different vectors in {a} and {b}")]
    CacheConflict { track_id: String, a: String, b: String },
    #[error("global profile must have country GLOBAL, found {0}")]
    NotGlobal(String),
    #[error("GLOBAL may only appear as the reference profile")]
    GlobalInProfiles,
    #[error("duplicate profile for {0}")]
    DuplicateProfile(String),
    #[error("standardizing needs at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("matrix is already standardized")]
    AlreadyStandardized,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub track_id: String,
    pub country: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryProfile {
    pub country: String,
    pub mean_vector: Vec<f64>,
    pub track_count: usize,
}

/// Which way round the contrastive difference is taken. Pairwise row distances
/// are the same under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveSign {
    #[default]
    CountryMinusGlobal,
    GlobalMinusCountry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveMatrix {
    pub countries: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub standardized: bool,
}

impl ContrastiveMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

// --- storage ---------------------------------------------------------------

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, record_start: usize) -> Result<&'a [u8], EmbeddingError> {
        if self.buf.len() - self.pos < n {
            return Err(EmbeddingError::Truncated {
                offset: record_start as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, start: usize) -> Result<u16, EmbeddingError> {
        Ok(u16::from_le_bytes(self.take(2, start)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize, start: usize, what: &str) -> Result<String, EmbeddingError> {
        let at = self.pos as u64;
        let raw = self.take(n, start)?;
        String::from_utf8(raw.to_vec()).map_err(|_| EmbeddingError::Invalid {
            offset: at,
            msg: format!("{what} is not valid UTF-8"),
        })
    }
}

fn check_key(seen: &mut HashSet<(String, String)>, rec: &EmbeddingRecord, offset: u64) -> Result<(), EmbeddingError> {
    if rec.track_id.is_empty() {
        return Err(EmbeddingError::Invalid {
            offset,
            msg: "empty track_id".into(),
        });
    }
    if !is_valid_country(&rec.country) {
        return Err(EmbeddingError::Invalid {
            offset,
            msg: format!("invalid country code `{}`", rec.country),
        });
    }
    if !seen.insert((rec.track_id.clone(), rec.country.clone())) {
        return Err(EmbeddingError::Duplicate {
            offset,
            track_id: rec.track_id.clone(),
            country: rec.country.clone(),
        });
    }
    Ok(())
}

/// Decodes a CEMB buffer.
pub fn read_cemb(buf: &[u8]) -> Result<Vec<EmbeddingRecord>, EmbeddingError> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4, 0).ok() != Some(CEMB_MAGIC.as_slice()) {
        return Err(EmbeddingError::BadMagic { offset: 0 });
    }
    let version = cur.u16(0)?;
    if version != CEMB_VERSION {
        return Err(EmbeddingError::Version { offset: 4, version });
    }
    let dim = cur.u16(0)? as usize;
    if dim != EMBEDDING_DIM {
        return Err(EmbeddingError::Dimension { offset: 6, dim });
    }
    let count = u64::from_le_bytes(cur.take(8, 0)?.try_into().unwrap());

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..count {
        let start = cur.pos;
        let id_len = cur.u16(start)? as usize;
        let track_id = cur.utf8(id_len, start, "track_id")?;
        let cc_len = cur.take(1, start)?[0] as usize;
        let country = cur.utf8(cc_len, start, "country")?;
        let raw = cur.take(4 * EMBEDDING_DIM, start)?;
        let mut vector = Vec::with_capacity(EMBEDDING_DIM);
        for (component, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(EmbeddingError::NonFinite {
                    offset: start as u64,
                    component,
                });
            }
            vector.push(v);
        }
        let rec = EmbeddingRecord {
            track_id,
            country,
            vector,
        };
        check_key(&mut seen, &rec, start as u64)?;
        out.push(rec);
    }
    if cur.pos != buf.len() {
        return Err(EmbeddingError::Invalid {
            offset: cur.pos as u64,
            msg: "trailing bytes after last record".into(),
        });
    }
    Ok(out)
}

fn validate_vector(rec: &EmbeddingRecord) -> Result<(), EmbeddingError> {
    if rec.vector.len() != EMBEDDING_DIM {
        return Err(EmbeddingError::Dimension {
            offset: 0,
            dim: rec.vector.len(),
        });
    }
    if let Some(component) = rec.vector.iter().position(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite { offset: 0, component });
    }
    Ok(())
}

/// Encodes records as CEMB.
pub fn write_cemb<W: Write>(records: &[EmbeddingRecord], mut sink: W) -> Result<(), EmbeddingError> {
    sink.write_all(CEMB_MAGIC)?;
    sink.write_all(&CEMB_VERSION.to_le_bytes())?;
    sink.write_all(&(EMBEDDING_DIM as u16).to_le_bytes())?;
    sink.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        validate_vector(rec)?;
        let id = rec.track_id.as_bytes();
        let cc = rec.country.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| EmbeddingError::Invalid {
            offset: 0,
            msg: "track_id longer than 65535 bytes".into(),
        })?;
        let cc_len = u8::try_from(cc.len()).map_err(|_| EmbeddingError::Invalid {
            offset: 0,
            msg: "country longer than 255 bytes".into(),
        })?;
        sink.write_all(&id_len.to_le_bytes())?;
        sink.write_all(id)?;
        sink.write_all(&[cc_len])?;
        sink.write_all(cc)?;
        for v in &rec.vector {
            sink.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Decodes the tab-separated text fallback.
pub fn read_text(buf: &[u8]) -> Result<Vec<EmbeddingRecord>, EmbeddingError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut offset = 0usize;
    for raw_line in buf.split_inclusive(|&b| b == b'\n') {
        let start = offset as u64;
        offset += raw_line.len();
        let invalid = |msg: String| EmbeddingError::Invalid { offset: start, msg };
        let line = std::str::from_utf8(raw_line)
            .map_err(|_| invalid("line is not valid UTF-8".into()))?
            .trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(track_id), Some(country), Some(values), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(invalid("expected 3 tab-separated fields".into()));
        };
        let vector = values
            .split(',')
            .map(|s| s.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("bad float: {e}")))?;
        if vector.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Dimension {
                offset: start,
                dim: vector.len(),
            });
        }
        if let Some(component) = vector.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                offset: start,
                component,
            });
        }
        let rec = EmbeddingRecord {
            track_id: track_id.to_string(),
            country: country.to_string(),
            vector,
        };
        check_key(&mut seen, &rec, start)?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes the text fallback. Floats use the shortest representation that
/// parses back to the same `f32`.
pub fn write_text<W: Write>(records: &[EmbeddingRecord], mut sink: W) -> Result<(), EmbeddingError> {
    for rec in records {
        validate_vector(rec)?;
        let values: Vec<String> = rec.vector.iter().map(f32::to_string).collect();
        writeln!(sink, "{}\t{}\t{}", rec.track_id, rec.country, values.join(","))?;
    }
    Ok(())
}

/// Reads either format, choosing CEMB when the stream starts with its magic.
pub fn load_embeddings<R: Read>(mut stream: R) -> Result<Vec<EmbeddingRecord>, EmbeddingError> {
    let mut buf = Vec::new();
    stream.read_to_end(&mut buf)?;
    if buf.starts_with(CEMB_MAGIC) {
        read_cemb(&buf)
    } else if buf.is_empty() || buf.contains(&b'\t') {
        read_text(&buf)
    } else {
        Err(EmbeddingError::BadMagic { offset: 0 })
    }
}

// --- profiles --------------------------------------------------------------

fn mean_in_track_order<'a>(vectors: impl Iterator<Item = &'a [f32]>) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0f64; EMBEDDING_DIM];
    let mut n = 0usize;
    for v in vectors {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += f64::from(x);
        }
        n += 1;
    }
    let inv = n as f64;
    sum.iter_mut().for_each(|s| *s /= inv);
    (sum, n)
}

/// Equal-weight mean of one country's track embeddings.
///
/// Records are summed in track-id order, so any permutation of the input gives
/// a bit-identical profile.
pub fn country_profile(records: &[EmbeddingRecord]) -> Result<CountryProfile, EmbeddingError> {
    let first = records.first().ok_or(EmbeddingError::EmptyProfile)?;
    for r in records {
        if r.country != first.country {
            return Err(EmbeddingError::MixedCountries(first.country.clone(), r.country.clone()));
        }
        validate_vector(r)?;
    }
    let mut order: Vec<&EmbeddingRecord> = records.iter().collect();
    order.sort_by(|a, b| a.track_id.cmp(&b.track_id));
    let (mean_vector, track_count) = mean_in_track_order(order.iter().map(|r| r.vector.as_slice()));
    Ok(CountryProfile {
        country: first.country.clone(),
        mean_vector,
        track_count,
    })
}

/// Groups records by country and profiles each one.
pub fn profiles_by_country(records: &[EmbeddingRecord]) -> Result<BTreeMap<String, CountryProfile>, EmbeddingError> {
    let mut groups: BTreeMap<&str, Vec<EmbeddingRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.country).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(c, recs)| Ok((c.to_string(), country_profile(&recs)?)))
        .collect()
}

/// One vector per unique track plus the countries it charts in.
///
/// Built once, then read-only; profiles derived from it match
/// [`profiles_by_country`] over the expanded records bit for bit.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingCache {
    tracks: BTreeMap<String, (Vec<f32>, BTreeSet<String>)>,
}

impl EmbeddingCache {
    pub fn from_records(records: &[EmbeddingRecord]) -> Result<Self, EmbeddingError> {
        let mut cache = Self::default();
        for r in records {
            validate_vector(r)?;
            match cache.tracks.get_mut(&r.track_id) {
                Some((v, countries)) => {
                    if v.iter().map(|x| x.to_bits()).ne(r.vector.iter().map(|x| x.to_bits())) {
                        return Err(EmbeddingError::CacheConflict {
                            track_id: r.track_id.clone(),
                            a: countries.iter().next().cloned().unwrap_or_default(),
                            b: r.country.clone(),
                        });
                    }
                    countries.insert(r.country.clone());
                }
                None => {
                    cache.tracks.insert(
                        r.track_id.clone(),
                        (r.vector.clone(), BTreeSet::from([r.country.clone()])),
                    );
                }
            }
        }
        Ok(cache)
    }

    pub fn insert(&mut self, track_id: &str, vector: Vec<f32>, countries: impl IntoIterator<Item = String>) {
        let entry = self
            .tracks
            .entry(track_id.to_string())
            .or_insert_with(|| (vector, BTreeSet::new()));
        entry.1.extend(countries);
    }

    pub fn unique_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn get(&self, track_id: &str) -> Option<&[f32]> {
        self.tracks.get(track_id).map(|(v, _)| v.as_slice())
    }

    /// Expands back to one record per (track, country).
    pub fn records(&self) -> Vec<EmbeddingRecord> {
        self.tracks
            .iter()
            .flat_map(|(id, (v, cs))| {
                cs.iter().map(move |c| EmbeddingRecord {
                    track_id: id.clone(),
                    country: c.clone(),
                    vector: v.clone(),
                })
            })
            .collect()
    }

    pub fn profiles(&self) -> BTreeMap<String, CountryProfile> {
        let mut per_country: BTreeMap<&str, Vec<&[f32]>> = BTreeMap::new();
        // BTreeMap iteration is track-id order, matching country_profile.
        for (v, countries) in self.tracks.values() {
            for c in countries {
                per_country.entry(c).or_default().push(v);
            }
        }
        per_country
            .into_iter()
            .map(|(c, vs)| {
                let (mean_vector, track_count) = mean_in_track_order(vs.into_iter());
                (
                    c.to_string(),
                    CountryProfile {
                        country: c.to_string(),
                        mean_vector,
                        track_count,
                    },
                )
            })
            .collect()
    }
}

// --- contrastive matrix ----------------------------------------------------

/// Deviation of each country profile from the global profile, rows sorted by
/// country code.
pub fn contrastive_matrix(
    profiles: &[CountryProfile],
    global_profile: &CountryProfile,
    sign: ContrastiveSign,
) -> Result<ContrastiveMatrix, EmbeddingError> {
    if global_profile.country != GLOBAL {
        return Err(EmbeddingError::NotGlobal(global_profile.country.clone()));
    }
    let mut sorted: Vec<&CountryProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.country.cmp(&b.country));
    for w in sorted.windows(2) {
        if w[0].country == w[1].country {
            return Err(EmbeddingError::DuplicateProfile(w[0].country.clone()));
        }
    }
    let mut countries = Vec::with_capacity(sorted.len());
    let mut values = Vec::with_capacity(sorted.len());
    for p in sorted {
        if p.country == GLOBAL {
            return Err(EmbeddingError::GlobalInProfiles);
        }
        let row = p
            .mean_vector
            .iter()
            .zip(&global_profile.mean_vector)
            .map(|(&c, &g)| match sign {
                ContrastiveSign::CountryMinusGlobal => c - g,
                ContrastiveSign::GlobalMinusCountry => g - c,
            })
            .collect();
        countries.push(p.country.clone());
        values.push(row);
    }
    Ok(ContrastiveMatrix {
        countries,
        values,
        standardized: false,
    })
}

/// Column-wise z-scores with the population standard deviation. Constant
/// columns become zeros.
pub fn standardize(m: &ContrastiveMatrix) -> Result<ContrastiveMatrix, EmbeddingError> {
    if m.standardized {
        return Err(EmbeddingError::AlreadyStandardized);
    }
    Ok(ContrastiveMatrix {
        countries: m.countries.clone(),
        values: zscore_columns(&m.values)?,
        standardized: true,
    })
}

pub(crate) fn zscore_columns(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let n = rows.len();
    if n < 2 {
        return Err(EmbeddingError::TooFewRows(n));
    }
    let cols = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..cols {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        // Treat spread at rounding level as constant.
        let constant = std <= 1e-12 * mean.abs().max(1.0) || rows.iter().all(|r| r[j] == rows[0][j]);
        for row in out.iter_mut() {
            row[j] = if constant { 0.0 } else { (row[j] - mean) / std };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(track: &str, country: &str, head: &[f32]) -> EmbeddingRecord {
        let mut vector = vec![0.0f32; EMBEDDING_DIM];
        vector[..head.len()].copy_from_slice(head);
        EmbeddingRecord {
            track_id: track.into(),
            country: country.into(),
            vector,
        }
    }

    fn cemb_bytes(records: &[EmbeddingRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_cemb(records, &mut buf).unwrap();
        buf
    }

    #[test]
    fn empty_file_loads_empty() {
        assert!(load_embeddings(cemb_bytes(&[]).as_slice()).unwrap().is_empty());
        assert!(load_embeddings(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut r = rec("t1", "KR", &[1.5, -0.0, f32::MIN_POSITIVE, 3.4e38]);
        r.vector[511] = 1.0e-40; // subnormal
        let back = load_embeddings(cemb_bytes(std::slice::from_ref(&r)).as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back[0]
            .vector
            .iter()
            .zip(&r.vector)
            .all(|(a, b)| a.to_bits() == b.to_bits()));

        let mut text = Vec::new();
        write_text(std::slice::from_ref(&r), &mut text).unwrap();
        let back = load_embeddings(text.as_slice()).unwrap();
        assert!(back[0]
            .vector
            .iter()
            .zip(&r.vector)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dimension_513_rejected() {
        let mut buf = cemb_bytes(&[]);
        buf[6..8].copy_from_slice(&513u16.to_le_bytes());
        assert!(matches!(
            read_cemb(&buf),
            Err(EmbeddingError::Dimension { offset: 6, dim: 513 })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = cemb_bytes(&[]);
        buf[0] = b'X';
        assert!(matches!(read_cemb(&buf), Err(EmbeddingError::BadMagic { .. })));
        let mut buf = cemb_bytes(&[]);
        buf[4] = 2;
        assert!(matches!(
            read_cemb(&buf),
            Err(EmbeddingError::Version { version: 2, .. })
        ));
    }

    #[test]
    fn truncated_record_reports_offset() {
        let buf = cemb_bytes(&[rec("a", "US", &[1.0]), rec("b", "US", &[2.0])]);
        let cut = &buf[..buf.len() - 10];
        let second_start = 16 + 2 + 1 + 1 + 2 + 4 * EMBEDDING_DIM;
        match read_cemb(cut) {
            Err(EmbeddingError::Truncated { offset }) => assert_eq!(offset, second_start as u64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let mut buf = cemb_bytes(&[rec("a", "US", &[1.0])]);
        let first_value = 16 + 2 + 1 + 1 + 2;
        buf[first_value + 8..first_value + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_cemb(&buf),
            Err(EmbeddingError::NonFinite {
                offset: 16,
                component: 2
            })
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let buf = cemb_bytes(&[rec("a", "US", &[1.0]), rec("a", "US", &[2.0])]);
        assert!(matches!(read_cemb(&buf), Err(EmbeddingError::Duplicate { .. })));
        // same track in two countries is fine
        let buf = cemb_bytes(&[rec("a", "US", &[1.0]), rec("a", "GB", &[1.0])]);
        assert_eq!(read_cemb(&buf).unwrap().len(), 2);
    }

    #[test]
    fn text_errors() {
        assert!(matches!(
            read_text(b"a\tUS\t1,2,3\n"),
            Err(EmbeddingError::Dimension { offset: 0, dim: 3 })
        ));
        assert!(matches!(read_text(b"a\tUS\n"), Err(EmbeddingError::Invalid { .. })));
    }

    #[test]
    fn profile_examples() {
        let single = rec("a", "FR", &[4.0, -1.0]);
        let p = country_profile(std::slice::from_ref(&single)).unwrap();
        assert_eq!(p.mean_vector[..2], [4.0, -1.0]);
        assert_eq!(p.track_count, 1);

        let p = country_profile(&[rec("a", "FR", &[1.0]), rec("b", "FR", &[3.0])]).unwrap();
        assert_eq!(p.mean_vector[0], 2.0);
        assert!(p.mean_vector[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn profile_errors() {
        assert!(matches!(country_profile(&[]), Err(EmbeddingError::EmptyProfile)));
        assert!(matches!(
            country_profile(&[rec("a", "FR", &[1.0]), rec("b", "DE", &[1.0])]),
            Err(EmbeddingError::MixedCountries(..))
        ));
    }

    fn profile(country: &str, head: &[f64]) -> CountryProfile {
        let mut mean_vector = vec![0.0; EMBEDDING_DIM];
        mean_vector[..head.len()].copy_from_slice(head);
        CountryProfile {
            country: country.into(),
            mean_vector,
            track_count: 1,
        }
    }

    #[test]
    fn contrastive_examples() {
        let global = profile(GLOBAL, &[1.0, 5.0]);
        let m = contrastive_matrix(
            &[profile("US", &[2.0, 5.0]), profile("BR", &[1.0, 5.0])],
            &global,
            ContrastiveSign::CountryMinusGlobal,
        )
        .unwrap();
        assert_eq!(m.countries, ["BR", "US"]);
        assert!(m.values[0].iter().all(|&v| v == 0.0));
        assert_eq!(m.values[1][..2], [1.0, 0.0]);
        assert!(!m.standardized);

        let flipped =
            contrastive_matrix(&[profile("US", &[2.0])], &global, ContrastiveSign::GlobalMinusCountry).unwrap();
        assert_eq!(flipped.values[0][0], -1.0);
    }

    #[test]
    fn contrastive_errors() {
        let global = profile(GLOBAL, &[]);
        assert!(matches!(
            contrastive_matrix(&[profile(GLOBAL, &[])], &global, ContrastiveSign::default()),
            Err(EmbeddingError::GlobalInProfiles)
        ));
        assert!(matches!(
            contrastive_matrix(&[], &profile("US", &[]), ContrastiveSign::default()),
            Err(EmbeddingError::NotGlobal(_))
        ));
        assert!(matches!(
            contrastive_matrix(
                &[profile("US", &[]), profile("US", &[])],
                &global,
                ContrastiveSign::default()
            ),
            Err(EmbeddingError::DuplicateProfile(_))
        ));
    }

    fn matrix(rows: Vec<Vec<f64>>) -> ContrastiveMatrix {
        ContrastiveMatrix {
            countries: (0..rows.len()).map(|i| format!("C{i}")).collect(),
            values: rows,
            standardized: false,
        }
    }

    #[test]
    fn standardize_examples() {
        let z = standardize(&matrix(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]])).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z.values[0][0] + expected).abs() < 1e-12);
        assert!(z.values[1][0].abs() < 1e-12);
        assert!((z.values[2][0] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
        assert!(z.values.iter().all(|r| r[1] == 0.0));
        assert!(z.standardized);
    }

    #[test]
    fn standardize_errors() {
        assert!(matches!(
            standardize(&matrix(vec![vec![1.0]])),
            Err(EmbeddingError::TooFewRows(1))
        ));
        let z = standardize(&matrix(vec![vec![1.0], vec![2.0]])).unwrap();
        assert!(matches!(standardize(&z), Err(EmbeddingError::AlreadyStandardized)));
    }

    #[test]
    fn cache_matches_expanded_profiles() {
        let records = vec![
            rec("z", "US", &[0.1, 0.7]),
            rec("a", "US", &[0.3, 0.2]),
            rec("a", "GB", &[0.3, 0.2]),
            rec("m", "GB", &[1.0 / 3.0, 9.0]),
            rec("m", "US", &[1.0 / 3.0, 9.0]),
        ];
        let cache = EmbeddingCache::from_records(&records).unwrap();
        assert_eq!(cache.unique_tracks(), 3);
        assert_eq!(cache.records().len(), records.len());
        let direct = profiles_by_country(&records).unwrap();
        assert_eq!(cache.profiles(), direct);
    }

    #[test]
    fn cache_rejects_conflicting_vectors() {
        let records = vec![rec("a", "US", &[1.0]), rec("a", "GB", &[2.0])];
        assert!(matches!(
            EmbeddingCache::from_records(&records),
            Err(EmbeddingError::CacheConflict { .. })
        ));
    }
}
