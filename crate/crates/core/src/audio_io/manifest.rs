//! Line-oriented dataset manifest.
//!
//! ```text
//! #melodyforge-manifest	1
//! #generator	melodyforge-gen/1
//! #bit_depth	16
//! #config_hash	<16 hex digits>
//! #meta	<key>	<value>          (zero or more, sorted by key)
//! seed	label	tonic	mode	timbre	amplitude	split	shift_role	path	chords
//! 0	major	Eb	major	sine	stable	train	clean	sine/train/0.wav	I@0.53;IV@0.71;V@0.22
//! ```
//!
//! Fields are tab separated. `chords` lists `symbol@duration` pairs joined by
//! `;`, durations printed in shortest round-trip form. Rows are unique on
//! `(seed, timbre, split)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Component, Path};

use thiserror::Error;

use crate::shiftlab::{ChordSlot, SampleRecord, ShiftRole, Split};
use crate::synth::Waveshape;
use crate::theory::{KeyId, Mode};

pub const MANIFEST_VERSION: u32 = 1;
const MAGIC: &str = "#melodyforge-manifest";

pub const MANIFEST_COLUMNS: [&str; 10] = [
    "seed",
    "label",
    "tonic",
    "mode",
    "timbre",
    "amplitude",
    "split",
    "shift_role",
    "path",
    "chords",
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("manifest schema version {found}, this build reads version {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("row {line}: duplicate key (seed {seed}, {timbre}, {split})")]
    DuplicateKey {
        line: usize,
        seed: u64,
        timbre: Waveshape,
        split: Split,
    },
    #[error("record for seed {0} is not selected and cannot be emitted")]
    UnselectedRecord(u64),
    #[error("path `{0}` escapes the dataset root")]
    PathEscapesRoot(String),
    #[error("header value for `{0}` contains a tab or newline")]
    BadHeaderValue(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestHeader {
    pub version: u32,
    pub generator: String,
    pub bit_depth: u16,
    pub config_hash: String,
    pub meta: BTreeMap<String, String>,
}

impl ManifestHeader {
    pub fn new(generator: &str, config_hash: &str) -> Self {
        ManifestHeader {
            version: MANIFEST_VERSION,
            generator: generator.to_string(),
            bit_depth: 16,
            config_hash: config_hash.to_string(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
}

/// Dataset-relative location of a rendered sample.
pub fn wav_rel_path(timbre: Waveshape, split: Split, seed: u64) -> String {
    format!("{timbre}/{split}/{seed}.wav")
}

fn check_rel_path(p: &str) -> Result<(), ManifestError> {
    let path = Path::new(p);
    let inside = !p.is_empty()
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if inside {
        Ok(())
    } else {
        Err(ManifestError::PathEscapesRoot(p.to_string()))
    }
}

impl DatasetManifest {
    pub fn new(header: ManifestHeader, records: Vec<SampleRecord>) -> Self {
        DatasetManifest { header, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_unique(&self) -> Result<(), ManifestError> {
        let mut seen = HashMap::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if seen.insert((r.seed, r.timbre, r.split), i).is_some() {
                return Err(ManifestError::DuplicateKey {
                    line: i + 1,
                    seed: r.seed,
                    timbre: r.timbre,
                    split: r.split,
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String, ManifestError> {
        self.check_unique()?;
        let h = &self.header;
        let mut out = String::with_capacity(128 * (self.records.len() + 8));
        let _ = writeln!(out, "{MAGIC}\t{}", h.version);
        let _ = writeln!(out, "#generator\t{}", h.generator);
        let _ = writeln!(out, "#bit_depth\t{}", h.bit_depth);
        let _ = writeln!(out, "#config_hash\t{}", h.config_hash);
        for (k, v) in &h.meta {
            if [k, v].iter().any(|s| s.contains(['\t', '\n', '\r'])) {
                return Err(ManifestError::BadHeaderValue(k.clone()));
            }
            let _ = writeln!(out, "#meta\t{k}\t{v}");
        }
        out.push_str(&MANIFEST_COLUMNS.join("\t"));
        out.push('\n');
        for r in &self.records {
            if !r.selected {
                return Err(ManifestError::UnselectedRecord(r.seed));
            }
            check_rel_path(&r.path)?;
            let chords = r
                .chords
                .iter()
                .map(|c| format!("{}@{}", c.symbol, c.duration))
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.seed,
                r.label,
                r.key.tonic,
                r.key.mode,
                r.timbre,
                r.amplitude,
                r.split,
                r.shift_role,
                r.path,
                chords
            );
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, msg: &str| ManifestError::Malformed {
            line,
            msg: msg.to_string(),
        };

        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty manifest"))?;
        let version = match first.split_once('\t') {
            Some((MAGIC, v)) => v,
            _ => return Err(bad(1, "missing manifest magic line")),
        };
        if version != MANIFEST_VERSION.to_string() {
            return Err(ManifestError::VersionMismatch {
                found: version.to_string(),
                expected: MANIFEST_VERSION,
            });
        }

        let mut header = ManifestHeader::new("", "");
        let mut columns_seen = false;
        let mut records = Vec::new();
        let mut seen: HashMap<(u64, Waveshape, Split), usize> = HashMap::new();
        for (n, line) in lines {
            if !columns_seen {
                if let Some(rest) = line.strip_prefix('#') {
                    let mut parts = rest.splitn(3, '\t');
                    match (parts.next(), parts.next(), parts.next()) {
                        (Some("generator"), Some(v), None) => header.generator = v.to_string(),
                        (Some("bit_depth"), Some(v), None) => {
                            header.bit_depth = v.parse().map_err(|_| bad(n, "bad bit depth"))?
                        }
                        (Some("config_hash"), Some(v), None) => header.config_hash = v.to_string(),
                        (Some("meta"), Some(k), Some(v)) => {
                            header.meta.insert(k.to_string(), v.to_string());
                        }
                        _ => return Err(bad(n, "unrecognized header line")),
                    }
                    continue;
                }
                if line.split('\t').ne(MANIFEST_COLUMNS) {
                    return Err(bad(n, "column line does not match the schema"));
                }
                columns_seen = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let record = parse_row(line).map_err(|msg| bad(n, &msg))?;
            let key = (record.seed, record.timbre, record.split);
            if seen.insert(key, n).is_some() {
                return Err(ManifestError::DuplicateKey {
                    line: n,
                    seed: key.0,
                    timbre: key.1,
                    split: key.2,
                });
            }
            records.push(record);
        }
        if !columns_seen {
            return Err(bad(0, "missing column line"));
        }
        Ok(DatasetManifest { header, records })
    }
}

fn parse_row(line: &str) -> Result<SampleRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != MANIFEST_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", MANIFEST_COLUMNS.len(), f.len()));
    }
    let e = |what: &str, v: &str| format!("bad {what} `{v}`");
    let seed: u64 = f[0].parse().map_err(|_| e("seed", f[0]))?;
    let label: Mode = f[1].parse().map_err(|_| e("label", f[1]))?;
    let tonic = f[2].parse().map_err(|_| e("tonic", f[2]))?;
    let mode: Mode = f[3].parse().map_err(|_| e("mode", f[3]))?;
    if mode != label {
        return Err(format!("label {label} disagrees with key mode {mode}"));
    }
    let timbre = f[4].parse().map_err(|_| e("timbre", f[4]))?;
    let amplitude = f[5].parse().map_err(|_| e("amplitude", f[5]))?;
    let split: Split = f[6].parse().map_err(|_| e("split", f[6]))?;
    let shift_role: ShiftRole = f[7].parse().map_err(|_| e("shift_role", f[7]))?;
    check_rel_path(f[8]).map_err(|err| err.to_string())?;
    let chords = if f[9].is_empty() {
        Vec::new()
    } else {
        f[9].split(';')
            .map(|c| {
                let (sym, dur) = c.split_once('@').ok_or_else(|| e("chord", c))?;
                Ok(ChordSlot {
                    symbol: sym.parse().map_err(|_| e("chord symbol", sym))?,
                    duration: dur.parse().map_err(|_| e("chord duration", dur))?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?
    };
    Ok(SampleRecord {
        seed,
        label,
        key: KeyId::new(tonic, mode),
        timbre,
        amplitude,
        split,
        shift_role,
        selected: true,
        path: f[8].to_string(),
        chords,
    })
}

/// Writes the manifest unless the file already holds exactly these bytes.
/// Returns whether anything was written.
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<bool, ManifestError> {
    let text = manifest.to_text()?;
    if fs::read(path).is_ok_and(|existing| existing == text.as_bytes()) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("manifest.partial");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(true)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    DatasetManifest::parse(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::ProfileName;
    use crate::theory::{ChordSymbol, PitchClass};

    fn record(seed: u64) -> SampleRecord {
        SampleRecord {
            seed,
            label: Mode::Minor,
            key: KeyId::new(PitchClass::AB, Mode::Minor),
            timbre: Waveshape::Square,
            amplitude: ProfileName::Stable,
            split: Split::Train,
            shift_role: ShiftRole::BiasAligned,
            selected: true,
            path: wav_rel_path(Waveshape::Square, Split::Train, seed),
            chords: vec![
                ChordSlot {
                    symbol: "iiø7".parse::<ChordSymbol>().unwrap(),
                    duration: 0.123_456_789_012_345_6,
                },
                ChordSlot {
                    symbol: "III+".parse().unwrap(),
                    duration: 0.9,
                },
            ],
        }
    }

    fn manifest(n: u64) -> DatasetManifest {
        let header = ManifestHeader::new("melodyforge-gen/1", "0123456789abcdef")
            .with("kind", "base")
            .with("config", r#"{"a":[1,2]}"#);
        DatasetManifest::new(header, (0..n).map(record).collect())
    }

    #[test]
    fn round_trips() {
        let m = manifest(50);
        let text = m.to_text().unwrap();
        assert_eq!(DatasetManifest::parse(&text).unwrap(), m);
        assert!(text.lines().nth(6).unwrap().starts_with("seed\tlabel"));
    }

    #[test]
    fn duplicate_rows_are_rejected_with_line() {
        let text = manifest(3).to_text().unwrap();
        let last = text.lines().last().unwrap().to_string();
        let doubled = format!("{text}{last}\n");
        match DatasetManifest::parse(&doubled) {
            Err(ManifestError::DuplicateKey { line, seed, .. }) => {
                assert_eq!(seed, 2);
                assert_eq!(line, doubled.lines().count());
            }
            other => panic!("{other:?}"),
        }
        let mut m = manifest(2);
        m.records.push(record(0));
        assert!(matches!(m.to_text(), Err(ManifestError::DuplicateKey { line: 3, .. })));
    }

    #[test]
    fn version_mismatch() {
        let text = manifest(1).to_text().unwrap().replacen("manifest\t1", "manifest\t2", 1);
        assert!(matches!(
            DatasetManifest::parse(&text),
            Err(ManifestError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_escaping_paths_and_unselected() {
        let mut m = manifest(1);
        m.records[0].path = "../x.wav".into();
        assert!(matches!(m.to_text(), Err(ManifestError::PathEscapesRoot(_))));
        m.records[0].path = "/abs/x.wav".into();
        assert!(m.to_text().is_err());
        let mut m = manifest(1);
        m.records[0].selected = false;
        assert!(matches!(m.to_text(), Err(ManifestError::UnselectedRecord(0))));
    }

    #[test]
    fn bad_rows_name_their_line() {
        let text = manifest(2).to_text().unwrap().replace("\tminor\tAb\tminor\t", "\tmajor\tAb\tminor\t");
        assert!(matches!(
            DatasetManifest::parse(&text),
            Err(ManifestError::Malformed { line: 8, .. })
        ));
    }

    #[test]
    fn write_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.manifest");
        let m = manifest(5);
        assert!(write_manifest(&m, &path).unwrap());
        assert!(!write_manifest(&m, &path).unwrap());
        assert_eq!(read_manifest(&path).unwrap(), m);
    }
}
