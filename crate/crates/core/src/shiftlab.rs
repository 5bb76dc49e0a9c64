//! Base datasets and the two shift constructors.
//!
//! Base datasets hold one record per `(seed, timbre, split)`; labels follow
//! seed parity (even seeds are major). The symbolic melody of a seed is
//! shared by every timbre, so twins differ only in waveshape.
//!
//! All shift constructors realize proportions with exact counts: positions
//! are drawn by seeded shuffles, never by independent Bernoulli trials
//! (unless [`BiasRemainder::Bernoulli`] is requested for the unbiased part).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{wav_rel_path, DatasetManifest, ManifestHeader};
use crate::config::ProjectConfig;
use crate::melodygen::{generate_melody, GenError, MelodySpec, GENERATOR_VERSION};
use crate::rng::SeedStream;
use crate::synth::{ProfileName, Waveshape};
use crate::theory::{ChordSymbol, KeyId, Mode};

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("seed ranges overlap: train/val {train_val:?} and test {test:?}")]
    OverlappingSeedRanges { train_val: Range<u64>, test: Range<u64> },
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error("domain-shift level {0} is outside 0..=11")]
    InvalidLevel(usize),
    #[error("bias level {0} is not one of 0.0, 0.1, ..., 1.0")]
    InvalidBiasLevel(f64),
    #[error("invalid domain schedule: {0}")]
    InvalidSchedule(String),
    #[error("{count} replacements exceed half of the {train_size} training records")]
    ScheduleExceedsHalf { count: usize, train_size: usize },
    #[error("no base records for {timbre}/{split}")]
    MissingManifest { timbre: Waveshape, split: Split },
    #[error("base manifests for {a} and {b} do not list the same seeds")]
    MisalignedTwins { a: String, b: String },
    #[error(transparent)]
    Gen(#[from] GenError),
}

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("unknown {} `{}`", stringify!($name), s)),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

text_enum!(Split { Train => "train", Val => "val", Test => "test" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftRole {
    Clean,
    BiasAligned,
    BiasReverted,
    DomainReplaced,
}

text_enum!(ShiftRole {
    Clean => "clean",
    BiasAligned => "bias_aligned",
    BiasReverted => "bias_reverted",
    DomainReplaced => "domain_replaced",
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordSlot {
    pub symbol: ChordSymbol,
    pub duration: f64,
}

/// One sample of a dataset. `selected` is the selection indicator: only
/// selected records may be written to a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub seed: u64,
    pub label: Mode,
    pub key: KeyId,
    pub timbre: Waveshape,
    pub amplitude: ProfileName,
    pub split: Split,
    pub shift_role: ShiftRole,
    pub selected: bool,
    /// Dataset-relative WAV path.
    pub path: String,
    pub chords: Vec<ChordSlot>,
}

impl SampleRecord {
    pub fn from_spec(spec: &MelodySpec, timbre: Waveshape, amplitude: ProfileName, split: Split) -> Self {
        SampleRecord {
            seed: spec.seed,
            label: spec.label,
            key: spec.key,
            timbre,
            amplitude,
            split,
            shift_role: ShiftRole::Clean,
            selected: true,
            path: wav_rel_path(timbre, split, spec.seed),
            chords: spec
                .chords
                .iter()
                .map(|c| ChordSlot {
                    symbol: c.symbol,
                    duration: c.duration,
                })
                .collect(),
        }
    }

    /// The same melody in another timbre.
    pub fn twin(&self, timbre: Waveshape, role: ShiftRole) -> Self {
        SampleRecord {
            timbre,
            shift_role: role,
            path: wav_rel_path(timbre, self.split, self.seed),
            ..self.clone()
        }
    }
}

/// Even seeds are major, odd seeds minor.
pub fn label_for_seed(seed: u64) -> Mode {
    if seed % 2 == 0 {
        Mode::Major
    } else {
        Mode::Minor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseDatasetConfig {
    pub train_val_start: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_start: u64,
    pub test_size: usize,
    pub timbres: Vec<Waveshape>,
    pub amplitude: ProfileName,
}

impl Default for BaseDatasetConfig {
    fn default() -> Self {
        BaseDatasetConfig {
            train_val_start: 0,
            train_size: 40_000,
            val_size: 10_000,
            test_start: 55_000,
            test_size: 10_000,
            timbres: Waveshape::ALL.to_vec(),
            amplitude: ProfileName::Stable,
        }
    }
}

impl BaseDatasetConfig {
    /// Every seed offset and size divided by `factor`.
    pub fn reduced(factor: usize) -> Self {
        let d = Self::default();
        BaseDatasetConfig {
            train_val_start: d.train_val_start / factor as u64,
            train_size: d.train_size / factor,
            val_size: d.val_size / factor,
            test_start: d.test_start / factor as u64,
            test_size: d.test_size / factor,
            ..d
        }
    }

    pub fn seeds(&self, split: Split) -> Range<u64> {
        let tv = self.train_val_start;
        match split {
            Split::Train => tv..tv + self.train_size as u64,
            Split::Val => tv + self.train_size as u64..tv + (self.train_size + self.val_size) as u64,
            Split::Test => self.test_start..self.test_start + self.test_size as u64,
        }
    }

    pub fn validate(&self) -> Result<(), ShiftError> {
        let train_val = self.seeds(Split::Train).start..self.seeds(Split::Val).end;
        let test = self.seeds(Split::Test);
        let disjoint = train_val.is_empty()
            || test.is_empty()
            || train_val.end <= test.start
            || test.end <= train_val.start;
        if !disjoint {
            return Err(ShiftError::OverlappingSeedRanges { train_val, test });
        }
        for (name, n) in [("train", self.train_size), ("val", self.val_size), ("test", self.test_size)] {
            if n % 2 != 0 {
                return Err(ShiftError::InvalidConfig(format!(
                    "{name} size {n} must be even to balance labels"
                )));
            }
        }
        let mut t = self.timbres.clone();
        t.sort();
        t.dedup();
        if t.len() != self.timbres.len() || t.is_empty() {
            return Err(ShiftError::InvalidConfig("timbres must be a non-empty set".into()));
        }
        Ok(())
    }
}

/// Bias strength on the 11-point grid, stored in tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BiasLevel(u8);

impl BiasLevel {
    pub fn from_tenths(tenths: u8) -> Result<Self, ShiftError> {
        if tenths <= 10 {
            Ok(BiasLevel(tenths))
        } else {
            Err(ShiftError::InvalidBiasLevel(tenths as f64 / 10.0))
        }
    }

    pub fn new(p: f64) -> Result<Self, ShiftError> {
        let t = (p * 10.0).round();
        if (p * 10.0 - t).abs() > 1e-9 || !(0.0..=10.0).contains(&t) {
            return Err(ShiftError::InvalidBiasLevel(p));
        }
        Ok(BiasLevel(t as u8))
    }

    pub fn grid() -> impl Iterator<Item = BiasLevel> {
        (0..=10).map(BiasLevel)
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    /// `round(p * n)`, computed in integers.
    pub fn count_of(self, n: usize) -> usize {
        (self.0 as usize * n + 5) / 10
    }
}

impl fmt::Display for BiasLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasMap {
    pub major: Waveshape,
    pub minor: Waveshape,
}

impl Default for BiasMap {
    fn default() -> Self {
        BiasMap {
            major: Waveshape::Sine,
            minor: Waveshape::Square,
        }
    }
}

impl BiasMap {
    pub fn timbre_for(&self, label: Mode) -> Waveshape {
        match label {
            Mode::Major => self.major,
            Mode::Minor => self.minor,
        }
    }

    pub fn reverted(&self) -> BiasMap {
        BiasMap {
            major: self.minor,
            minor: self.major,
        }
    }
}

/// How timbres are assigned to records outside the biased fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasRemainder {
    /// Exactly half of each label's remainder per timbre (odd counts give
    /// the extra record to the major-mapped timbre).
    #[default]
    Balanced,
    /// An independent fair coin per record.
    Bernoulli,
}

pub const DEFAULT_DOMAIN_SCHEDULE: [usize; 12] =
    [0, 2, 8, 32, 128, 512, 1_024, 2_048, 4_096, 8_192, 16_384, 20_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    /// Square-replacement counts for levels 0..=11. When absent, the default
    /// schedule is clamped to half the training size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_schedule: Option<Vec<usize>>,
    pub bias_map: BiasMap,
    pub remainder: BiasRemainder,
    pub shuffle_seed: u64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            domain_schedule: None,
            bias_map: BiasMap::default(),
            remainder: BiasRemainder::Balanced,
            shuffle_seed: 20_240_901,
        }
    }
}

impl ShiftConfig {
    /// Resolved and checked schedule for a training set of `train_size`.
    pub fn schedule(&self, train_size: usize) -> Result<Vec<usize>, ShiftError> {
        let half = train_size / 2;
        let schedule = match &self.domain_schedule {
            Some(s) => s.clone(),
            None => {
                let mut s: Vec<usize> = DEFAULT_DOMAIN_SCHEDULE.iter().map(|&c| c.min(half)).collect();
                s[11] = half;
                s
            }
        };
        if schedule.len() != 12 {
            return Err(ShiftError::InvalidSchedule(format!(
                "expected 12 counts, got {}",
                schedule.len()
            )));
        }
        if schedule[0] != 0 {
            return Err(ShiftError::InvalidSchedule("level 0 must have no replacements".into()));
        }
        if schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(ShiftError::InvalidSchedule("counts must be nondecreasing".into()));
        }
        if let Some(&count) = schedule.iter().find(|&&c| c > half) {
            return Err(ShiftError::ScheduleExceedsHalf { count, train_size });
        }
        if schedule[11] != half {
            return Err(ShiftError::InvalidSchedule(format!(
                "level 11 must reach {half} (half the training set)"
            )));
        }
        Ok(schedule)
    }
}

// Stream tags keep the shuffles of different constructions independent.
const TAG_DOMAIN: u64 = 1;
const TAG_TRAIN_BIAS: u64 = 2;
const TAG_TEST_BIAS: u64 = 3;
const TAG_ANTI_BIAS: u64 = 4;

/// Symbolic base records for every configured timbre and split.
#[derive(Debug, Clone)]
pub struct BaseDataset {
    pub config: ProjectConfig,
    records: BTreeMap<(Waveshape, Split), Vec<SampleRecord>>,
}

pub fn build_base_dataset(config: &ProjectConfig) -> Result<BaseDataset, ShiftError> {
    config
        .validate()
        .map_err(|e| ShiftError::InvalidConfig(e.to_string()))?;
    let base = &config.base;
    let mut records = BTreeMap::new();
    for split in Split::ALL {
        let specs = base
            .seeds(split)
            .map(|seed| generate_melody(seed, label_for_seed(seed), &config.gen))
            .collect::<Result<Vec<_>, _>>()?;
        for &timbre in &base.timbres {
            let rows = specs
                .iter()
                .map(|s| SampleRecord::from_spec(s, timbre, base.amplitude, split))
                .collect();
            records.insert((timbre, split), rows);
        }
    }
    Ok(BaseDataset {
        config: config.clone(),
        records,
    })
}

impl BaseDataset {
    /// Reassembles a base dataset from manifests read back from disk. Every
    /// `(timbre, split)` must cover the same seeds across timbres.
    pub fn from_manifests(config: ProjectConfig, manifests: Vec<DatasetManifest>) -> Result<Self, ShiftError> {
        let mut records: BTreeMap<(Waveshape, Split), Vec<SampleRecord>> = BTreeMap::new();
        for m in manifests {
            for r in m.records {
                records.entry((r.timbre, r.split)).or_default().push(r);
            }
        }
        for rows in records.values_mut() {
            rows.sort_by_key(|r| r.seed);
        }
        for split in Split::ALL {
            let mut reference: Option<(Waveshape, Vec<u64>)> = None;
            for ((timbre, _), rows) in records.iter().filter(|((_, s), _)| *s == split) {
                let seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
                match &reference {
                    None => reference = Some((*timbre, seeds)),
                    Some((t0, s0)) if *s0 != seeds => {
                        return Err(ShiftError::MisalignedTwins {
                            a: format!("{t0}/{split}"),
                            b: format!("{timbre}/{split}"),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(BaseDataset { config, records })
    }

    pub fn records(&self, timbre: Waveshape, split: Split) -> Result<&[SampleRecord], ShiftError> {
        self.records
            .get(&(timbre, split))
            .map(Vec::as_slice)
            .ok_or(ShiftError::MissingManifest { timbre, split })
    }

    pub fn keys(&self) -> impl Iterator<Item = (Waveshape, Split)> + '_ {
        self.records.keys().copied()
    }

    pub fn header(&self, kind: &str) -> ManifestHeader {
        ManifestHeader::new(GENERATOR_VERSION, &self.config.hash())
            .with("config", self.config.canonical_json())
            .with("kind", kind)
    }

    pub fn manifest(&self, timbre: Waveshape, split: Split) -> Result<DatasetManifest, ShiftError> {
        let header = self
            .header("base")
            .with("timbre", timbre)
            .with("split", split);
        Ok(DatasetManifest::new(header, self.records(timbre, split)?.to_vec()))
    }
}

/// Picks, per record of `template`, which timbre it takes and with which
/// role. Per label, a seeded shuffle fixes an order; the first `round(p*n)`
/// records follow `map`, the rest are split between the two mapped timbres.
fn bias_plan(
    template: &[SampleRecord],
    level: BiasLevel,
    map: BiasMap,
    biased_role: ShiftRole,
    remainder: BiasRemainder,
    shuffle_seed: u64,
    tag: u64,
) -> Vec<(Waveshape, ShiftRole)> {
    let mut plan = vec![(map.major, ShiftRole::Clean); template.len()];
    for (label_bit, label) in Mode::BOTH.into_iter().enumerate() {
        let mut order: Vec<usize> = (0..template.len())
            .filter(|&i| template[i].label == label)
            .collect();
        let mut rng = SeedStream::derived(shuffle_seed, tag * 2 + label_bit as u64);
        rng.shuffle(&mut order);
        let biased = level.count_of(order.len());
        for &i in &order[..biased] {
            plan[i] = (map.timbre_for(label), biased_role);
        }
        let coin_sides = [map.major, map.minor];
        for (j, &i) in order[biased..].iter().enumerate() {
            let side = match remainder {
                BiasRemainder::Balanced => j % 2,
                BiasRemainder::Bernoulli => rng.index(2),
            };
            plan[i] = (coin_sides[side], ShiftRole::Clean);
        }
    }
    plan
}

/// Materializes a plan by picking each record's twin in the planned timbre.
fn apply_plan(
    base: &BaseDataset,
    split: Split,
    plan: &[(Waveshape, ShiftRole)],
) -> Result<Vec<SampleRecord>, ShiftError> {
    plan.iter()
        .enumerate()
        .map(|(i, &(timbre, role))| {
            let src = &base.records(timbre, split)?[i];
            Ok(SampleRecord {
                shift_role: role,
                ..src.clone()
            })
        })
        .collect()
}

/// Training set at domain-shift `level`: the sine training set with the
/// first `schedule[level]` records of a fixed shuffle swapped for their
/// square twins. Levels are nested.
pub fn build_domain_shift(level: usize, base: &BaseDataset) -> Result<DatasetManifest, ShiftError> {
    if level > 11 {
        return Err(ShiftError::InvalidLevel(level));
    }
    let sine = base.records(Waveshape::Sine, Split::Train)?;
    base.records(Waveshape::Square, Split::Train)?;
    let schedule = base.config.shift.schedule(sine.len())?;
    let count = schedule[level];

    let mut order: Vec<usize> = (0..sine.len()).collect();
    SeedStream::derived(base.config.shift.shuffle_seed, TAG_DOMAIN).shuffle(&mut order);
    let mut plan = vec![(Waveshape::Sine, ShiftRole::Clean); sine.len()];
    for &i in &order[..count] {
        plan[i] = (Waveshape::Square, ShiftRole::DomainReplaced);
    }
    let records = apply_plan(base, Split::Train, &plan)?;
    let header = base
        .header("domain_shift")
        .with("level", level)
        .with("replaced", count)
        .with("schedule", format!("{schedule:?}"));
    Ok(DatasetManifest::new(header, records))
}

/// Training set at selection-bias level `p`.
pub fn build_selection_bias(level: BiasLevel, base: &BaseDataset) -> Result<DatasetManifest, ShiftError> {
    let shift = &base.config.shift;
    let template = base.records(shift.bias_map.major, Split::Train)?;
    base.records(shift.bias_map.minor, Split::Train)?;
    let plan = bias_plan(
        template,
        level,
        shift.bias_map,
        ShiftRole::BiasAligned,
        shift.remainder,
        shift.shuffle_seed,
        TAG_TRAIN_BIAS,
    );
    let records = apply_plan(base, Split::Train, &plan)?;
    let header = base.header("selection_bias").with("p", level);
    Ok(DatasetManifest::new(header, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    InDistribution,
    Neutral,
    AntiBias,
    SquareDomain,
    UnseenTimbre,
}

text_enum!(SuiteKind {
    InDistribution => "in_distribution",
    Neutral => "neutral",
    AntiBias => "anti_bias",
    SquareDomain => "square_domain",
    UnseenTimbre => "unseen_timbre",
});

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub kind: SuiteKind,
    pub manifest: DatasetManifest,
}

impl TestSuite {
    pub fn records(&self) -> &[SampleRecord] {
        &self.manifest.records
    }
}

fn suite(base: &BaseDataset, kind: SuiteKind, p: Option<BiasLevel>, records: Vec<SampleRecord>) -> TestSuite {
    let mut header = base.header("test_suite").with("suite", kind);
    if let Some(p) = p {
        header = header.with("p", p);
    }
    TestSuite {
        kind,
        manifest: DatasetManifest::new(header, records),
    }
}

/// In-distribution, neutral and anti-bias test suites for bias level `p`.
/// The in-distribution suite at `p = 0` coincides with the neutral suite.
pub fn build_test_suites(level: BiasLevel, base: &BaseDataset) -> Result<[TestSuite; 3], ShiftError> {
    let shift = &base.config.shift;
    let map = shift.bias_map;
    let template = base.records(map.major, Split::Test)?;
    base.records(map.minor, Split::Test)?;
    let plan = |level, map: BiasMap, role, tag| {
        bias_plan(template, level, map, role, shift.remainder, shift.shuffle_seed, tag)
    };
    let zero = BiasLevel(0);
    let in_dist = plan(level, map, ShiftRole::BiasAligned, TAG_TEST_BIAS);
    let neutral = plan(zero, map, ShiftRole::BiasAligned, TAG_TEST_BIAS);
    let anti = plan(level, map.reverted(), ShiftRole::BiasReverted, TAG_ANTI_BIAS);
    Ok([
        suite(base, SuiteKind::InDistribution, Some(level), apply_plan(base, Split::Test, &in_dist)?),
        suite(base, SuiteKind::Neutral, None, apply_plan(base, Split::Test, &neutral)?),
        suite(base, SuiteKind::AntiBias, Some(level), apply_plan(base, Split::Test, &anti)?),
    ])
}

/// The square test set, for evaluating domain-shift models.
pub fn build_square_domain_suite(base: &BaseDataset) -> Result<TestSuite, ShiftError> {
    let records = base.records(Waveshape::Square, Split::Test)?.to_vec();
    Ok(suite(base, SuiteKind::SquareDomain, None, records))
}

/// Sawtooth and triangle test sets together, ordered by seed.
pub fn build_unseen_timbre_suite(base: &BaseDataset) -> Result<TestSuite, ShiftError> {
    let mut records: Vec<SampleRecord> = [Waveshape::Sawtooth, Waveshape::Triangle]
        .into_iter()
        .map(|t| base.records(t, Split::Test).map(<[_]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    records.sort_by_key(|r| (r.seed, r.timbre));
    Ok(suite(base, SuiteKind::UnseenTimbre, None, records))
}

/// Counts and timbre/label association of a record set.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSummary {
    pub total: usize,
    pub major: usize,
    pub by_timbre: BTreeMap<Waveshape, usize>,
    pub by_role: BTreeMap<ShiftRole, usize>,
    /// P(timbre = major-mapped | major) and P(timbre = major-mapped | minor).
    pub p_major_timbre_given_major: f64,
    pub p_major_timbre_given_minor: f64,
    /// Phi coefficient between "is major" and "has the major-mapped timbre".
    pub timbre_label_correlation: f64,
}

pub fn summarize(records: &[SampleRecord], map: BiasMap) -> ShiftSummary {
    let mut by_timbre = BTreeMap::new();
    let mut by_role = BTreeMap::new();
    // [label is major][timbre is map.major]
    let mut table = [[0usize; 2]; 2];
    for r in records {
        *by_timbre.entry(r.timbre).or_insert(0) += 1;
        *by_role.entry(r.shift_role).or_insert(0) += 1;
        table[(r.label == Mode::Major) as usize][(r.timbre == map.major) as usize] += 1;
    }
    let major = table[1][0] + table[1][1];
    let minor = table[0][0] + table[0][1];
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let col1 = table[0][1] + table[1][1];
    let col0 = table[0][0] + table[1][0];
    let denom = (major as f64 * minor as f64 * col1 as f64 * col0 as f64).sqrt();
    let num = table[1][1] as f64 * table[0][0] as f64 - table[1][0] as f64 * table[0][1] as f64;
    ShiftSummary {
        total: records.len(),
        major,
        by_timbre,
        by_role,
        p_major_timbre_given_major: ratio(table[1][1], major),
        p_major_timbre_given_minor: ratio(table[0][1], minor),
        timbre_label_correlation: if denom == 0.0 { 0.0 } else { num / denom },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ProjectConfig {
        ProjectConfig {
            base: BaseDatasetConfig {
                train_size: 40,
                val_size: 10,
                test_start: 60,
                test_size: 20,
                ..BaseDatasetConfig::default()
            },
            ..ProjectConfig::default()
        }
    }

    #[test]
    fn bias_level_grid() {
        assert_eq!(BiasLevel::new(0.7).unwrap().tenths(), 7);
        assert_eq!(BiasLevel::new(0.7).unwrap().to_string(), "0.7");
        assert_eq!(BiasLevel::new(1.0).unwrap().to_string(), "1.0");
        assert!(BiasLevel::new(0.75).is_err());
        assert!(BiasLevel::new(1.1).is_err());
        assert!(BiasLevel::new(-0.1).is_err());
        assert_eq!(BiasLevel::grid().count(), 11);
        assert_eq!(BiasLevel::new(0.4).unwrap().count_of(40_000), 16_000);
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let cfg = BaseDatasetConfig {
            test_start: 49_000,
            ..BaseDatasetConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(ShiftError::OverlappingSeedRanges { .. })));
        let odd = BaseDatasetConfig {
            train_size: 41,
            ..BaseDatasetConfig::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn reduced_config_ranges() {
        let r = BaseDatasetConfig::reduced(100);
        assert_eq!(r.seeds(Split::Train), 0..400);
        assert_eq!(r.seeds(Split::Val), 400..500);
        assert_eq!(r.seeds(Split::Test), 550..650);
    }

    #[test]
    fn schedules() {
        let s = ShiftConfig::default();
        assert_eq!(s.schedule(40_000).unwrap(), DEFAULT_DOMAIN_SCHEDULE.to_vec());
        let small = s.schedule(400).unwrap();
        assert_eq!(small[..5], [0, 2, 8, 32, 128]);
        assert_eq!(small[11], 200);
        let bad = ShiftConfig {
            domain_schedule: Some(vec![0, 2, 8, 32, 128, 512, 1_024, 2_048, 4_096, 8_192, 16_384, 20_002]),
            ..ShiftConfig::default()
        };
        assert!(matches!(bad.schedule(40_000), Err(ShiftError::ScheduleExceedsHalf { .. })));
        let decreasing = ShiftConfig {
            domain_schedule: Some(vec![0, 4, 2, 32, 128, 512, 1_024, 2_048, 4_096, 8_192, 16_384, 20_000]),
            ..ShiftConfig::default()
        };
        assert!(decreasing.schedule(40_000).is_err());
    }

    #[test]
    fn twins_share_melodies() {
        let base = build_base_dataset(&small_config()).unwrap();
        let sine = base.records(Waveshape::Sine, Split::Train).unwrap();
        let tri = base.records(Waveshape::Triangle, Split::Train).unwrap();
        for (a, b) in sine.iter().zip(tri) {
            assert_eq!((a.seed, a.key, &a.chords), (b.seed, b.key, &b.chords));
            assert_ne!(a.path, b.path);
        }
    }

    #[test]
    fn domain_levels_are_nested() {
        let base = build_base_dataset(&small_config()).unwrap();
        let replaced = |level| -> Vec<u64> {
            build_domain_shift(level, &base)
                .unwrap()
                .records
                .iter()
                .filter(|r| r.timbre == Waveshape::Square)
                .map(|r| r.seed)
                .collect()
        };
        let mut prev: Vec<u64> = Vec::new();
        for level in 0..12 {
            let now = replaced(level);
            assert!(prev.iter().all(|s| now.contains(s)));
            prev = now;
        }
        assert_eq!(prev.len(), 20);
        assert!(matches!(build_domain_shift(12, &base), Err(ShiftError::InvalidLevel(12))));
    }

    #[test]
    fn bernoulli_remainder_keeps_labels() {
        let mut cfg = small_config();
        cfg.shift.remainder = BiasRemainder::Bernoulli;
        let base = build_base_dataset(&cfg).unwrap();
        let m = build_selection_bias(BiasLevel::new(0.5).unwrap(), &base).unwrap();
        let s = summarize(&m.records, cfg.shift.bias_map);
        assert_eq!(s.major * 2, s.total);
        assert_eq!(s.by_role[&ShiftRole::BiasAligned], 20);
    }

    #[test]
    fn missing_timbre_is_reported() {
        let mut cfg = small_config();
        cfg.base.timbres = vec![Waveshape::Sine];
        let base = build_base_dataset(&cfg).unwrap();
        assert!(matches!(
            build_domain_shift(1, &base),
            Err(ShiftError::MissingManifest {
                timbre: Waveshape::Square,
                ..
            })
        ));
        assert!(build_unseen_timbre_suite(&base).is_err());
    }

    #[test]
    fn summary_correlation_extremes() {
        let base = build_base_dataset(&small_config()).unwrap();
        let full = build_selection_bias(BiasLevel::new(1.0).unwrap(), &base).unwrap();
        let s = summarize(&full.records, BiasMap::default());
        assert!((s.timbre_label_correlation - 1.0).abs() < 1e-12);
        let [_, neutral, anti] = build_test_suites(BiasLevel::new(1.0).unwrap(), &base).unwrap();
        assert_eq!(summarize(neutral.records(), BiasMap::default()).timbre_label_correlation, 0.0);
        let a = summarize(anti.records(), BiasMap::default());
        assert!((a.timbre_label_correlation + 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_manifests_rejects_misaligned() {
        let base = build_base_dataset(&small_config()).unwrap();
        let a = base.manifest(Waveshape::Sine, Split::Train).unwrap();
        let mut b = base.manifest(Waveshape::Square, Split::Train).unwrap();
        b.records.pop();
        assert!(matches!(
            BaseDataset::from_manifests(base.config.clone(), vec![a.clone(), b]),
            Err(ShiftError::MisalignedTwins { .. })
        ));
        let b = base.manifest(Waveshape::Square, Split::Train).unwrap();
        let rebuilt = BaseDataset::from_manifests(base.config.clone(), vec![b, a]).unwrap();
        assert_eq!(
            build_domain_shift(3, &rebuilt).unwrap(),
            build_domain_shift(3, &base).unwrap()
        );
    }
}
