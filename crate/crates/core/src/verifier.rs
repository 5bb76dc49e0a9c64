//! Symbolic and spectral checks that a melody carries its labeled key.
//!
//! The spectral path folds the energy (squared magnitude) spectrum of the
//! whole clip into twelve pitch-class bins. Plain magnitudes would let the
//! broadband skirts of short chord segments outweigh the partials. A
//! spectrum bin counts toward pitch class `pc`
//! when it lies within 50 cents of `pc` in one of octaves 2 to 6 of the
//! tuning table; everything else is ignored. Keys are then scored against
//! the chroma vector, by default with binary scale-membership templates:
//! the score of a key is the chroma mass on its seven scale degrees.
//!
//! With [`ChromaOptions::harmonic_weighting`] on, the folded energy is first
//! collected per semitone band. A band whose interval above a louder-or-equal
//! lower band matches harmonic `k` (2..=16, rounded to the semitone) is
//! treated as an overtone of the lowest such band and weighted by `1/k`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::melodygen::{generate_melody, nearest_pitch_class, GenConfig, MelodySpec};
use crate::shiftlab::SampleRecord;
use crate::synth::{AudioClip, Waveshape};
use crate::theory::{build_scale, chord_pitch_classes, pitch_frequency, ChordSymbol, KeyId, Mode, PitchClass};

pub const CHROMA_OCTAVES: std::ops::RangeInclusive<i32> = 2..=6;
const BIN_HALF_WIDTH_CENTS: f64 = 50.0;
const MAX_HARMONIC: usize = 16;
/// Bands below this fraction of the loudest band are ignored by the
/// overtone tracker.
const TRACKER_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("clip is silent")]
    Silent,
    #[error("clip is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    KeyModeMismatch { key: KeyId, label: Mode },
    ChordNotInMode { index: usize, symbol: ChordSymbol },
    OutOfScale { index: usize, pitch_class: PitchClass },
    SpellingMismatch { index: usize, symbol: ChordSymbol },
    MissingCadence(ChordSymbol),
    ChordCount(usize),
    Duration { index: usize, seconds: f64 },
    Frequency { index: usize, hz: f64 },
    Repeats { repeats: u32, pass_seconds: f64 },
    /// A manifest row disagrees with the spec regenerated from its seed.
    ManifestMismatch { field: &'static str },
    Unregenerable(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KeyModeMismatch { key, label } => write!(f, "key {key} disagrees with label {label}"),
            Violation::ChordNotInMode { index, symbol } => write!(f, "chord {index} ({symbol}) is not in the mode"),
            Violation::OutOfScale { index, pitch_class } => {
                write!(f, "chord {index} sounds {pitch_class}, outside the scale")
            }
            Violation::SpellingMismatch { index, symbol } => {
                write!(f, "chord {index} notes do not spell {symbol}")
            }
            Violation::MissingCadence(symbol) => write!(f, "cadence chord {symbol} missing"),
            Violation::ChordCount(n) => write!(f, "{n} chords is not an allowed count"),
            Violation::Duration { index, seconds } => write!(f, "chord {index} lasts {seconds} s"),
            Violation::Frequency { index, hz } => write!(f, "chord {index} has a note at {hz} Hz, out of range"),
            Violation::Repeats { repeats, pass_seconds } => {
                write!(f, "{repeats} repeats of a {pass_seconds} s pass is not the minimal cover")
            }
            Violation::ManifestMismatch { field } => write!(f, "manifest {field} differs from the regenerated spec"),
            Violation::Unregenerable(why) => write!(f, "cannot regenerate spec: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicReport {
    pub seed: u64,
    pub violations: Vec<Violation>,
}

impl SymbolicReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a spec against the generator's postconditions under `config`.
pub fn verify_symbolic(spec: &MelodySpec, config: &GenConfig) -> SymbolicReport {
    let mut v = Vec::new();
    let mode = spec.label;
    if spec.key.mode != mode {
        v.push(Violation::KeyModeMismatch {
            key: spec.key,
            label: mode,
        });
    }
    let scale = build_scale(spec.key);
    if !config.chord_counts.contains(&spec.chords.len()) {
        v.push(Violation::ChordCount(spec.chords.len()));
    }
    for (index, chord) in spec.chords.iter().enumerate() {
        if !chord.symbol.is_allowed_in(mode) {
            v.push(Violation::ChordNotInMode {
                index,
                symbol: chord.symbol,
            });
        }
        let sounded: Vec<PitchClass> = chord.frequencies.iter().map(|&f| nearest_pitch_class(f)).collect();
        for &pitch_class in &sounded {
            if !scale.contains(pitch_class) {
                v.push(Violation::OutOfScale { index, pitch_class });
            }
        }
        if chord_pitch_classes(&scale, chord.symbol).ok().as_deref() != Some(&sounded[..]) {
            v.push(Violation::SpellingMismatch {
                index,
                symbol: chord.symbol,
            });
        }
        if !config.duration_range.contains(chord.duration) {
            v.push(Violation::Duration {
                index,
                seconds: chord.duration,
            });
        }
        for &hz in &chord.frequencies {
            if !config.freq_range.contains(hz) {
                v.push(Violation::Frequency { index, hz });
            }
        }
    }
    for required in ChordSymbol::cadence(mode) {
        let seventh = required.seventh_of(mode);
        if !spec
            .chords
            .iter()
            .any(|c| c.symbol == required || Some(c.symbol) == seventh)
        {
            v.push(Violation::MissingCadence(required));
        }
    }
    let pass = spec.pass_duration();
    let covers = |r: u32| pass * r as f64 >= config.target_seconds;
    if !covers(spec.repeats) || (spec.repeats > 1 && covers(spec.repeats - 1)) {
        v.push(Violation::Repeats {
            repeats: spec.repeats,
            pass_seconds: pass,
        });
    }
    SymbolicReport {
        seed: spec.seed,
        violations: v,
    }
}

/// Regenerates the spec behind a manifest row, checks that the row matches
/// it, then checks the spec itself.
pub fn verify_record(record: &SampleRecord, config: &GenConfig) -> SymbolicReport {
    let spec = match generate_melody(record.seed, record.label, config) {
        Ok(s) => s,
        Err(e) => {
            return SymbolicReport {
                seed: record.seed,
                violations: vec![Violation::Unregenerable(e.to_string())],
            }
        }
    };
    let mut report = verify_symbolic(&spec, config);
    if spec.key != record.key {
        report.violations.push(Violation::ManifestMismatch { field: "key" });
    }
    let same_chords = spec.chords.len() == record.chords.len()
        && spec
            .chords
            .iter()
            .zip(&record.chords)
            .all(|(c, r)| c.symbol == r.symbol && c.duration == r.duration);
    if !same_chords {
        report.violations.push(Violation::ManifestMismatch { field: "chords" });
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChromaOptions {
    pub harmonic_weighting: bool,
}

/// Twelve nonnegative energies indexed by pitch class, summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaVector(pub [f64; 12]);

impl ChromaVector {
    pub fn get(&self, pc: PitchClass) -> f64 {
        self.0[pc.index()]
    }

    /// Pitch classes ordered by decreasing energy.
    pub fn ranked(&self) -> Vec<PitchClass> {
        let mut pcs: Vec<PitchClass> = PitchClass::all().collect();
        pcs.sort_by(|a, b| self.get(*b).total_cmp(&self.get(*a)));
        pcs
    }
}

/// Semitone band (relative to C2) of a frequency, if it lies inside the
/// chroma range and within the cent tolerance of a table pitch.
fn band_of(freq: f64) -> Option<usize> {
    let c4 = PitchClass::C.octave4_frequency();
    let semis = (12.0 * (freq / c4).log2()).round() as i32;
    let pc = PitchClass::C.transpose(semis);
    let octave = 4 + semis.div_euclid(12);
    if !CHROMA_OCTAVES.contains(&octave) {
        return None;
    }
    let center = pitch_frequency(pc, octave);
    if (1200.0 * (freq / center).log2()).abs() >= BIN_HALF_WIDTH_CENTS {
        return None;
    }
    Some(((octave - CHROMA_OCTAVES.start()) * 12) as usize + pc.index())
}

/// Spectral energy per semitone band over octaves 2 to 6.
pub fn band_energies(clip: &AudioClip) -> Result<Vec<f64>, VerifyError> {
    let n = clip.samples.len();
    if n == 0 {
        return Err(VerifyError::Empty);
    }
    if clip.samples.iter().all(|&s| s == 0.0) {
        return Err(VerifyError::Silent);
    }
    let mut buf: Vec<Complex<f64>> = clip.samples.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let octaves = (CHROMA_OCTAVES.end() - CHROMA_OCTAVES.start() + 1) as usize;
    let mut bands = vec![0.0; 12 * octaves];
    let bin_hz = clip.sample_rate as f64 / n as f64;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        if let Some(b) = band_of(k as f64 * bin_hz) {
            bands[b] += c.norm_sqr();
        }
    }
    Ok(bands)
}

fn harmonic_weights(bands: &[f64]) -> Vec<f64> {
    let peak = bands.iter().cloned().fold(0.0, f64::max);
    let active: Vec<bool> = bands.iter().map(|&e| e >= TRACKER_FLOOR * peak && e > 0.0).collect();
    let intervals: Vec<(usize, usize)> = (2..=MAX_HARMONIC)
        .map(|k| ((12.0 * (k as f64).log2()).round() as usize, k))
        .collect();
    let mut weights = vec![1.0; bands.len()];
    let mut fundamental = vec![false; bands.len()];
    for b in 0..bands.len() {
        if !active[b] {
            continue;
        }
        let rank = intervals
            .iter()
            .rev()
            .filter(|(d, _)| *d <= b)
            .find(|(d, _)| fundamental[b - d] && bands[b - d] >= bands[b])
            .map(|&(_, k)| k);
        match rank {
            Some(k) => weights[b] = 1.0 / k as f64,
            None => fundamental[b] = true,
        }
    }
    weights
}

pub fn chroma_with(clip: &AudioClip, options: ChromaOptions) -> Result<ChromaVector, VerifyError> {
    let bands = band_energies(clip)?;
    let weights = if options.harmonic_weighting {
        harmonic_weights(&bands)
    } else {
        vec![1.0; bands.len()]
    };
    let mut bins = [0.0; 12];
    for (b, (e, w)) in bands.iter().zip(&weights).enumerate() {
        bins[b % 12] += e * w;
    }
    let total: f64 = bins.iter().sum();
    if !(total > 0.0) {
        return Err(VerifyError::Silent);
    }
    bins.iter_mut().for_each(|x| *x /= total);
    Ok(ChromaVector(bins))
}

pub fn chroma(clip: &AudioClip) -> Result<ChromaVector, VerifyError> {
    chroma_with(clip, ChromaOptions::default())
}

/// How keys are scored against a chroma vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyScorer {
    /// Chroma mass on the key's seven scale degrees.
    #[default]
    ScaleMembership,
    /// Pearson correlation with the Krumhansl–Kessler probe-tone profiles.
    Krumhansl,
}

const KK_MAJOR: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
const KK_MINOR: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

fn pearson(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    let ma = a.iter().sum::<f64>() / 12.0;
    let mb = b.iter().sum::<f64>() / 12.0;
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma).powi(2);
        vb += (b[i] - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        num / (va * vb).sqrt()
    }
}

impl KeyScorer {
    pub fn score(self, chroma: &ChromaVector, key: KeyId) -> f64 {
        match self {
            KeyScorer::ScaleMembership => build_scale(key).degrees.iter().map(|&pc| chroma.get(pc)).sum(),
            KeyScorer::Krumhansl => {
                let profile = match key.mode {
                    Mode::Major => KK_MAJOR,
                    Mode::Minor => KK_MINOR,
                };
                let mut rotated = [0.0; 12];
                for (i, p) in profile.iter().enumerate() {
                    rotated[(i + key.tonic.index()) % 12] = *p;
                }
                pearson(&chroma.0, &rotated)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyEstimate {
    pub tonic: PitchClass,
    pub mode: Mode,
    pub score: f64,
    /// Best score minus the best score among the other 23 keys.
    pub runner_up_margin: f64,
}

impl KeyEstimate {
    pub fn key(&self) -> KeyId {
        KeyId::new(self.tonic, self.mode)
    }
}

/// Best of the 24 keys. Exact ties go to the earlier key in [`KeyId::all`].
pub fn estimate_key_from_chroma(chroma: &ChromaVector, scorer: KeyScorer) -> KeyEstimate {
    let scored: Vec<(KeyId, f64)> = KeyId::all().map(|k| (k, scorer.score(chroma, k))).collect();
    let mut best = 0;
    for (i, (_, s)) in scored.iter().enumerate() {
        if *s > scored[best].1 {
            best = i;
        }
    }
    let runner_up = scored
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, (_, s))| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let (key, score) = scored[best];
    KeyEstimate {
        tonic: key.tonic,
        mode: key.mode,
        score,
        runner_up_margin: score - runner_up,
    }
}

pub fn estimate_key_with(clip: &AudioClip, options: ChromaOptions, scorer: KeyScorer) -> Result<KeyEstimate, VerifyError> {
    Ok(estimate_key_from_chroma(&chroma_with(clip, options)?, scorer))
}

pub fn estimate_key(clip: &AudioClip) -> Result<KeyEstimate, VerifyError> {
    estimate_key_with(clip, ChromaOptions::default(), KeyScorer::default())
}

/// Outcome of verifying one rendered sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVerdict {
    pub seed: u64,
    pub timbre: Waveshape,
    pub key: KeyId,
    pub symbolic: SymbolicReport,
    /// `None` when the sample was not analyzed spectrally.
    pub spectral: Option<Result<KeyEstimate, VerifyError>>,
}

impl SampleVerdict {
    pub fn mode_match(&self) -> Option<bool> {
        match &self.spectral {
            Some(Ok(e)) => Some(e.mode == self.key.mode),
            Some(Err(_)) => Some(false),
            None => None,
        }
    }

    pub fn key_match(&self) -> Option<bool> {
        match &self.spectral {
            Some(Ok(e)) => Some(e.key() == self.key),
            Some(Err(_)) => Some(false),
            None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimbreAccuracy {
    pub analyzed: usize,
    pub mode_correct: usize,
    pub key_correct: usize,
}

impl TimbreAccuracy {
    pub fn mode_accuracy(&self) -> f64 {
        self.mode_correct as f64 / self.analyzed.max(1) as f64
    }

    pub fn key_accuracy(&self) -> f64 {
        self.key_correct as f64 / self.analyzed.max(1) as f64
    }
}

pub fn accuracy_by_timbre(verdicts: &[SampleVerdict]) -> BTreeMap<Waveshape, TimbreAccuracy> {
    let mut out: BTreeMap<Waveshape, TimbreAccuracy> = BTreeMap::new();
    for v in verdicts {
        if let (Some(mode), Some(key)) = (v.mode_match(), v.key_match()) {
            let acc = out.entry(v.timbre).or_default();
            acc.analyzed += 1;
            acc.mode_correct += mode as usize;
            acc.key_correct += key as usize;
        }
    }
    out
}

/// Line-oriented report: one tab-separated verdict per sample, then the
/// per-timbre accuracy table.
pub fn format_report(verdicts: &[SampleVerdict]) -> String {
    let mut out = String::from("seed\ttimbre\tkey\tsymbolic\testimate\tmode_match\n");
    for v in verdicts {
        let symbolic = if v.symbolic.passed() {
            "pass".to_string()
        } else {
            let reasons: Vec<String> = v.symbolic.violations.iter().map(|x| x.to_string()).collect();
            format!("FAIL: {}", reasons.join("; "))
        };
        let (estimate, matched) = match &v.spectral {
            None => ("-".to_string(), "-"),
            Some(Err(e)) => (format!("error: {e}"), "no"),
            Some(Ok(e)) => (
                format!("{} (margin {:.4})", e.key(), e.runner_up_margin),
                if e.mode == v.key.mode { "yes" } else { "no" },
            ),
        };
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", v.seed, v.timbre, v.key, symbolic, estimate, matched);
    }
    let failures = verdicts.iter().filter(|v| !v.symbolic.passed()).count();
    let _ = writeln!(out, "# symbolic: {} checked, {} failed", verdicts.len(), failures);
    out.push_str("# timbre\tanalyzed\tmode_accuracy\tkey_accuracy\n");
    for (timbre, acc) in accuracy_by_timbre(verdicts) {
        let _ = writeln!(
            out,
            "# {}\t{}\t{:.4}\t{:.4}",
            timbre,
            acc.analyzed,
            acc.mode_accuracy(),
            acc.key_accuracy()
        );
    }
    out
}
