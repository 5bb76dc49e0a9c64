//! Seeded symbolic melody generation.
//!
//! Every melody is a pure function of `(seed, label, config)`. Draws happen in
//! a fixed order on one [`SeedStream`]:
//!
//! 1. tonic, uniform over the 12 pitch classes;
//! 2. chord count `N`, uniform over the configured set;
//! 3. `N` triads, uniform with replacement over the mode's seven;
//! 4. cadence forcing: one position index per missing cadence triad;
//! 5. the seventh coin;
//! 6. per chord, in order: one octave draw per note, then the chord duration.
//!
//! Changing this order changes every dataset, so it is versioned through
//! [`GENERATOR_VERSION`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeedStream;
use crate::theory::{
    build_scale, chord_pitch_classes, ChordSymbol, KeyId, Mode, PitchClass, TheoryError,
};

/// Bumped whenever the draw order or any default changes.
pub const GENERATOR_VERSION: &str = "melodyforge-gen/1";

/// Slack when testing a frequency against [`FreqRange`] bounds. The default
/// bounds are C3 and C5 rounded to 0.01 Hz, so table-derived pitches such as
/// 523.2512 Hz must still count as inside.
pub const RANGE_TOLERANCE_HZ: f64 = 0.005;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("cadence forcing needs at least 3 chords, got {0}")]
    TooFewChords(usize),
    #[error("no power-of-two multiple of {freq} Hz lies in [{min}, {max}] Hz")]
    EmptyOctaveSet { freq: f64, min: f64, max: f64 },
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqRange {
    pub min: f64,
    pub max: f64,
}

impl FreqRange {
    pub fn contains(&self, freq: f64) -> bool {
        freq >= self.min - RANGE_TOLERANCE_HZ && freq <= self.max + RANGE_TOLERANCE_HZ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationRange {
    pub min: f64,
    pub max: f64,
}

impl DurationRange {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.min && t <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub freq_range: FreqRange,
    pub chord_counts: Vec<usize>,
    pub duration_range: DurationRange,
    pub target_seconds: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            freq_range: FreqRange {
                min: 130.81,
                max: 523.25,
            },
            chord_counts: (3..=7).collect(),
            duration_range: DurationRange { min: 0.2, max: 0.9 },
            target_seconds: 4.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidConfig(msg));
        let f = self.freq_range;
        if !(f.min > 0.0 && f.min < f.max && f.max.is_finite()) {
            return bad(format!("frequency range [{}, {}] must satisfy 0 < min < max", f.min, f.max));
        }
        if self.chord_counts.is_empty() {
            return bad("chord count set is empty".into());
        }
        if let Some(&n) = self.chord_counts.iter().find(|&&n| n < 3) {
            return bad(format!("chord count {n} leaves no room for the three cadence triads"));
        }
        if !(self.target_seconds > 0.0 && self.target_seconds.is_finite()) {
            return bad(format!("target duration {} must be positive", self.target_seconds));
        }
        let t = self.duration_range;
        if !(t.min > 0.0 && t.min <= t.max && t.max <= self.target_seconds) {
            return bad(format!(
                "duration range [{}, {}] must lie in (0, {}]",
                t.min, t.max, self.target_seconds
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordEvent {
    pub symbol: ChordSymbol,
    /// Octave-resolved note frequencies, root first.
    pub frequencies: Vec<f64>,
    pub duration: f64,
}

/// Symbolic melody: one pass of chords plus how many times it repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelodySpec {
    pub seed: u64,
    pub label: Mode,
    pub key: KeyId,
    pub chords: Vec<ChordEvent>,
    pub repeats: u32,
}

impl MelodySpec {
    /// Duration of one pass through the chords.
    pub fn pass_duration(&self) -> f64 {
        self.chords.iter().map(|c| c.duration).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.pass_duration() * self.repeats as f64
    }

    pub fn symbols(&self) -> Vec<ChordSymbol> {
        self.chords.iter().map(|c| c.symbol).collect()
    }

    /// Pitch classes sounded anywhere in the melody, recovered from the
    /// frequencies by nearest table pitch.
    pub fn pitch_classes(&self) -> Vec<PitchClass> {
        let mut out: Vec<PitchClass> = self
            .chords
            .iter()
            .flat_map(|c| c.frequencies.iter().map(|&f| nearest_pitch_class(f)))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Folds a frequency onto the closest pitch class of the tuning table.
pub fn nearest_pitch_class(freq: f64) -> PitchClass {
    let ratio = (freq / PitchClass::C.octave4_frequency()).log2();
    let semis = (ratio * 12.0).round() as i32;
    PitchClass::C.transpose(semis)
}

/// Ensures the mode's cadence triads are present by overwriting positions
/// drawn without replacement. Returns the overwritten positions in the order
/// they were drawn.
pub fn force_cadence_chords(
    chords: &mut [ChordSymbol],
    mode: Mode,
    rng: &mut SeedStream,
) -> Result<Vec<usize>, GenError> {
    if chords.len() < 3 {
        return Err(GenError::TooFewChords(chords.len()));
    }
    let required = ChordSymbol::cadence(mode);
    let mut free: Vec<usize> = (0..chords.len()).collect();
    let mut replaced = Vec::new();
    while let Some(missing) = required.iter().find(|c| !chords.contains(c)) {
        // Forced positions leave `free`, so at most three draws happen.
        let pos = free.remove(rng.index(free.len()));
        chords[pos] = *missing;
        replaced.push(pos);
    }
    Ok(replaced)
}

/// Every `freq * 2^k` inside `range`, ascending.
pub fn octave_candidates(freq: f64, range: &FreqRange) -> Vec<f64> {
    if !(freq > 0.0) {
        return Vec::new();
    }
    let lo = (range.min / freq).log2().floor() as i32 - 1;
    let hi = (range.max / freq).log2().ceil() as i32 + 1;
    (lo..=hi)
        .map(|k| freq * 2f64.powi(k))
        .filter(|f| range.contains(*f))
        .collect()
}

pub fn randomize_octaves(freq: f64, range: &FreqRange, rng: &mut SeedStream) -> Result<f64, GenError> {
    let candidates = octave_candidates(freq, range);
    if candidates.is_empty() {
        return Err(GenError::EmptyOctaveSet {
            freq,
            min: range.min,
            max: range.max,
        });
    }
    Ok(candidates[rng.index(candidates.len())])
}

pub fn generate_melody(seed: u64, label: Mode, config: &GenConfig) -> Result<MelodySpec, GenError> {
    config.validate()?;
    let mut rng = SeedStream::new(seed);

    let tonic = PitchClass::new(rng.index(12) as u8)?;
    let key = KeyId::new(tonic, label);
    let scale = build_scale(key);

    let n = config.chord_counts[rng.index(config.chord_counts.len())];
    let triads = ChordSymbol::triads(label);
    let mut symbols: Vec<ChordSymbol> = (0..n).map(|_| triads[rng.index(triads.len())]).collect();

    force_cadence_chords(&mut symbols, label, &mut rng)?;

    if rng.coin() {
        for sym in symbols.iter_mut() {
            if let Some(seventh) = sym.seventh_of(label) {
                *sym = seventh;
            }
        }
    }

    let mut chords = Vec::with_capacity(n);
    for symbol in symbols {
        let frequencies = chord_pitch_classes(&scale, symbol)?
            .into_iter()
            .map(|pc| randomize_octaves(pc.octave4_frequency(), &config.freq_range, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let duration = rng.uniform(config.duration_range.min, config.duration_range.max);
        chords.push(ChordEvent {
            symbol,
            frequencies,
            duration,
        });
    }

    let pass: f64 = chords.iter().map(|c| c.duration).sum();
    let mut repeats = (config.target_seconds / pass).ceil().max(1.0) as u32;
    while pass * (repeats as f64) < config.target_seconds {
        repeats += 1;
    }

    Ok(MelodySpec {
        seed,
        label,
        key,
        chords,
        repeats,
    })
}
