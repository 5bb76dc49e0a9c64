//! Equal-temperament tuning, major / harmonic-minor scales and the chord
//! vocabulary the melody generator draws from.
//!
//! Pitch classes are stored by index (C = 0) and always rendered with flat
//! spellings, so the raised seventh of A minor prints as `Ab`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("pitch class index {0} is outside 0..12")]
    InvalidPitchClass(u8),
    #[error("unknown pitch class name `{0}`")]
    UnknownPitchName(String),
    #[error("chord {symbol} is not part of the {mode} vocabulary")]
    ChordNotInMode { symbol: ChordSymbol, mode: Mode },
    #[error("chord {symbol} in {key} spells as {found:?}, not the annotated quality")]
    QualityMismatch {
        symbol: ChordSymbol,
        key: KeyId,
        found: Option<(Quality, Extension)>,
    },
    #[error("cannot parse chord symbol `{0}`")]
    ParseChord(String),
    #[error("cannot parse mode `{0}`")]
    ParseMode(String),
}

/// Fourth-octave concert pitch table (A4 = 440 Hz), indexed by pitch class.
pub const OCTAVE4_FREQUENCIES: [f64; 12] = [
    261.6256, 277.1826, 293.6648, 311.1270, 329.6276, 349.2282, 369.9944, 391.9954, 415.3047,
    440.0000, 466.1638, 493.8833,
];

const NAMES: [&str; 12] = [
    "C", "Db", "D", "Eb", "E", "F", "Gb", "G", "Ab", "A", "Bb", "B",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);
    pub const DB: PitchClass = PitchClass(1);
    pub const D: PitchClass = PitchClass(2);
    pub const EB: PitchClass = PitchClass(3);
    pub const E: PitchClass = PitchClass(4);
    pub const F: PitchClass = PitchClass(5);
    pub const GB: PitchClass = PitchClass(6);
    pub const G: PitchClass = PitchClass(7);
    pub const AB: PitchClass = PitchClass(8);
    pub const A: PitchClass = PitchClass(9);
    pub const BB: PitchClass = PitchClass(10);
    pub const B: PitchClass = PitchClass(11);

    pub fn new(index: u8) -> Result<Self, TheoryError> {
        if index < 12 {
            Ok(PitchClass(index))
        } else {
            Err(TheoryError::InvalidPitchClass(index))
        }
    }

    pub fn all() -> impl Iterator<Item = PitchClass> {
        (0..12).map(PitchClass)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NAMES[self.index()]
    }

    pub fn transpose(self, semitones: i32) -> PitchClass {
        PitchClass((self.0 as i32 + semitones).rem_euclid(12) as u8)
    }

    /// Upward distance in semitones from `self` to `other`, in 0..12.
    pub fn interval_to(self, other: PitchClass) -> u8 {
        (other.0 + 12 - self.0) % 12
    }

    pub fn octave4_frequency(self) -> f64 {
        OCTAVE4_FREQUENCIES[self.index()]
    }
}

impl TryFrom<u8> for PitchClass {
    type Error = TheoryError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PitchClass::new(value)
    }
}

impl From<PitchClass> for u8 {
    fn from(pc: PitchClass) -> u8 {
        pc.0
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PitchClass {
    type Err = TheoryError;

    /// Accepts the flat names plus sharp spellings, which normalize to the
    /// same index.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(|| TheoryError::UnknownPitchName(s.into()))?;
        let natural: i32 = match letter.to_ascii_uppercase() {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(TheoryError::UnknownPitchName(s.into())),
        };
        let accidental = match chars.as_str() {
            "" => 0,
            "b" | "♭" => -1,
            "#" | "♯" => 1,
            _ => return Err(TheoryError::UnknownPitchName(s.into())),
        };
        Ok(PitchClass::C.transpose(natural + accidental))
    }
}

/// Frequency of `pc` in `octave`, scaled from the fourth-octave table by an
/// exact power of two.
pub fn pitch_frequency(pc: PitchClass, octave: i32) -> f64 {
    pc.octave4_frequency() * 2f64.powi(octave - 4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pitch {
    pub pitch_class: PitchClass,
    pub octave: i32,
}

impl Pitch {
    pub fn new(pitch_class: PitchClass, octave: i32) -> Self {
        Pitch { pitch_class, octave }
    }

    pub fn frequency(&self) -> f64 {
        pitch_frequency(self.pitch_class, self.octave)
    }
}

/// Key mode, which doubles as the binary classification label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Major, Mode::Minor];

    fn intervals(self) -> [u8; 7] {
        match self {
            Mode::Major => [2, 2, 1, 2, 2, 2, 1],
            Mode::Minor => [2, 1, 2, 2, 1, 3, 1],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = TheoryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(Mode::Major),
            "minor" => Ok(Mode::Minor),
            _ => Err(TheoryError::ParseMode(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyId {
    pub tonic: PitchClass,
    pub mode: Mode,
}

impl KeyId {
    pub fn new(tonic: PitchClass, mode: Mode) -> Self {
        KeyId { tonic, mode }
    }

    /// The 24 keys, majors first, each ordered by tonic index.
    pub fn all() -> impl Iterator<Item = KeyId> {
        Mode::BOTH
            .into_iter()
            .flat_map(|mode| PitchClass::all().map(move |tonic| KeyId { tonic, mode }))
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tonic, self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub key: KeyId,
    pub degrees: [PitchClass; 7],
}

impl Scale {
    /// Pitch class of a 1-based scale degree; wraps past 7.
    pub fn degree(&self, degree: u8) -> PitchClass {
        self.degrees[(degree as usize - 1) % 7]
    }

    pub fn contains(&self, pc: PitchClass) -> bool {
        self.degrees.contains(&pc)
    }

    /// Twelve-slot membership mask, indexed by pitch class.
    pub fn mask(&self) -> [bool; 12] {
        let mut mask = [false; 12];
        for pc in self.degrees {
            mask[pc.index()] = true;
        }
        mask
    }
}

pub fn build_scale(key: KeyId) -> Scale {
    let mut degrees = [key.tonic; 7];
    let mut current = key.tonic;
    for (slot, step) in degrees.iter_mut().zip(key.mode.intervals()) {
        *slot = current;
        current = current.transpose(step as i32);
    }
    debug_assert_eq!(current, key.tonic);
    Scale { key, degrees }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quality {
    Major,
    Minor,
    Diminished,
    Augmented,
    HalfDiminished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    Triad,
    Seventh,
}

/// A Roman-numeral chord: scale degree, quality and triad/seventh.
///
/// Seventh qualities name the whole chord: `V7` is `Major` (dominant),
/// `ii7` is `Minor`, `viiø7` is `HalfDiminished`, `vii°7` is `Diminished`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordSymbol {
    pub degree: u8,
    pub quality: Quality,
    pub extension: Extension,
}

const fn triad(degree: u8, quality: Quality) -> ChordSymbol {
    ChordSymbol {
        degree,
        quality,
        extension: Extension::Triad,
    }
}

const fn seventh(degree: u8, quality: Quality) -> ChordSymbol {
    ChordSymbol {
        degree,
        quality,
        extension: Extension::Seventh,
    }
}

const MAJOR_TRIADS: [ChordSymbol; 7] = [
    triad(1, Quality::Major),
    triad(2, Quality::Minor),
    triad(3, Quality::Minor),
    triad(4, Quality::Major),
    triad(5, Quality::Major),
    triad(6, Quality::Minor),
    triad(7, Quality::Diminished),
];

const MINOR_TRIADS: [ChordSymbol; 7] = [
    triad(1, Quality::Minor),
    triad(2, Quality::Diminished),
    triad(3, Quality::Augmented),
    triad(4, Quality::Minor),
    triad(5, Quality::Major),
    triad(6, Quality::Major),
    triad(7, Quality::Diminished),
];

const MAJOR_SEVENTHS: [ChordSymbol; 3] = [
    seventh(2, Quality::Minor),
    seventh(5, Quality::Major),
    seventh(7, Quality::HalfDiminished),
];

const MINOR_SEVENTHS: [ChordSymbol; 3] = [
    seventh(2, Quality::HalfDiminished),
    seventh(5, Quality::Major),
    seventh(7, Quality::Diminished),
];

impl ChordSymbol {
    /// The seven diatonic triads of a mode, by degree.
    pub fn triads(mode: Mode) -> &'static [ChordSymbol; 7] {
        match mode {
            Mode::Major => &MAJOR_TRIADS,
            Mode::Minor => &MINOR_TRIADS,
        }
    }

    /// The three seventh chords a mode admits (on degrees 2, 5 and 7).
    pub fn sevenths(mode: Mode) -> &'static [ChordSymbol; 3] {
        match mode {
            Mode::Major => &MAJOR_SEVENTHS,
            Mode::Minor => &MINOR_SEVENTHS,
        }
    }

    pub fn triad_on(mode: Mode, degree: u8) -> ChordSymbol {
        Self::triads(mode)[(degree as usize - 1) % 7]
    }

    /// The ten-chord vocabulary of a mode: seven triads then three sevenths.
    pub fn vocabulary(mode: Mode) -> Vec<ChordSymbol> {
        Self::triads(mode)
            .iter()
            .chain(Self::sevenths(mode))
            .copied()
            .collect()
    }

    /// Cadence triads every melody must contain: I, IV, V (major) or i, iv, V.
    pub fn cadence(mode: Mode) -> [ChordSymbol; 3] {
        let t = Self::triads(mode);
        [t[0], t[3], t[4]]
    }

    pub fn is_allowed_in(&self, mode: Mode) -> bool {
        Self::triads(mode).contains(self) || Self::sevenths(mode).contains(self)
    }

    /// The seventh this triad turns into, if its degree admits one in `mode`.
    pub fn seventh_of(&self, mode: Mode) -> Option<ChordSymbol> {
        if self.extension != Extension::Triad || !Self::triads(mode).contains(self) {
            return None;
        }
        Self::sevenths(mode)
            .iter()
            .find(|s| s.degree == self.degree)
            .copied()
    }

    pub fn note_count(&self) -> usize {
        match self.extension {
            Extension::Triad => 3,
            Extension::Seventh => 4,
        }
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const ROMAN: [&str; 7] = ["I", "II", "III", "IV", "V", "VI", "VII"];
        let numeral = ROMAN[(self.degree as usize - 1) % 7];
        let (upper, suffix) = match self.quality {
            Quality::Major => (true, ""),
            Quality::Augmented => (true, "+"),
            Quality::Minor => (false, ""),
            Quality::Diminished => (false, "°"),
            Quality::HalfDiminished => (false, "ø"),
        };
        if upper {
            f.write_str(numeral)?;
        } else {
            f.write_str(&numeral.to_ascii_lowercase())?;
        }
        f.write_str(suffix)?;
        if self.extension == Extension::Seventh {
            f.write_str("7")?;
        }
        Ok(())
    }
}

impl FromStr for ChordSymbol {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TheoryError::ParseChord(s.to_string());
        let numeral_len = s
            .char_indices()
            .find(|(_, c)| !matches!(c, 'I' | 'V' | 'i' | 'v'))
            .map_or(s.len(), |(i, _)| i);
        let (numeral, mut rest) = s.split_at(numeral_len);
        let upper = if numeral.chars().all(|c| c.is_ascii_uppercase()) {
            true
        } else if numeral.chars().all(|c| c.is_ascii_lowercase()) {
            false
        } else {
            return Err(err());
        };
        let degree = match numeral.to_ascii_uppercase().as_str() {
            "I" => 1,
            "II" => 2,
            "III" => 3,
            "IV" => 4,
            "V" => 5,
            "VI" => 6,
            "VII" => 7,
            _ => return Err(err()),
        };
        let extension = match rest.strip_suffix('7') {
            Some(r) => {
                rest = r;
                Extension::Seventh
            }
            None => Extension::Triad,
        };
        let quality = match (upper, rest) {
            (true, "") => Quality::Major,
            (true, "+") => Quality::Augmented,
            (false, "") => Quality::Minor,
            (false, "°") | (false, "o") => Quality::Diminished,
            (false, "ø") => Quality::HalfDiminished,
            _ => return Err(err()),
        };
        Ok(ChordSymbol {
            degree,
            quality,
            extension,
        })
    }
}

/// Names the chord built from `notes` (root first, stacked thirds) by its
/// interval structure, or `None` if it is none of the known shapes.
pub fn classify_chord(notes: &[PitchClass]) -> Option<(Quality, Extension)> {
    let root = *notes.first()?;
    let third = root.interval_to(*notes.get(1)?);
    let fifth = root.interval_to(*notes.get(2)?);
    let triad = match (third, fifth) {
        (4, 7) => Quality::Major,
        (3, 7) => Quality::Minor,
        (3, 6) => Quality::Diminished,
        (4, 8) => Quality::Augmented,
        _ => return None,
    };
    match notes.len() {
        3 => Some((triad, Extension::Triad)),
        4 => {
            let seventh = root.interval_to(notes[3]);
            let quality = match (triad, seventh) {
                (Quality::Major, 10) => Quality::Major,
                (Quality::Minor, 10) => Quality::Minor,
                (Quality::Diminished, 10) => Quality::HalfDiminished,
                (Quality::Diminished, 9) => Quality::Diminished,
                _ => return None,
            };
            Some((quality, Extension::Seventh))
        }
        _ => None,
    }
}

/// Spells `sym` in `scale` by stacking scale thirds on its degree, then checks
/// the spelled quality against the symbol's annotation.
pub fn chord_pitch_classes(scale: &Scale, sym: ChordSymbol) -> Result<Vec<PitchClass>, TheoryError> {
    let mode = scale.key.mode;
    if !sym.is_allowed_in(mode) {
        return Err(TheoryError::ChordNotInMode { symbol: sym, mode });
    }
    let notes: Vec<PitchClass> = (0..sym.note_count() as u8)
        .map(|k| scale.degree(sym.degree + 2 * k))
        .collect();
    let found = classify_chord(&notes);
    if found != Some((sym.quality, sym.extension)) {
        return Err(TheoryError::QualityMismatch {
            symbol: sym,
            key: scale.key,
            found,
        });
    }
    Ok(notes)
}
