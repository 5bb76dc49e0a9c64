//! Oscillators, ADSR envelopes and rendering of a [`MelodySpec`] to a
//! fixed-length clip.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::melodygen::MelodySpec;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("frequency {freq} Hz must lie in (0, {nyquist}) Hz")]
    FrequencyOutOfRange { freq: f64, nyquist: f64 },
    #[error("amplitude {0} must be non-negative")]
    NegativeAmplitude(f64),
    #[error("a chord needs 1 to 4 notes, got {0}")]
    BadNoteCount(usize),
    #[error("melody has no chords")]
    EmptyMelody,
    #[error("melody pass renders to zero samples")]
    ZeroLengthMelody,
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error("unknown waveshape `{0}`")]
    UnknownWaveshape(String),
    #[error("unknown amplitude profile `{0}`")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveshape {
    Sine,
    Square,
    Sawtooth,
    Triangle,
}

impl Waveshape {
    pub const ALL: [Waveshape; 4] = [
        Waveshape::Sine,
        Waveshape::Square,
        Waveshape::Sawtooth,
        Waveshape::Triangle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Waveshape::Sine => "sine",
            Waveshape::Square => "square",
            Waveshape::Sawtooth => "sawtooth",
            Waveshape::Triangle => "triangle",
        }
    }

    /// Ideal waveform value at `cycles` periods past phase zero.
    fn ideal(self, cycles: f64) -> f64 {
        let frac = cycles - cycles.floor();
        match self {
            Waveshape::Sine => (TAU * cycles).sin(),
            Waveshape::Square => {
                if frac < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Waveshape::Sawtooth => 2.0 * frac - 1.0,
            Waveshape::Triangle => {
                if frac < 0.25 {
                    4.0 * frac
                } else if frac < 0.75 {
                    2.0 - 4.0 * frac
                } else {
                    4.0 * frac - 4.0
                }
            }
        }
    }

    /// Fourier-series sum of the same waveform truncated below `nyquist`.
    fn band_limited(self, cycles: f64, freq: f64, nyquist: f64) -> f64 {
        let theta = TAU * cycles;
        let max_n = (nyquist / freq).floor().max(1.0) as u32;
        match self {
            Waveshape::Sine => theta.sin(),
            Waveshape::Square => (1..=max_n)
                .step_by(2)
                .map(|n| (n as f64 * theta).sin() / n as f64)
                .sum::<f64>()
                * 4.0
                / PI,
            Waveshape::Sawtooth => {
                -(1..=max_n)
                    .map(|n| (n as f64 * theta).sin() / n as f64)
                    .sum::<f64>()
                    * 2.0
                    / PI
            }
            Waveshape::Triangle => (1..=max_n)
                .step_by(2)
                .map(|n| {
                    let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (n as f64 * theta).sin() / (n * n) as f64
                })
                .sum::<f64>()
                * 8.0
                / (PI * PI),
        }
    }

    /// Peak of the band-limited form relative to the ideal one (Gibbs
    /// overshoot at the jumps of square and sawtooth).
    fn band_limited_headroom(self) -> f64 {
        match self {
            // partial sums of the square series peak at the first term, 4/pi
            Waveshape::Square => 4.0 / PI,
            Waveshape::Sawtooth => 1.18,
            Waveshape::Sine | Waveshape::Triangle => 1.0,
        }
    }
}

impl fmt::Display for Waveshape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Waveshape {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Waveshape::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| SynthError::UnknownWaveshape(s.into()))
    }
}

/// How oscillators are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Synthesis {
    /// Closed-form waveforms, aliasing included.
    #[default]
    Ideal,
    /// Additive synthesis with harmonics up to Nyquist.
    BandLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Stable,
    Increase,
    Decrease,
    Custom,
}

impl ProfileName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Stable => "stable",
            ProfileName::Increase => "increase",
            ProfileName::Decrease => "decrease",
            ProfileName::Custom => "custom",
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(ProfileName::Stable),
            "increase" => Ok(ProfileName::Increase),
            "decrease" => Ok(ProfileName::Decrease),
            "custom" => Ok(ProfileName::Custom),
            _ => Err(SynthError::UnknownProfile(s.into())),
        }
    }
}

/// Attack/decay/release in seconds, sustain as a gain in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdsrProfile {
    pub name: ProfileName,
    pub attack: f64,
    pub decay: f64,
    pub sustain: f64,
    pub release: f64,
}

impl AdsrProfile {
    pub const STABLE: AdsrProfile = AdsrProfile {
        name: ProfileName::Stable,
        attack: 0.01,
        decay: 0.01,
        sustain: 1.0,
        release: 0.01,
    };
    pub const INCREASE: AdsrProfile = AdsrProfile {
        name: ProfileName::Increase,
        attack: 2.0,
        decay: 0.01,
        sustain: 1.0,
        release: 0.01,
    };
    pub const DECREASE: AdsrProfile = AdsrProfile {
        name: ProfileName::Decrease,
        attack: 0.01,
        decay: 0.01,
        sustain: 1.0,
        release: 2.0,
    };

    pub fn named(name: ProfileName) -> Option<AdsrProfile> {
        match name {
            ProfileName::Stable => Some(Self::STABLE),
            ProfileName::Increase => Some(Self::INCREASE),
            ProfileName::Decrease => Some(Self::DECREASE),
            ProfileName::Custom => None,
        }
    }

    pub fn custom(attack: f64, decay: f64, sustain: f64, release: f64) -> Result<Self, SynthError> {
        let p = AdsrProfile {
            name: ProfileName::Custom,
            attack,
            decay,
            sustain,
            release,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let ok_time = |t: f64| t >= 0.0 && t.is_finite();
        if !(ok_time(self.attack) && ok_time(self.decay) && ok_time(self.release)) {
            return Err(SynthError::InvalidConfig(
                "ADSR times must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sustain) {
            return Err(SynthError::InvalidConfig(format!(
                "sustain {} outside [0, 1]",
                self.sustain
            )));
        }
        Ok(())
    }

    /// Gain at time `t` of a note lasting `duration` seconds.
    ///
    /// Segments are laid out in order (attack, decay, sustain, release) with
    /// the release occupying the final `release` seconds; when the note is
    /// too short, the release is pushed back to the end of the decay and cut
    /// off at `duration`.
    pub fn gain_at(&self, t: f64, duration: f64) -> f64 {
        let onset_part = |t: f64| {
            if t < self.attack {
                t / self.attack
            } else if t < self.attack + self.decay {
                1.0 + (self.sustain - 1.0) * (t - self.attack) / self.decay
            } else {
                self.sustain
            }
        };
        let release_start = (duration - self.release).max((self.attack + self.decay).min(duration));
        let g = if t < release_start || self.release == 0.0 {
            onset_part(t)
        } else {
            onset_part(release_start) * (1.0 - (t - release_start) / self.release)
        };
        g.clamp(0.0, 1.0)
    }
}

/// Samples the envelope at `t = i / sample_rate` for `round(duration * sample_rate)` samples.
pub fn adsr_gain_curve(profile: &AdsrProfile, duration: f64, sample_rate: u32) -> Vec<f64> {
    let n = (duration * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    (0..n).map(|i| profile.gain_at(i as f64 / sr, duration)).collect()
}

pub fn oscillate(
    shape: Waveshape,
    freq: f64,
    amplitude: f64,
    phase: f64,
    n_samples: usize,
    sample_rate: u32,
) -> Result<Vec<f64>, SynthError> {
    let mut out = vec![0.0; n_samples];
    oscillate_into(&mut out, shape, Synthesis::Ideal, freq, amplitude, phase, 0, sample_rate)?;
    Ok(out)
}

/// Adds an oscillator's output onto `buf`; sample `i` is taken at time
/// `(offset + i) / sample_rate`.
#[allow(clippy::too_many_arguments)]
fn oscillate_into(
    buf: &mut [f64],
    shape: Waveshape,
    synthesis: Synthesis,
    freq: f64,
    amplitude: f64,
    phase: f64,
    offset: usize,
    sample_rate: u32,
) -> Result<(), SynthError> {
    let sr = sample_rate as f64;
    let nyquist = sr / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(SynthError::FrequencyOutOfRange { freq, nyquist });
    }
    if !(amplitude >= 0.0) {
        return Err(SynthError::NegativeAmplitude(amplitude));
    }
    let phase_cycles = phase / TAU;
    for (i, slot) in buf.iter_mut().enumerate() {
        let cycles = freq * (offset + i) as f64 / sr + phase_cycles;
        let v = match synthesis {
            Synthesis::Ideal => shape.ideal(cycles),
            Synthesis::BandLimited => shape.band_limited(cycles, freq, nyquist) / shape.band_limited_headroom(),
        };
        *slot += amplitude * v;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub waveshape: Waveshape,
    pub adsr: AdsrProfile,
    pub peak_level: f64,
    /// Linear fade applied at both ends of every chord.
    pub fade_seconds: f64,
    pub synthesis: Synthesis,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            sample_rate: 16_000,
            clip_seconds: 4.0,
            waveshape: Waveshape::Sine,
            adsr: AdsrProfile::STABLE,
            peak_level: 0.8,
            fade_seconds: 0.002,
            synthesis: Synthesis::Ideal,
        }
    }
}

impl RenderConfig {
    pub fn with_waveshape(mut self, shape: Waveshape) -> Self {
        self.waveshape = shape;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        let n = self.sample_rate as f64 * self.clip_seconds;
        if !(n > 0.0) || (n - n.round()).abs() > 1e-9 {
            return bad(format!(
                "{} s at {} Hz is not a whole number of samples",
                self.clip_seconds, self.sample_rate
            ));
        }
        if !(self.peak_level > 0.0 && self.peak_level <= 1.0) {
            return bad(format!("peak level {} outside (0, 1]", self.peak_level));
        }
        if !(self.fade_seconds >= 0.0) {
            return bad("fade must be non-negative".into());
        }
        self.adsr.validate()
    }

    pub fn clip_len(&self) -> usize {
        (self.sample_rate as f64 * self.clip_seconds).round() as usize
    }
}

/// Where oscillator phase starts for a chord.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhasePolicy {
    /// Every note starts at phase zero at the chord onset.
    #[default]
    ResetAtOnset,
    /// Phase follows a global clock; the chord begins this many samples in.
    FreeRunning { onset_sample: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderMeta {
    pub waveshape: Waveshape,
    pub profile: ProfileName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub meta: Option<RenderMeta>,
}

impl AudioClip {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }
}

pub fn render_chord(
    freqs: &[f64],
    duration: f64,
    config: &RenderConfig,
    phase: PhasePolicy,
) -> Result<Vec<f64>, SynthError> {
    let n = (duration * config.sample_rate as f64).round() as usize;
    render_chord_samples(freqs, n, config, phase)
}

fn render_chord_samples(
    freqs: &[f64],
    n: usize,
    config: &RenderConfig,
    phase: PhasePolicy,
) -> Result<Vec<f64>, SynthError> {
    if freqs.is_empty() || freqs.len() > 4 {
        return Err(SynthError::BadNoteCount(freqs.len()));
    }
    let offset = match phase {
        PhasePolicy::ResetAtOnset => 0,
        PhasePolicy::FreeRunning { onset_sample } => onset_sample,
    };
    let amp = config.peak_level / freqs.len() as f64;
    let mut buf = vec![0.0; n];
    for &f in freqs {
        oscillate_into(
            &mut buf,
            config.waveshape,
            config.synthesis,
            f,
            amp,
            0.0,
            offset,
            config.sample_rate,
        )?;
    }
    let fade = ((config.fade_seconds * config.sample_rate as f64).round() as usize).min(n / 2);
    for i in 0..fade {
        let g = i as f64 / fade as f64;
        buf[i] *= g;
        buf[n - 1 - i] *= g;
    }
    Ok(buf)
}

/// Sample index at which each chord of one pass starts, plus the pass end.
/// Boundaries are rounded from cumulative time so durations never drift.
pub fn chord_boundaries(spec: &MelodySpec, sample_rate: u32) -> Vec<usize> {
    let sr = sample_rate as f64;
    let mut acc = 0.0;
    let mut out = vec![0];
    for c in &spec.chords {
        acc += c.duration;
        out.push((acc * sr).round() as usize);
    }
    out
}

/// One pass of the melody without envelope, truncated to at most `limit`
/// samples.
pub fn render_pass(spec: &MelodySpec, config: &RenderConfig, limit: usize) -> Result<Vec<f64>, SynthError> {
    if spec.chords.is_empty() {
        return Err(SynthError::EmptyMelody);
    }
    let bounds = chord_boundaries(spec, config.sample_rate);
    let pass_len = *bounds.last().unwrap();
    if pass_len == 0 {
        return Err(SynthError::ZeroLengthMelody);
    }
    let mut pass = Vec::with_capacity(pass_len.min(limit));
    for (chord, w) in spec.chords.iter().zip(bounds.windows(2)) {
        if w[0] >= limit {
            break;
        }
        let seg = render_chord_samples(&chord.frequencies, w[1] - w[0], config, PhasePolicy::ResetAtOnset)?;
        pass.extend_from_slice(&seg);
    }
    pass.truncate(limit);
    Ok(pass)
}

/// Loops the melody to fill the clip, truncates to exactly the clip length
/// and applies the clip-wide envelope.
pub fn render_melody(spec: &MelodySpec, config: &RenderConfig) -> Result<AudioClip, SynthError> {
    config.validate()?;
    let len = config.clip_len();
    let pass = render_pass(spec, config, len)?;
    let gain = adsr_gain_curve(&config.adsr, config.clip_seconds, config.sample_rate);
    let samples = pass
        .iter()
        .cycle()
        .zip(&gain)
        .map(|(s, g)| (s * g) as f32)
        .collect::<Vec<_>>();
    debug_assert_eq!(samples.len(), len);
    Ok(AudioClip {
        samples,
        sample_rate: config.sample_rate,
        meta: Some(RenderMeta {
            waveshape: config.waveshape,
            profile: config.adsr.name,
        }),
    })
}
