use std::f64::consts::PI;

use melodyforge::melodygen::{generate_melody, ChordEvent, GenConfig, MelodySpec};
use melodyforge::synth::{
    adsr_gain_curve, oscillate, render_chord, render_melody, render_pass, AdsrProfile, PhasePolicy, RenderConfig,
    Waveshape,
};
use melodyforge::theory::{ChordSymbol, KeyId, Mode, PitchClass};

const SR: u32 = 16_000;

/// Direct single-bin DFT, scaled so a unit sinusoid on the bin reads 1.
fn dft_amplitude(x: &[f64], bin: usize) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let a = 2.0 * PI * bin as f64 * i as f64 / n;
        re += v * a.cos();
        im -= v * a.sin();
    }
    2.0 * (re * re + im * im).sqrt() / n
}

fn db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

fn harmonics(shape: Waveshape) -> (Vec<f64>, f64) {
    // 1 s at 16 kHz: every harmonic of 440 Hz falls on an exact bin
    let x = oscillate(shape, 440.0, 1.0, 0.0, SR as usize, SR).unwrap();
    let h: Vec<f64> = (1..=8).map(|n| dft_amplitude(&x, 440 * n)).collect();
    let f = h[0];
    (h, f)
}

#[test]
fn square_has_odd_harmonics_only() {
    let (h, fund) = harmonics(Waveshape::Square);
    for n in (2..=8).step_by(2) {
        assert!(db(h[n - 1] / fund) <= -40.0, "harmonic {n}: {} dB", db(h[n - 1] / fund));
    }
    for n in (1..=7).step_by(2) {
        let expected = 4.0 / (n as f64 * PI);
        assert!(db(h[n - 1] / expected).abs() <= 1.0, "harmonic {n}: {} vs {expected}", h[n - 1]);
    }
}

#[test]
fn triangle_falls_as_inverse_square() {
    let (_, fund) = harmonics(Waveshape::Triangle);
    assert!(db(fund / (8.0 / (PI * PI))).abs() <= 1.0);
    let x = oscillate(Waveshape::Triangle, 440.0, 1.0, 0.0, SR as usize, SR).unwrap();
    for n in [3, 5, 7, 9] {
        let rel = dft_amplitude(&x, 440 * n) / fund;
        assert!(db(rel * (n * n) as f64).abs() <= 1.0, "harmonic {n}: {rel}");
    }
}

#[test]
fn sawtooth_falls_as_inverse() {
    let (h, _) = harmonics(Waveshape::Sawtooth);
    for n in 1..=5 {
        let expected = 2.0 / (n as f64 * PI);
        assert!(db(h[n - 1] / expected).abs() <= 1.0, "harmonic {n}: {}", h[n - 1]);
    }
}

#[test]
fn rendered_a4_peaks_at_440() {
    let cfg = RenderConfig::default();
    let x = render_chord(&[440.0], 1.0, &cfg, PhasePolicy::ResetAtOnset).unwrap();
    let best = (400..480).max_by(|a, b| dft_amplitude(&x, *a).total_cmp(&dft_amplitude(&x, *b))).unwrap();
    assert!(best.abs_diff(440) <= 1);
    assert!(x.iter().all(|v| v.abs() <= cfg.peak_level + 1e-12));
}

/// 4-term Blackman-Harris window; sidelobes sit below -92 dB.
fn blackman_harris(n: usize) -> Vec<f64> {
    let a = [0.35875, 0.48829, 0.14128, 0.01168];
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / (n - 1) as f64;
            a[0] - a[1] * t.cos() + a[2] * (2.0 * t).cos() - a[3] * (3.0 * t).cos()
        })
        .collect()
}

#[test]
fn c_major_triad_has_three_peaks() {
    let freqs = [261.6256, 329.6276, 391.9954];
    let x = render_chord(&freqs, 0.5, &RenderConfig::default(), PhasePolicy::ResetAtOnset).unwrap();
    let w = blackman_harris(x.len());
    let xw: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
    // 8000 samples: bins are 2 Hz apart; scan up to 2 kHz
    let spec: Vec<f64> = (0..1_000).map(|k| dft_amplitude(&xw, k)).collect();
    let top = spec.iter().cloned().fold(0.0, f64::max);
    let near_note = |k: usize| freqs.iter().any(|f| (k as f64 * 2.0 - f).abs() <= 8.0);
    for (k, &m) in spec.iter().enumerate() {
        if !near_note(k) {
            assert!(db(m / top) < -40.0, "bin {k} ({} Hz) at {} dB", k * 2, db(m / top));
        }
    }
    for f in freqs {
        let k = (f / 2.0).round() as usize;
        assert!(db(spec[k] / top) > -3.0, "{f} Hz missing");
    }
}

fn constant_spec(freqs: Vec<f64>, durations: &[f64]) -> MelodySpec {
    MelodySpec {
        seed: 0,
        label: Mode::Major,
        key: KeyId::new(PitchClass::C, Mode::Major),
        chords: durations
            .iter()
            .map(|&duration| ChordEvent {
                symbol: ChordSymbol::triad_on(Mode::Major, 1),
                frequencies: freqs.clone(),
                duration,
            })
            .collect(),
        repeats: 1,
    }
}

#[test]
fn pass_repeats_with_its_own_period() {
    let mut spec = constant_spec(vec![261.6256, 329.6276, 391.9954], &[0.5, 0.5, 0.5]);
    spec.chords[1].frequencies = vec![349.2282, 440.0, 523.2512];
    spec.chords[2].frequencies = vec![391.9954, 493.8833, 293.6648];
    spec.repeats = 3;
    let cfg = RenderConfig::default();
    assert_eq!(render_pass(&spec, &cfg, 64_000).unwrap().len(), 24_000);
    let stable = RenderConfig {
        adsr: AdsrProfile::custom(0.0, 0.0, 1.0, 0.0).unwrap(),
        ..cfg
    };
    let x: Vec<f64> = render_melody(&spec, &stable).unwrap().samples.iter().map(|&v| v as f64).collect();
    assert_eq!(x.len(), 64_000);
    // autocorrelation oracle over lags up to one full clip minus a window
    let window = 16_000;
    let energy: f64 = x[..window].iter().map(|v| v * v).sum();
    let corr = |lag: usize| x[..window].iter().zip(&x[lag..lag + window]).map(|(a, b)| a * b).sum::<f64>() / energy;
    let best = (2_000..=40_000).step_by(100).max_by(|a, b| corr(*a).total_cmp(&corr(*b))).unwrap();
    assert_eq!(best, 24_000);
    assert!((corr(24_000) - 1.0).abs() < 1e-6);
}

fn rms_spread(samples: &[f32], window: usize) -> f64 {
    let rms: Vec<f64> = samples
        .chunks_exact(window)
        .map(|w| (w.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / w.len() as f64).sqrt())
        .collect();
    let mean = rms.iter().sum::<f64>() / rms.len() as f64;
    rms.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max)
}

#[test]
fn stable_envelope_keeps_rms_flat() {
    let cfg = RenderConfig::default();
    // [0.1 s, 3.9 s]; a lone tone is flat at any window length, a triad
    // beats, so its windows span 0.5 s to average the beats out
    let tone = render_melody(&constant_spec(vec![440.0], &[4.0]), &cfg).unwrap();
    assert!(rms_spread(&tone.samples[1_600..62_400], 1_600) < 1e-3);
    let triad = render_melody(&constant_spec(vec![261.6256, 329.6276, 391.9954], &[4.0]), &cfg).unwrap();
    let spread = rms_spread(&triad.samples[1_600..62_400], 8_000);
    assert!(spread < 0.01, "RMS varies by {spread}");
}

#[test]
fn envelope_profiles() {
    let inc = adsr_gain_curve(&AdsrProfile::INCREASE, 4.0, SR);
    assert!((inc[16_000] - 0.5).abs() <= 0.01);
    let stable = adsr_gain_curve(&AdsrProfile::STABLE, 4.0, SR);
    assert!(stable[320..63_840].iter().all(|g| *g == 1.0));
    let dec = adsr_gain_curve(&AdsrProfile::DECREASE, 4.0, SR);
    // oracle: linear from 1 at 2 s down to 0 at 4 s
    for i in (32_000..64_000).step_by(997) {
        let t = i as f64 / SR as f64;
        assert!((dec[i] - (4.0 - t) / 2.0).abs() < 1e-9);
    }
    assert!(dec[63_999] < 1e-4);
}

#[test]
fn generated_clips_never_clip() {
    let g = GenConfig::default();
    for seed in 0..100u64 {
        let spec = generate_melody(seed, if seed % 2 == 0 { Mode::Major } else { Mode::Minor }, &g).unwrap();
        for shape in Waveshape::ALL {
            let clip = render_melody(&spec, &RenderConfig::default().with_waveshape(shape)).unwrap();
            assert_eq!(clip.samples.len(), 64_000);
            assert!(clip.peak() <= 1.0);
        }
    }
}
