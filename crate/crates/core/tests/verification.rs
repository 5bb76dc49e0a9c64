use melodyforge::melodygen::{generate_melody, GenConfig};
use melodyforge::rng::SeedStream;
use melodyforge::shiftlab::label_for_seed;
use melodyforge::synth::{oscillate, render_melody, AudioClip, RenderConfig, Waveshape};
use melodyforge::theory::{KeyId, Mode, PitchClass};
use melodyforge::verifier::{
    accuracy_by_timbre, chroma, estimate_key, format_report, verify_symbolic, SampleVerdict,
};

#[test]
fn a4_sine_folds_onto_a() {
    let clip = render_melody(
        &{
            let mut s = generate_melody(0, Mode::Major, &GenConfig::default()).unwrap();
            for c in &mut s.chords {
                c.frequencies = vec![440.0];
            }
            s
        },
        &RenderConfig::default(),
    )
    .unwrap();
    assert!(chroma(&clip).unwrap().get(PitchClass::A) >= 0.95);

    let raw = oscillate(Waveshape::Sine, 440.0, 0.5, 0.0, 64_000, 16_000).unwrap();
    let plain = AudioClip {
        samples: raw.iter().map(|&v| v as f32).collect(),
        sample_rate: 16_000,
        meta: None,
    };
    assert!(chroma(&plain).unwrap().get(PitchClass::A) >= 0.95);
}

#[test]
fn c_major_melody_is_recognized() {
    let cfg = GenConfig::default();
    let spec = (0..)
        .step_by(2)
        .map(|seed| generate_melody(seed, Mode::Major, &cfg).unwrap())
        .find(|s| s.key == KeyId::new(PitchClass::C, Mode::Major))
        .unwrap();
    let e = estimate_key(&render_melody(&spec, &RenderConfig::default()).unwrap()).unwrap();
    assert_eq!(e.key(), spec.key);
}

#[test]
fn per_note_octave_substitution_keeps_chroma_and_key() {
    let cfg = GenConfig::default();
    let render = RenderConfig::default();
    let mut rng = SeedStream::new(99);
    for seed in 0..20u64 {
        let spec = generate_melody(seed, label_for_seed(seed), &cfg).unwrap();
        let mut moved = spec.clone();
        for c in &mut moved.chords {
            for f in &mut c.frequencies {
                // any octave from 2 to 5 keeps the note inside the chroma range
                let pc = melodyforge::melodygen::nearest_pitch_class(*f);
                *f = melodyforge::theory::pitch_frequency(pc, 2 + rng.index(4) as i32);
            }
        }
        let a = chroma(&render_melody(&spec, &render).unwrap()).unwrap();
        let b = chroma(&render_melody(&moved, &render).unwrap()).unwrap();
        let diff = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 0.03, "seed {seed}: chroma moved by {diff}");
        assert_eq!(
            estimate_key(&render_melody(&spec, &render).unwrap()).unwrap().key(),
            estimate_key(&render_melody(&moved, &render).unwrap()).unwrap().key()
        );
    }
}

#[test]
fn whole_clip_octave_shift_keeps_estimate() {
    let cfg = GenConfig::default();
    for seed in 100..110u64 {
        let spec = generate_melody(seed, label_for_seed(seed), &cfg).unwrap();
        let mut up = spec.clone();
        up.chords.iter_mut().for_each(|c| c.frequencies.iter_mut().for_each(|f| *f *= 2.0));
        let e1 = estimate_key(&render_melody(&spec, &RenderConfig::default()).unwrap()).unwrap();
        let e2 = estimate_key(&render_melody(&up, &RenderConfig::default()).unwrap()).unwrap();
        assert_eq!(e1.key(), e2.key());
    }
}

#[test]
fn symbolic_scan_has_no_failures() {
    let cfg = GenConfig::default();
    for seed in 0..2_000u64 {
        let spec = generate_melody(seed, label_for_seed(seed), &cfg).unwrap();
        let report = verify_symbolic(&spec, &cfg);
        assert!(report.passed(), "seed {seed}: {:?}", report.violations);
    }
}

#[test]
fn report_carries_per_timbre_table() {
    let cfg = GenConfig::default();
    let mut verdicts = Vec::new();
    for seed in 0..8u64 {
        let spec = generate_melody(seed, label_for_seed(seed), &cfg).unwrap();
        for timbre in Waveshape::ALL {
            let clip = render_melody(&spec, &RenderConfig::default().with_waveshape(timbre)).unwrap();
            verdicts.push(SampleVerdict {
                seed,
                timbre,
                key: spec.key,
                symbolic: verify_symbolic(&spec, &cfg),
                spectral: Some(estimate_key(&clip)),
            });
        }
    }
    let table = accuracy_by_timbre(&verdicts);
    assert_eq!(table.len(), 4);
    assert!(table.values().all(|a| a.analyzed == 8));
    let text = format_report(&verdicts);
    for timbre in Waveshape::ALL {
        assert!(text.lines().any(|l| l.starts_with(&format!("# {timbre}\t8\t"))));
    }
}
