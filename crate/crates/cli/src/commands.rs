use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, info, warn};
use melodyforge::audio_io::{
    read_manifest, read_wav, write_manifest, write_wav, DatasetManifest, ManifestHeader,
};
use melodyforge::config::ProjectConfig;
use melodyforge::melodygen::{generate_melody, MelodySpec, GENERATOR_VERSION};
use melodyforge::shiftlab::{
    build_domain_shift, build_selection_bias, build_test_suites, DEFAULT_DOMAIN_SCHEDULE, summarize, BaseDataset, BiasLevel, SampleRecord,
    Split,
};
use melodyforge::synth::{render_melody, AudioClip, RenderConfig, Waveshape};
use melodyforge::theory::Mode;
use melodyforge::verifier::{estimate_key, format_report, verify_record, SampleVerdict};
use rayon::prelude::*;

use crate::args::{GenerateArgs, VerifyArgs};
use crate::error::CliError;
use crate::layout::Layout;

pub fn load_config(path: Option<&Path>) -> Result<ProjectConfig, CliError> {
    match path {
        Some(p) => Ok(ProjectConfig::load(p)?),
        None => Ok(ProjectConfig::default()),
    }
}

fn base_header(cfg: &ProjectConfig, timbre: Waveshape, split: Split, count: Option<usize>) -> ManifestHeader {
    let mut h = ManifestHeader::new(GENERATOR_VERSION, &cfg.hash())
        .with("config", cfg.canonical_json())
        .with("kind", "base")
        .with("timbre", timbre)
        .with("split", split);
    if let Some(n) = count {
        h = h.with("count", n);
    }
    h
}

fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), CliError> {
    let changed = write_manifest(manifest, path).map_err(|source| CliError::Manifest {
        path: path.to_path_buf(),
        source,
    })?;
    if changed {
        info!("wrote {} ({} rows)", path.display(), manifest.len());
    } else {
        debug!("{} unchanged", path.display());
    }
    Ok(())
}

/// A WAV already on disk counts as done when it decodes to a full clip.
fn is_complete(path: &Path, expected_len: usize) -> bool {
    matches!(read_wav(path), Ok(c) if c.samples.len() == expected_len)
}

struct Progress {
    label: String,
    total: usize,
    done: AtomicUsize,
}

impl Progress {
    fn new(label: String, total: usize) -> Self {
        Progress {
            label,
            total,
            done: AtomicUsize::new(0),
        }
    }

    fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        let step = (self.total / 10).max(1);
        if done == self.total {
            info!("{}: {done}/{}", self.label, self.total);
        } else if done % step == 0 {
            debug!("{}: {done}/{}", self.label, self.total);
        }
    }
}

/// Renders the clips of one timbre/split directory. Returns how many files
/// were written (as opposed to found complete).
fn render_split(
    layout: &Layout,
    render: &RenderConfig,
    specs: &[MelodySpec],
    timbre: Waveshape,
    split: Split,
) -> Result<usize, CliError> {
    let render = render.clone().with_waveshape(timbre);
    let progress = Progress::new(format!("{timbre}/{split}"), specs.len());
    let written = AtomicUsize::new(0);
    specs.par_iter().try_for_each(|spec| -> Result<(), CliError> {
        let rel = melodyforge::audio_io::wav_rel_path(timbre, split, spec.seed);
        let path = layout.root.join(rel);
        if !is_complete(&path, render.clip_len()) {
            let clip = render_melody(spec, &render)?;
            write_wav(&clip, &path).map_err(|source| CliError::Wav {
                path: path.clone(),
                source,
            })?;
            written.fetch_add(1, Ordering::Relaxed);
        }
        progress.tick();
        Ok(())
    })?;
    Ok(written.into_inner())
}

pub fn generate(layout: &Layout, cfg: &ProjectConfig, args: &GenerateArgs) -> Result<String, CliError> {
    let timbres = if args.timbres.is_empty() {
        cfg.base.timbres.clone()
    } else {
        args.timbres.clone()
    };
    if let Some(t) = timbres.iter().find(|t| !cfg.base.timbres.contains(t)) {
        return Err(CliError::Usage(format!("timbre {t} is not in the configured timbres")));
    }
    let splits = if args.splits.is_empty() {
        Split::ALL.to_vec()
    } else {
        args.splits.clone()
    };
    let bias = args.bias_level.map(BiasLevel::new).transpose()?;
    if bias.is_some()
        && !(timbres.contains(&Waveshape::Sine) && timbres.contains(&Waveshape::Square) && splits.contains(&Split::Train))
    {
        return Err(CliError::Usage(
            "--bias-level needs the sine and square timbres and the train split".into(),
        ));
    }

    let hash = cfg.hash();
    let mut out = String::new();
    let mut train_manifests = Vec::new();
    for &split in &splits {
        let all: Vec<u64> = cfg.base.seeds(split).collect();
        let seeds = match args.count {
            Some(n) if n > all.len() => {
                return Err(CliError::Usage(format!("--count {n} exceeds the {} {split} seeds", all.len())))
            }
            Some(n) => &all[..n],
            None => &all[..],
        };
        let specs = seeds
            .par_iter()
            .map(|&seed| generate_melody(seed, melodyforge::shiftlab::label_for_seed(seed), &cfg.gen))
            .collect::<Result<Vec<_>, _>>()?;
        for &timbre in &timbres {
            layout.claim_audio_dir(timbre, split, &hash)?;
            let written = render_split(layout, &cfg.render, &specs, timbre, split)?;
            let records: Vec<SampleRecord> = specs
                .iter()
                .map(|s| SampleRecord::from_spec(s, timbre, cfg.base.amplitude, split))
                .collect();
            let manifest = DatasetManifest::new(base_header(cfg, timbre, split, args.count), records);
            save_manifest(&manifest, &layout.base_manifest(timbre, split))?;
            let _ = writeln!(
                out,
                "{timbre}/{split}: {} clips, {written} rendered, {} already present",
                specs.len(),
                specs.len() - written
            );
            if split == Split::Train && matches!(timbre, Waveshape::Sine | Waveshape::Square) {
                train_manifests.push(manifest);
            }
        }
    }

    if let Some(p) = bias {
        let base = BaseDataset::from_manifests(cfg.clone(), train_manifests)?;
        let mut m = build_selection_bias(p, &base)?;
        if let Some(n) = args.count {
            m.header = m.header.with("count", n);
        }
        save_manifest(&m, &layout.named_manifest(&format!("selection_bias_p{p}_train")))?;
        out.push_str(&summary_table(&[("train", &m)], cfg));
    }
    Ok(out)
}

/// Loads base manifests and the config they were generated with.
fn load_base(
    layout: &Layout,
    cfg_override: Option<&ProjectConfig>,
    needed: &[(Waveshape, Split)],
) -> Result<BaseDataset, CliError> {
    let mut manifests = Vec::new();
    let mut config: Option<ProjectConfig> = None;
    for &(timbre, split) in needed {
        let path = layout.base_manifest(timbre, split);
        if !path.exists() {
            return Err(CliError::MissingBase(format!(
                "no base dataset for {timbre}/{split} ({} missing); run `melodyforge generate --timbre {timbre} --split {split}` first",
                path.display()
            )));
        }
        let m = read_manifest(&path).map_err(|source| CliError::Manifest {
            path: path.clone(),
            source,
        })?;
        let embedded = m
            .header
            .get("config")
            .ok_or_else(|| CliError::Usage(format!("{} carries no config", path.display())))?;
        let cfg = ProjectConfig::from_json(embedded)?;
        if cfg.hash() != m.header.config_hash {
            return Err(CliError::Usage(format!("{}: config hash does not match its config", path.display())));
        }
        match &config {
            Some(c) if c.hash() != cfg.hash() => {
                return Err(CliError::MissingBase(format!(
                    "{} was generated with a different config than the other base manifests",
                    path.display()
                )))
            }
            _ => config = Some(cfg),
        }
        manifests.push(m);
    }
    let config = config.expect("at least one manifest");
    if let Some(o) = cfg_override {
        if o.hash() != config.hash() {
            return Err(CliError::Usage(format!(
                "--config hash {} differs from the base datasets' {}",
                o.hash(),
                config.hash()
            )));
        }
    }
    Ok(BaseDataset::from_manifests(config, manifests)?)
}

pub fn summary_table(rows: &[(&str, &DatasetManifest)], cfg: &ProjectConfig) -> String {
    let map = cfg.shift.bias_map;
    let mut out = format!(
        "set\trecords\tmajor\tsine\tsquare\tsawtooth\ttriangle\tP({}|major)\tP({}|minor)\tcorr\n",
        map.major, map.major
    );
    for (name, m) in rows {
        let s = summarize(&m.records, map);
        let by = |t| s.by_timbre.get(&t).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:+.4}",
            s.total,
            s.major,
            by(Waveshape::Sine),
            by(Waveshape::Square),
            by(Waveshape::Sawtooth),
            by(Waveshape::Triangle),
            s.p_major_timbre_given_major,
            s.p_major_timbre_given_minor,
            s.timbre_label_correlation
        );
    }
    out
}

pub fn shift_domain(layout: &Layout, cfg: Option<&ProjectConfig>, level: usize) -> Result<String, CliError> {
    let levels = cfg
        .and_then(|c| c.shift.domain_schedule.as_ref().map(Vec::len))
        .unwrap_or(DEFAULT_DOMAIN_SCHEDULE.len());
    if level >= levels {
        return Err(CliError::InvalidLevel(format!(
            "domain-shift level {level} is outside 0..={}",
            levels - 1
        )));
    }
    let base = load_base(
        layout,
        cfg,
        &[(Waveshape::Sine, Split::Train), (Waveshape::Square, Split::Train)],
    )?;
    let m = build_domain_shift(level, &base)?;
    save_manifest(&m, &layout.named_manifest(&format!("domain_level{level}_train")))?;
    Ok(summary_table(&[("train", &m)], &base.config))
}

pub fn shift_selection_bias(layout: &Layout, cfg: Option<&ProjectConfig>, p: f64) -> Result<String, CliError> {
    let level = BiasLevel::new(p)?;
    let base = load_base(
        layout,
        cfg,
        &[
            (Waveshape::Sine, Split::Train),
            (Waveshape::Square, Split::Train),
            (Waveshape::Sine, Split::Test),
            (Waveshape::Square, Split::Test),
        ],
    )?;
    let train = build_selection_bias(level, &base)?;
    save_manifest(&train, &layout.named_manifest(&format!("selection_bias_p{level}_train")))?;
    let suites = build_test_suites(level, &base)?;
    for s in &suites {
        save_manifest(&s.manifest, &layout.named_manifest(&format!("selection_bias_p{level}_{}", s.kind)))?;
    }
    let mut rows = vec![("train", &train)];
    rows.extend(suites.iter().map(|s| (s.kind.as_str(), &s.manifest)));
    Ok(summary_table(&rows, &base.config))
}

/// Evenly spaced positions, at most `k` of `n`.
fn sample_positions(n: usize, k: usize) -> Vec<usize> {
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    (0..k).map(|i| i * n / k).collect()
}

fn same_audio(a: &AudioClip, b: &AudioClip) -> bool {
    a.samples.len() == b.samples.len()
        && a
            .samples
            .iter()
            .zip(&b.samples)
            .all(|(x, y)| ((x - y).abs() as f64) <= 1.0 / 32_767.0 + 1e-7)
}

pub struct VerifyOutcome {
    pub report: String,
    pub failures: Vec<String>,
}

pub fn verify(layout: &Layout, args: &VerifyArgs) -> Result<VerifyOutcome, CliError> {
    let paths: Vec<PathBuf> = if args.manifests.is_empty() {
        layout.base_manifests()?
    } else {
        args.manifests.clone()
    };
    if paths.is_empty() {
        return Err(CliError::MissingBase(format!(
            "no manifests under {}",
            layout.manifests_dir().display()
        )));
    }
    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    for path in &paths {
        let m = read_manifest(path).map_err(|source| CliError::Manifest {
            path: path.clone(),
            source,
        })?;
        let cfg = match m.header.get("config") {
            Some(json) => ProjectConfig::from_json(json)?,
            None => return Err(CliError::Usage(format!("{} carries no config", path.display()))),
        };
        let mut sampled = vec![false; m.records.len()];
        let mut by_timbre: BTreeMap<Waveshape, Vec<usize>> = BTreeMap::new();
        for (i, r) in m.records.iter().enumerate() {
            by_timbre.entry(r.timbre).or_default().push(i);
        }
        for idx in by_timbre.values() {
            for p in sample_positions(idx.len(), args.sample) {
                sampled[idx[p]] = true;
            }
        }
        let progress = Progress::new(format!("verify {}", path.display()), m.records.len());
        let results: Vec<(SampleVerdict, Option<String>)> = m
            .records
            .par_iter()
            .zip(sampled.par_iter())
            .map(|(r, &spectral)| {
                let symbolic = verify_record(r, &cfg.gen);
                let wav_path = layout.root.join(&r.path);
                let mut problem = None;
                let mut estimate = None;
                match read_wav(&wav_path) {
                    Err(e) => problem = Some(format!("{}: {e}", wav_path.display())),
                    Ok(clip) if clip.samples.len() != cfg.render.clip_len() => {
                        problem = Some(format!("{}: {} samples", wav_path.display(), clip.samples.len()))
                    }
                    Ok(clip) if spectral => {
                        let fresh = generate_melody(r.seed, r.label, &cfg.gen)
                            .ok()
                            .and_then(|s| render_melody(&s, &cfg.render.clone().with_waveshape(r.timbre)).ok());
                        if !fresh.is_some_and(|f| same_audio(&f, &clip)) {
                            problem = Some(format!("{}: audio differs from a fresh render", wav_path.display()));
                        }
                        estimate = Some(estimate_key(&clip));
                    }
                    Ok(_) => {}
                }
                progress.tick();
                let verdict = SampleVerdict {
                    seed: r.seed,
                    timbre: r.timbre,
                    key: r.key,
                    symbolic,
                    spectral: estimate,
                };
                (verdict, problem)
            })
            .collect();
        for (v, problem) in results {
            if !v.symbolic.passed() {
                failures.push(format!("{}: seed {} ({}) fails symbolic checks", path.display(), v.seed, v.timbre));
            }
            if let Some(p) = problem {
                failures.push(p);
            }
            verdicts.push(v);
        }
    }
    let mut report = format_report(&verdicts);
    for f in &failures {
        let _ = writeln!(report, "# problem: {f}");
    }
    let violations: usize = verdicts.iter().map(|v| v.symbolic.violations.len()).sum();
    let _ = writeln!(report, "{violations} symbolic violations, {} problems", failures.len());
    if !failures.is_empty() {
        warn!("{} problems found", failures.len());
    }
    Ok(VerifyOutcome { report, failures })
}

pub fn inspect(path: &Path, rows: usize) -> Result<String, CliError> {
    let m = read_manifest(path).map_err(|source| CliError::Manifest {
        path: path.to_path_buf(),
        source,
    })?;
    let h = &m.header;
    let mut out = String::new();
    let _ = writeln!(out, "version\t{}", h.version);
    let _ = writeln!(out, "generator\t{}", h.generator);
    let _ = writeln!(out, "bit_depth\t{}", h.bit_depth);
    let _ = writeln!(out, "config_hash\t{}", h.config_hash);
    for (k, v) in &h.meta {
        if k == "config" {
            let _ = writeln!(out, "meta.{k}\t({} bytes of JSON)", v.len());
        } else {
            let _ = writeln!(out, "meta.{k}\t{v}");
        }
    }
    let _ = writeln!(out, "rows\t{}", m.len());
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &m.records {
        *counts.entry(format!("split.{}", r.split)).or_default() += 1;
        *counts.entry(format!("timbre.{}", r.timbre)).or_default() += 1;
        *counts.entry(format!("role.{}", r.shift_role)).or_default() += 1;
        let label = if r.label == Mode::Major { "major" } else { "minor" };
        *counts.entry(format!("label.{label}")).or_default() += 1;
    }
    for (k, v) in counts {
        let _ = writeln!(out, "{k}\t{v}");
    }
    let cfg = h
        .get("config")
        .and_then(|j| ProjectConfig::from_json(j).ok())
        .unwrap_or_default();
    out.push_str(&summary_table(&[("manifest", &m)], &cfg));
    if rows > 0 {
        let text = m.to_text().map_err(|source| CliError::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).take(rows + 1).collect();
        out.push_str(&body.join("\n"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_report(path: Option<&Path>, report: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, report).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}
