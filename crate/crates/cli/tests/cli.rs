use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use melodyforge::audio_io::read_manifest;
use melodyforge::shiftlab::ShiftRole;
use melodyforge::synth::Waveshape;
use melodyforge::theory::Mode;

const SMALL: &str = r#"
[base]
train_size = 40
val_size = 10
test_start = 100
test_size = 20
timbres = ["sine", "square"]
"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("small.toml");
        fs::write(&config, SMALL).unwrap();
        Fixture {
            root: dir.path().join("data"),
            config,
            _dir: dir,
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_melodyforge"))
            .arg("--root")
            .arg(&self.root)
            .arg("-q")
            .args(args)
            .output()
            .unwrap()
    }

    fn run_with_config(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", self.config.to_str().unwrap()];
        full.extend_from_slice(args);
        self.run(&full)
    }

    fn manifest(&self, name: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{name}.manifest"))
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).unwrap();
                out.push((p, bytes));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generate_is_idempotent() {
    let f = Fixture::new();
    let first = f.run_with_config(&["generate"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("sine/train: 40 clips, 40 rendered"));
    let before = tree(&f.root);
    assert_eq!(before.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "wav")).count(), 140);

    let second = f.run_with_config(&["generate"]);
    assert!(second.status.success());
    assert!(stdout(&second).contains("sine/train: 40 clips, 0 rendered, 40 already present"));
    assert_eq!(tree(&f.root), before);
}

#[test]
fn partial_wav_is_rerendered() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--timbre", "sine", "--split", "val"]).status.success());
    let wav = f.root.join("sine/val/45.wav");
    let good = fs::read(&wav).unwrap();
    fs::write(&wav, &good[..500]).unwrap();
    let out = f.run_with_config(&["generate", "--timbre", "sine", "--split", "val"]);
    assert!(stdout(&out).contains("1 rendered"), "{}", stdout(&out));
    assert_eq!(fs::read(&wav).unwrap(), good);
}

#[test]
fn config_mismatch_is_refused() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--split", "val"]).status.success());
    let other = f.config.with_file_name("other.toml");
    fs::write(&other, SMALL.replace("val_size = 10", "val_size = 12")).unwrap();
    let out = f.run(&["--config", other.to_str().unwrap(), "generate", "--split", "val"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rendered with config"));
}

#[test]
fn full_bias_determines_timbre_by_label() {
    let f = Fixture::new();
    let out = f.run_with_config(&["generate", "--split", "train", "--count", "20", "--bias-level", "1.0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = read_manifest(&f.manifest("selection_bias_p1.0_train")).unwrap();
    assert_eq!(m.len(), 20);
    for r in &m.records {
        let want = if r.label == Mode::Major { Waveshape::Sine } else { Waveshape::Square };
        assert_eq!(r.timbre, want, "seed {}", r.seed);
        assert_eq!(r.shift_role, ShiftRole::BiasAligned);
    }
}

#[test]
fn shift_commands_need_a_base() {
    let f = Fixture::new();
    let out = f.run(&["shift", "domain", "--level", "3"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("melodyforge generate"));
    let out = f.run(&["shift", "selection-bias", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn invalid_levels_exit_seven() {
    let f = Fixture::new();
    assert_eq!(f.run(&["shift", "domain", "--level", "12"]).status.code(), Some(7));
    assert_eq!(f.run(&["shift", "selection-bias", "--p", "0.35"]).status.code(), Some(7));
    assert_eq!(f.run(&["shift", "selection-bias", "--p", "1.5"]).status.code(), Some(7));
    assert_eq!(f.run_with_config(&["generate", "--bias-level", "0.25"]).status.code(), Some(7));
}

#[test]
fn shifts_from_generated_base() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--split", "train", "--split", "test"]).status.success());

    let out = f.run(&["shift", "domain", "--level", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = read_manifest(&f.manifest("domain_level0_train")).unwrap();
    assert_eq!(m.len(), 40);
    assert!(m.records.iter().all(|r| r.timbre == Waveshape::Sine));

    assert!(f.run(&["shift", "domain", "--level", "11"]).status.success());
    let m = read_manifest(&f.manifest("domain_level11_train")).unwrap();
    assert_eq!(m.records.iter().filter(|r| r.timbre == Waveshape::Square).count(), 20);

    let out = f.run(&["shift", "selection-bias", "--p", "0.0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.lines().any(|l| l.starts_with("anti_bias\t20\t")), "{table}");
    assert_eq!(
        read_manifest(&f.manifest("selection_bias_p0.0_neutral")).unwrap().records,
        read_manifest(&f.manifest("selection_bias_p0.0_in_distribution")).unwrap().records
    );

    let out = f.run(&["shift", "selection-bias", "--p", "0.7"]);
    let table = stdout(&out);
    let corr = |set: &str| -> f64 {
        let line = table.lines().find(|l| l.starts_with(&format!("{set}\t"))).unwrap();
        line.rsplit('\t').next().unwrap().parse().unwrap()
    };
    assert!(corr("in_distribution") > 0.5, "{table}");
    assert!(corr("anti_bias") < -0.5, "{table}");
    assert_eq!(corr("neutral"), 0.0, "{table}");

    let other = f.config.with_file_name("other.toml");
    fs::write(&other, SMALL.replace("test_size = 20", "test_size = 22")).unwrap();
    let out = f.run(&["--config", other.to_str().unwrap(), "shift", "domain", "--level", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_then_names_a_corrupt_file() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--split", "test"]).status.success());
    let out = f.run(&["verify", "--sample", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("0 symbolic violations, 0 problems"), "{report}");
    assert!(report.contains("# sine\t4\t"), "{report}");

    let bad = f.root.join("square/test/107.wav");
    let bytes = fs::read(&bad).unwrap();
    fs::write(&bad, &bytes[..1000]).unwrap();
    let report_path = f.root.join("report.tsv");
    let out = f.run(&["verify", "--sample", "4", "--report", report_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("square/test/107.wav"), "{}", stderr(&out));
    let written = fs::read_to_string(&report_path).unwrap();
    assert!(written.contains("# problem:"));
}

#[test]
fn verify_catches_altered_audio() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--timbre", "sine", "--split", "val"]).status.success());
    let wav = f.root.join("sine/val/40.wav");
    let mut bytes = fs::read(&wav).unwrap();
    for b in &mut bytes[44 + 2000..44 + 2100] {
        *b = 0;
    }
    fs::write(&wav, bytes).unwrap();
    let out = f.run(&["verify", "--sample", "10"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("differs from a fresh render"));
}

#[test]
fn verify_without_manifests_exits_five() {
    let f = Fixture::new();
    assert_eq!(f.run(&["verify"]).status.code(), Some(5));
}

#[test]
fn inspect_prints_header_counts_and_rows() {
    let f = Fixture::new();
    assert!(f.run_with_config(&["generate", "--timbre", "sine", "--split", "val"]).status.success());
    let out = f.run(&["manifest", "inspect", f.manifest("base_sine_val").to_str().unwrap(), "--rows", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("version\t1"));
    assert!(text.contains("bit_depth\t16"));
    assert!(text.contains("rows\t10"));
    assert!(text.contains("timbre.sine\t10"));
    assert!(text.contains("sine/val/40.wav"));
    assert!(!text.contains("sine/val/42.wav"));
}

#[test]
fn missing_manifest_file_is_an_io_error() {
    let f = Fixture::new();
    let out = f.run(&["manifest", "inspect", "/nonexistent/x.manifest"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_timbre_is_a_usage_error() {
    let f = Fixture::new();
    assert_eq!(f.run(&["generate", "--timbre", "organ"]).status.code(), Some(2));
    assert_eq!(f.run_with_config(&["generate", "--timbre", "triangle"]).status.code(), Some(2));
}
