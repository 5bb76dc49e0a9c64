use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use melodyforge::shiftlab::Split;
use melodyforge::synth::Waveshape;

#[derive(Debug, Parser)]
#[command(name = "melodyforge", version, about = "Seeded melody datasets with controlled distribution shifts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Dataset root directory.
    #[arg(long, global = true, default_value = "melodyforge-data")]
    pub root: PathBuf,
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for rendering and analysis (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render base datasets (WAVs plus one manifest per timbre and split).
    Generate(GenerateArgs),
    /// Build a shifted training manifest from existing base datasets.
    #[command(subcommand)]
    Shift(ShiftCommand),
    /// Check manifests symbolically and a sample of their audio spectrally.
    Verify(VerifyArgs),
    /// Inspect manifest files.
    #[command(subcommand)]
    Manifest(ManifestCommand),
}

fn parse_timbre(s: &str) -> Result<Waveshape, String> {
    s.parse::<Waveshape>().map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse::<Split>()
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Timbres to render (repeatable; default: all configured).
    #[arg(long = "timbre", value_parser = parse_timbre)]
    pub timbres: Vec<Waveshape>,
    /// Splits to render (repeatable; default: train, val, test).
    #[arg(long = "split", value_parser = parse_split)]
    pub splits: Vec<Split>,
    /// Only the first N seeds of each split.
    #[arg(long)]
    pub count: Option<usize>,
    /// Also emit a selection-bias training manifest at this level, built
    /// from the sine and square training records just generated.
    #[arg(long)]
    pub bias_level: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ShiftCommand {
    /// Sine training set with square twins swapped in (levels 0 to 11).
    Domain {
        #[arg(long)]
        level: usize,
    },
    /// Timbre correlated with label on a fraction p of the training set,
    /// plus in-distribution, neutral and anti-bias test suites.
    SelectionBias {
        #[arg(long)]
        p: f64,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Manifests to verify (default: every base manifest under the root).
    #[arg(long = "manifest")]
    pub manifests: Vec<PathBuf>,
    /// Records per timbre analyzed spectrally.
    #[arg(long, default_value_t = 100)]
    pub sample: usize,
    /// Write the full report here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ManifestCommand {
    /// Header, counts and timbre/label association of a manifest.
    Inspect {
        path: PathBuf,
        /// Also print the first N rows.
        #[arg(long, default_value_t = 0)]
        rows: usize,
    },
}
