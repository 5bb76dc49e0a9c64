pub mod audio_io;
pub mod config;
pub mod melodygen;
pub mod rng;
pub mod shiftlab;
pub mod synth;
pub mod theory;
pub mod verifier;

pub use audio_io::{read_manifest, read_wav, write_manifest, write_wav, DatasetManifest};
pub use config::ProjectConfig;
pub use melodygen::{generate_melody, GenConfig, MelodySpec};
pub use shiftlab::{build_base_dataset, build_domain_shift, build_selection_bias, BiasLevel, SampleRecord, Split};
pub use synth::{render_melody, AudioClip, RenderConfig, Waveshape};
pub use theory::{build_scale, pitch_frequency, KeyId, Mode, PitchClass};
pub use verifier::{chroma, estimate_key, verify_symbolic};
