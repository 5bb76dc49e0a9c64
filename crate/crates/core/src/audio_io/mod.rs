//! WAV files and dataset manifests: the on-disk surface consumed by
//! downstream loaders.

mod manifest;
mod wav;

pub use manifest::{
    read_manifest, wav_rel_path, write_manifest, DatasetManifest, ManifestError, ManifestHeader,
    MANIFEST_COLUMNS, MANIFEST_VERSION,
};
pub use wav::{
    decode_wav, encode_wav, read_wav, read_wav_with, write_wav, WavError, WavSpec, HEADER_LEN,
};
