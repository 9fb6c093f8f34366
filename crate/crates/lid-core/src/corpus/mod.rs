//! Corpus handling: WAV ingestion, synthetic corpus generation, manifests.

pub mod manifest;
pub mod synth;
pub mod types;
pub mod wav;

pub use manifest::{split_manifest, DatasetManifest, ManifestEntry};
pub use synth::{language_profiles, synth_corpus, DomainChannel, SynthSpec};
pub use types::{crop_segment, AudioSegment, Domain, Split};
pub use wav::{load_wav, write_wav};
