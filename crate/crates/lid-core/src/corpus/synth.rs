//! Seeded synthetic multi-domain corpus.
//!
//! Each language is a band profile (mean log-energy per mel band) sampled by
//! walking the generating tree from the root to its leaf, adding Gaussian
//! perturbations scaled by each branch length. A segment is white noise
//! shaped to that profile by an FIR filter (overlap-add convolution), gated
//! by a syllable-like amplitude envelope, and passed through the domain
//! channel: spectral tilt plus additive white noise at a target SNR.
//!
//! The amplitude envelope (shared across languages) is what keeps band
//! profiles observable after utterance-level CMVN: bands well above the
//! domain noise floor swing with the envelope while bands near the floor do
//! not, so the normalized feature trajectories still encode the profile.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::tree::{from_newick, ClusterTree};
use crate::corpus::manifest::{DatasetManifest, ManifestEntry};
use crate::corpus::types::{AudioSegment, Domain, Split};
use crate::corpus::wav::write_wav;
use crate::error::{Error, Result};
use crate::features::{hz_to_mel, mel_to_hz};
use crate::seed::{rng_for, rng_for_indexed};

const FIR_TAPS: usize = 257;
const FIR_DESIGN_FFT: usize = 2048;
const OLA_FFT: usize = 2048;
const ENVELOPE_RAMP_S: f64 = 0.02;
const TILT_REF_HZ: f64 = 1000.0;
const TILT_MIN_HZ: f64 = 50.0;
const PEAK_TARGET: f32 = 0.9;

/// Per-domain recording channel.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainChannel {
    pub snr_db: f64,
    pub tilt_db_per_octave: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Newick tree; leaf names are the language codes and branch lengths are
    /// the per-band profile perturbation scales (dB) of each edge.
    pub generating_tree: String,
    /// Number of mel bands in the language profiles.
    pub n_bands: usize,
    pub segments_per_language_per_domain: usize,
    pub segment_seconds: f64,
    pub sample_rate: u32,
    pub source_channel: DomainChannel,
    pub target_channel: DomainChannel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            generating_tree:
                "(((l1:1.5,l2:1.5):3,(l3:1.5,l4:1.5):3):6,((l5:1.5,l6:1.5):3,(l7:1.5,l8:1.5):3):6);"
                    .to_string(),
            n_bands: 12,
            segments_per_language_per_domain: 60,
            segment_seconds: 3.0,
            sample_rate: 8000,
            source_channel: DomainChannel {
                snr_db: 25.0,
                tilt_db_per_octave: 0.0,
            },
            target_channel: DomainChannel {
                snr_db: 8.0,
                tilt_db_per_octave: -4.0,
            },
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn parse_tree(&self) -> Result<ClusterTree> {
        let tree = from_newick(&self.generating_tree)?;
        if tree.n_leaves() < 2 {
            return Err(Error::Config("generating tree needs at least 2 leaves".into()));
        }
        for i in 0..tree.len() {
            if tree.node(i).branch_len < 0.0 {
                return Err(Error::Config(
                    "perturbation scales (branch lengths) must be >= 0".into(),
                ));
            }
        }
        Ok(tree)
    }

    pub fn validate(&self) -> Result<()> {
        self.parse_tree()?;
        if self.n_bands == 0 {
            return Err(Error::Config("n_bands must be >= 1".into()));
        }
        if self.segments_per_language_per_domain == 0 {
            return Err(Error::Config("segment count must be >= 1".into()));
        }
        if !(self.segment_seconds > 0.0) {
            return Err(Error::Config("segment_seconds must be > 0".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        Ok(())
    }

    pub fn languages(&self) -> Result<Vec<String>> {
        Ok(self.parse_tree()?.leaf_labels())
    }
}

/// Band profiles per language, sampled by the root-to-leaf tree walk.
pub fn language_profiles(spec: &SynthSpec) -> Result<BTreeMap<String, Vec<f64>>> {
    let tree = spec.parse_tree()?;
    let mut rng = rng_for(spec.seed, "profiles");
    let mut profiles: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    // depth-first walk in the tree's stored order keeps draws deterministic
    fn walk(
        tree: &ClusterTree,
        node: usize,
        parent_profile: &[f64],
        rng: &mut ChaCha8Rng,
        out: &mut BTreeMap<String, Vec<f64>>,
    ) {
        let n = tree.node(node);
        let scale = n.branch_len;
        let profile: Vec<f64> = parent_profile
            .iter()
            .map(|&p| p + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if n.children.is_empty() {
            out.insert(n.label.clone().unwrap(), profile);
        } else {
            for &c in &n.children {
                walk(tree, c, &profile, rng, out);
            }
        }
    }
    let root_profile = vec![0.0; spec.n_bands];
    // the root itself carries no edge; start children from the flat profile
    for &c in &tree.node(tree.root()).children {
        walk(&tree, c, &root_profile, &mut rng, &mut profiles);
    }
    if tree.node(tree.root()).children.is_empty() {
        return Err(Error::Config("generating tree is a single leaf".into()));
    }
    Ok(profiles)
}

/// Mel band center frequencies for an `n_bands` profile.
fn band_centers_hz(n_bands: usize, sample_rate: u32) -> Vec<f64> {
    let hi = f64::from(sample_rate) / 2.0;
    let mel_hi = hz_to_mel(hi);
    (1..=n_bands)
        .map(|i| mel_to_hz(mel_hi * i as f64 / (n_bands + 1) as f64))
        .collect()
}

/// Desired filter response in dB at frequency `f`: the profile interpolated
/// linearly in mel space (flat beyond the outer centers) plus the channel
/// tilt in dB per octave relative to 1 kHz.
fn response_db(profile: &[f64], centers: &[f64], tilt_db_per_octave: f64, f: f64) -> f64 {
    let mel_f = hz_to_mel(f);
    let mels: Vec<f64> = centers.iter().map(|&c| hz_to_mel(c)).collect();
    let prof = if mel_f <= mels[0] {
        profile[0]
    } else if mel_f >= *mels.last().unwrap() {
        *profile.last().unwrap()
    } else {
        let k = mels.iter().position(|&m| m >= mel_f).unwrap();
        let (m0, m1) = (mels[k - 1], mels[k]);
        let w = (mel_f - m0) / (m1 - m0);
        profile[k - 1] * (1.0 - w) + profile[k] * w
    };
    let tilt = tilt_db_per_octave * (f.max(TILT_MIN_HZ) / TILT_REF_HZ).log2();
    prof + tilt
}

/// Linear-phase FIR from a magnitude response by frequency sampling: inverse
/// FFT of the zero-phase spectrum, rotated to causal and Hann-windowed.
fn design_fir(mag_at_bin: impl Fn(usize) -> f64, design_fft: usize, n_taps: usize) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); design_fft];
    for k in 0..=design_fft / 2 {
        let m = mag_at_bin(k);
        spec[k] = Complex::new(m, 0.0);
        if k != 0 && k != design_fft / 2 {
            spec[design_fft - k] = Complex::new(m, 0.0);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(design_fft);
    ifft.process(&mut spec);
    let scale = 1.0 / design_fft as f64;
    let half = n_taps / 2;
    let mut taps = vec![0.0; n_taps];
    for (i, tap) in taps.iter_mut().enumerate() {
        let offset = i as isize - half as isize;
        let idx = ((design_fft as isize + offset) % design_fft as isize) as usize;
        let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n_taps - 1) as f64).cos();
        *tap = spec[idx].re * scale * hann;
    }
    taps
}

/// FFT overlap-add convolution; output trimmed to the input length with the
/// linear-phase delay removed.
fn ola_filter(input: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = input.len();
    let hop = OLA_FFT - taps.len() + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(OLA_FFT);
    let ifft = planner.plan_fft_inverse(OLA_FFT);

    let mut h = vec![Complex::new(0.0, 0.0); OLA_FFT];
    for (i, &t) in taps.iter().enumerate() {
        h[i] = Complex::new(t, 0.0);
    }
    fft.process(&mut h);

    let mut out = vec![0.0; n + taps.len()];
    let mut block = vec![Complex::new(0.0, 0.0); OLA_FFT];
    let mut start = 0usize;
    while start < n {
        let len = hop.min(n - start);
        for (i, slot) in block.iter_mut().enumerate() {
            *slot = if i < len {
                Complex::new(input[start + i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut block);
        for (b, hv) in block.iter_mut().zip(&h) {
            *b *= hv;
        }
        ifft.process(&mut block);
        let scale = 1.0 / OLA_FFT as f64;
        for i in 0..OLA_FFT.min(out.len() - start) {
            out[start + i] += block[i].re * scale;
        }
        start += hop;
    }
    let delay = taps.len() / 2;
    out[delay..delay + n].to_vec()
}

/// Syllable-like gating: bursts with raised-cosine edges separated by gaps,
/// amplitudes varying per burst. Language-independent by construction.
fn syllable_envelope(n: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let ramp = (ENVELOPE_RAMP_S * sr) as usize;
    let mut env = vec![0.0; n];
    let mut pos = 0usize;
    while pos < n {
        let burst = (rng.random_range(0.12..0.25) * sr) as usize;
        let gap = (rng.random_range(0.05..0.15) * sr) as usize;
        let amp: f64 = rng.random_range(0.6..1.0);
        for i in 0..burst {
            if pos + i >= n {
                break;
            }
            let shape = if i < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos()
            } else if i + ramp > burst {
                0.5 - 0.5 * (std::f64::consts::PI * (burst - i) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            env[pos + i] = amp * shape;
        }
        pos += burst + gap;
    }
    env
}

fn randn_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// The two additive components of a segment before mixing: the shaped,
/// enveloped language signal and the channel noise at the spec'd SNR.
pub fn synth_segment_components(
    spec: &SynthSpec,
    profile: &[f64],
    channel: &DomainChannel,
    segment_rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let n = (spec.segment_seconds * f64::from(spec.sample_rate)).round() as usize;
    let centers = band_centers_hz(spec.n_bands, spec.sample_rate);
    let bin_hz = f64::from(spec.sample_rate) / FIR_DESIGN_FFT as f64;
    let taps = design_fir(
        |k| {
            let f = k as f64 * bin_hz;
            10f64.powf(response_db(profile, &centers, channel.tilt_db_per_octave, f) / 20.0)
        },
        FIR_DESIGN_FFT,
        FIR_TAPS,
    );
    let white = randn_vec(n, segment_rng);
    let shaped = ola_filter(&white, &taps);
    let env = syllable_envelope(n, spec.sample_rate, segment_rng);
    let signal: Vec<f64> = shaped.iter().zip(&env).map(|(s, e)| s * e).collect();

    let p_signal = signal.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let noise_amp = (p_signal / 10f64.powf(channel.snr_db / 10.0)).sqrt();
    let noise: Vec<f64> = randn_vec(n, segment_rng)
        .into_iter()
        .map(|v| v * noise_amp)
        .collect();
    (signal, noise)
}

fn channel_for(spec: &SynthSpec, domain: Domain) -> &DomainChannel {
    match domain {
        Domain::Source => &spec.source_channel,
        Domain::Target => &spec.target_channel,
    }
}

/// One synthetic segment, peak-normalized and ready to quantize.
pub fn synth_segment(
    spec: &SynthSpec,
    profiles: &BTreeMap<String, Vec<f64>>,
    language: &str,
    domain: Domain,
    seg_idx: usize,
) -> Result<AudioSegment> {
    let languages: Vec<&String> = profiles.keys().collect();
    let lang_idx = languages
        .iter()
        .position(|l| l.as_str() == language)
        .ok_or_else(|| Error::invalid(format!("unknown language {language:?}")))? as u64;
    let domain_idx = match domain {
        Domain::Source => 0u64,
        Domain::Target => 1u64,
    };
    let mut rng = rng_for_indexed(spec.seed, "segment", &[lang_idx, domain_idx, seg_idx as u64]);
    let (signal, noise) =
        synth_segment_components(spec, &profiles[language], channel_for(spec, domain), &mut rng);
    let mixed: Vec<f64> = signal.iter().zip(&noise).map(|(s, v)| s + v).collect();
    let peak = mixed.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-12);
    let scale = f64::from(PEAK_TARGET) / peak;
    let samples: Vec<f32> = mixed.iter().map(|&v| (v * scale) as f32).collect();
    let id = format!("{language}_{domain}_{seg_idx:03}");
    let mut seg = AudioSegment::new(id, samples, spec.sample_rate)?;
    seg.language = Some(language.to_string());
    seg.domain = Some(domain);
    Ok(seg)
}

/// Generates the full corpus under `out_dir` and returns its manifest
/// (entries carry a `train` split placeholder until `split_manifest` runs).
/// Fully deterministic given the spec, independent of worker count.
pub fn synth_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let profiles = language_profiles(spec)?;
    let languages: Vec<String> = profiles.keys().cloned().collect();

    let mut jobs: Vec<(String, Domain, usize)> = Vec::new();
    for lang in &languages {
        for domain in [Domain::Source, Domain::Target] {
            for i in 0..spec.segments_per_language_per_domain {
                jobs.push((lang.clone(), domain, i));
            }
        }
    }

    let entries: Vec<ManifestEntry> = jobs
        .par_iter()
        .map(|(lang, domain, i)| -> Result<ManifestEntry> {
            let seg = synth_segment(spec, &profiles, lang, *domain, *i)?;
            let path = out_dir.join(format!("{}.wav", seg.id));
            write_wav(&path, &seg)?;
            Ok(ManifestEntry {
                id: seg.id.clone(),
                path,
                language: lang.clone(),
                domain: *domain,
                split: Split::Train,
                duration_s: seg.duration_s(),
            })
        })
        .collect::<Result<_>>()?;

    DatasetManifest::new(entries)
}
