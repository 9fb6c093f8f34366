//! WAV ingestion and emission: RIFF/WAVE, 16-bit PCM, mono only.
//! No resampling: a rate mismatch is an error.

use std::path::Path;

use crate::corpus::types::AudioSegment;
use crate::error::{Error, Result};

const SCALE: f32 = 32768.0;

/// Loads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
/// The id is derived from the file name; language/domain stay unset.
pub fn load_wav(path: &Path, expected_rate: u32) -> Result<AudioSegment> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| Error::AudioFormat(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::AudioFormat(format!(
            "{}: channel count unsupported ({} channels, expected mono)",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::AudioFormat(format!(
            "{}: only 16-bit integer PCM is supported",
            path.display()
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::AudioFormat(format!(
            "{}: sample rate {} does not match expected {} (no resampling)",
            path.display(),
            spec.sample_rate,
            expected_rate
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples =
        samples.map_err(|e| Error::AudioFormat(format!("{}: {e}", path.display())))?;
    if samples.is_empty() {
        return Err(Error::AudioFormat(format!(
            "{}: empty payload",
            path.display()
        )));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioSegment::new(id, samples.iter().map(|&s| f32::from(s) / SCALE).collect(), expected_rate)
}

/// Writes a segment as 16-bit PCM mono WAV, rounding amplitudes to the
/// nearest quantization level.
pub fn write_wav(path: &Path, seg: &AudioSegment) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: seg.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::AudioFormat(format!("{}: {e}", path.display())))?;
    for &s in &seg.samples {
        let q = (s * SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::AudioFormat(format!("{}: {e}", path.display())))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::AudioFormat(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, rate: u32, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn fixed_point_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, 16_000, &[32767, 0, -32768]);
        let seg = load_wav(&p, 16_000).unwrap();
        assert!((seg.samples[0] - 32767.0 / 32768.0).abs() < 1e-7);
        assert_eq!(seg.samples[1], 0.0);
        assert_eq!(seg.samples[2], -1.0);
        assert_eq!(seg.id, "a");
        assert!(seg.language.is_none());
        assert!(seg.domain.is_none());
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        write_raw(&p, 2, 16_000, &[0, 0, 0, 0]);
        let err = load_wav(&p, 16_000).unwrap_err();
        assert!(err.to_string().contains("channel count unsupported"));
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        write_raw(&p, 1, 8_000, &[1, 2, 3]);
        assert!(load_wav(&p, 16_000).is_err());
    }

    #[test]
    fn empty_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_raw(&p, 1, 16_000, &[]);
        assert!(load_wav(&p, 16_000).is_err());
    }

    #[test]
    fn round_trip_within_one_level() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let seg = AudioSegment::new(
            "rt",
            vec![0.5, -0.25, 0.999, -1.0, 1.0 / 3.0],
            16_000,
        )
        .unwrap();
        write_wav(&p, &seg).unwrap();
        let back = load_wav(&p, 16_000).unwrap();
        for (a, b) in seg.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / SCALE, "{a} vs {b}");
        }
    }
}
