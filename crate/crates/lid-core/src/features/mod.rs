//! MFSC feature extraction: framing, mel filterbank log-energies, frame
//! energy, and utterance-level mean/variance normalization.

pub mod io;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corpus::types::{AudioSegment, Domain};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Converts Hz to mel: `2595 * log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Converts mel to Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub frame_len_ms: f64,
    pub frame_hop_ms: f64,
    pub n_mel: usize,
    pub include_energy: bool,
    /// 0 means "next power of two >= frame length".
    pub fft_size: usize,
    pub log_floor: f64,
    pub mel_low_hz: f64,
    /// 0 means "sample_rate / 2".
    pub mel_high_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 16_000,
            frame_len_ms: 25.0,
            frame_hop_ms: 10.0,
            n_mel: 12,
            include_energy: true,
            fft_size: 0,
            log_floor: 1e-10,
            mel_low_hz: 0.0,
            mel_high_hz: 0.0,
        }
    }
}

impl FeatureConfig {
    pub fn with_sample_rate(sample_rate: u32) -> Self {
        FeatureConfig {
            sample_rate,
            ..FeatureConfig::default()
        }
    }

    pub fn frame_len_samples(&self) -> usize {
        (self.frame_len_ms * f64::from(self.sample_rate) / 1000.0).round() as usize
    }

    pub fn frame_hop_samples(&self) -> usize {
        (self.frame_hop_ms * f64::from(self.sample_rate) / 1000.0).round() as usize
    }

    pub fn effective_fft_size(&self) -> usize {
        if self.fft_size != 0 {
            self.fft_size
        } else {
            self.frame_len_samples().next_power_of_two()
        }
    }

    pub fn effective_mel_high(&self) -> f64 {
        if self.mel_high_hz != 0.0 {
            self.mel_high_hz
        } else {
            f64::from(self.sample_rate) / 2.0
        }
    }

    /// Feature dimension: n_mel plus the energy column when enabled.
    pub fn dim(&self) -> usize {
        self.n_mel + usize::from(self.include_energy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        let w = self.frame_len_samples();
        let h = self.frame_hop_samples();
        if h == 0 || h > w {
            return Err(Error::Config(format!(
                "hop ({h} samples) must be in (0, frame length {w}]"
            )));
        }
        if self.n_mel == 0 {
            return Err(Error::Config("n_mel must be >= 1".into()));
        }
        if self.effective_fft_size() < w {
            return Err(Error::Config("fft_size must be >= frame length".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log_floor must be > 0".into()));
        }
        if self.mel_low_hz < 0.0 || self.effective_mel_high() <= self.mel_low_hz {
            return Err(Error::Config("mel band edges out of order".into()));
        }
        Ok(())
    }

    /// Number of frames for a signal of `n` samples, or None when too short.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        let w = self.frame_len_samples();
        let h = self.frame_hop_samples();
        if n < w {
            None
        } else {
            Some(1 + (n - w) / h)
        }
    }

    /// Number of frames corresponding to `seconds` of audio.
    pub fn frames_for_seconds(&self, seconds: f64) -> Option<usize> {
        self.frame_count((seconds * f64::from(self.sample_rate)).floor() as usize)
    }
}

/// A T x dim feature matrix with provenance metadata.
#[derive(Clone, Debug)]
pub struct FeatureSequence {
    pub values: Tensor<f64>,
    pub frame_len_s: f64,
    pub frame_hop_s: f64,
    pub normalized: bool,
    pub id: String,
    pub language: Option<String>,
    pub domain: Option<Domain>,
}

impl FeatureSequence {
    pub fn n_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Start time of each frame in seconds.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.n_frames())
            .map(|i| i as f64 * self.frame_hop_s)
            .collect()
    }

    /// Keeps the frames covering the first `seconds`; shorter sequences are
    /// returned unchanged.
    pub fn crop_seconds(&self, seconds: f64) -> FeatureSequence {
        let keep = if seconds <= self.frame_len_s {
            1
        } else {
            1 + ((seconds - self.frame_len_s) / self.frame_hop_s + 1e-9).floor() as usize
        };
        self.crop_frames(keep)
    }

    pub fn crop_frames(&self, keep: usize) -> FeatureSequence {
        if keep >= self.n_frames() {
            return self.clone();
        }
        let dim = self.dim();
        let data = self.values.data()[..keep * dim].to_vec();
        FeatureSequence {
            values: Tensor::from_vec(&[keep, dim], data).expect("crop shape"),
            ..self.clone()
        }
    }
}

/// Splits the signal into Hamming-windowed frames.
/// Returns one row per frame (`T x W`), plus the raw (unwindowed) frames
/// needed by the energy column.
pub fn frame_signal(seg: &AudioSegment, cfg: &FeatureConfig) -> Result<(Tensor<f64>, Tensor<f64>)> {
    cfg.validate()?;
    if seg.sample_rate != cfg.sample_rate {
        return Err(Error::invalid(format!(
            "segment rate {} != feature config rate {}",
            seg.sample_rate, cfg.sample_rate
        )));
    }
    let w = cfg.frame_len_samples();
    let h = cfg.frame_hop_samples();
    let t = cfg.frame_count(seg.samples.len()).ok_or_else(|| {
        Error::invalid(format!(
            "segment {:?} shorter than one frame ({} < {} samples)",
            seg.id,
            seg.samples.len(),
            w
        ))
    })?;
    let window: Vec<f64> = (0..w)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (w as f64 - 1.0)).cos())
        .collect();
    let mut windowed = Tensor::zeros(&[t, w]);
    let mut raw = Tensor::zeros(&[t, w]);
    for ti in 0..t {
        let start = ti * h;
        let wrow = windowed.row_mut(ti);
        for n in 0..w {
            wrow[n] = f64::from(seg.samples[start + n]) * window[n];
        }
        let rrow = raw.row_mut(ti);
        for n in 0..w {
            rrow[n] = f64::from(seg.samples[start + n]);
        }
    }
    Ok((windowed, raw))
}

/// Triangular mel filterbank, `n_mel x (fft_size/2 + 1)`. Triangles are
/// linear in mel with centers equally spaced between the band edges, so each
/// FFT bin is covered by at most two filters.
pub fn mel_filterbank(cfg: &FeatureConfig) -> Result<Tensor<f64>> {
    cfg.validate()?;
    let fft = cfg.effective_fft_size();
    let n_bins = fft / 2 + 1;
    let mel_lo = hz_to_mel(cfg.mel_low_hz);
    let mel_hi = hz_to_mel(cfg.effective_mel_high());
    let n = cfg.n_mel;
    let mel_points: Vec<f64> = (0..n + 2)
        .map(|i| mel_lo + (mel_hi - mel_lo) * i as f64 / (n + 1) as f64)
        .collect();
    let bin_hz = f64::from(cfg.sample_rate) / fft as f64;
    let mut bank = Tensor::zeros(&[n, n_bins]);
    for m in 0..n {
        let (lo, center, hi) = (mel_points[m], mel_points[m + 1], mel_points[m + 2]);
        let row = bank.row_mut(m);
        let mut any = false;
        for (k, slot) in row.iter_mut().enumerate() {
            let mel_k = hz_to_mel(k as f64 * bin_hz);
            let v = if mel_k <= lo || mel_k >= hi {
                0.0
            } else if mel_k <= center {
                (mel_k - lo) / (center - lo)
            } else {
                (hi - mel_k) / (hi - center)
            };
            if v > 0.0 {
                any = true;
            }
            *slot = v;
        }
        if !any {
            return Err(Error::Config(format!(
                "mel filter {m} has no positive weight; n_mel too large for fft_size {fft}"
            )));
        }
    }
    Ok(bank)
}

/// Center frequencies (Hz) of the filterbank, for tests and synthesis.
pub fn mel_centers_hz(cfg: &FeatureConfig) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.mel_low_hz);
    let mel_hi = hz_to_mel(cfg.effective_mel_high());
    let n = cfg.n_mel;
    (1..=n)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n + 1) as f64))
        .collect()
}

/// One-sided power spectrum of each windowed frame (`T x (fft/2+1)`).
fn power_spectra(windowed: &Tensor<f64>, fft_size: usize) -> Tensor<f64> {
    let t = windowed.rows();
    let w = windowed.cols();
    let n_bins = fft_size / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut out = Tensor::zeros(&[t, n_bins]);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for ti in 0..t {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < w {
                Complex::new(windowed.row(ti)[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let orow = out.row_mut(ti);
        for (k, slot) in orow.iter_mut().enumerate() {
            *slot = buf[k].norm_sqr();
        }
    }
    out
}

/// MFSC features: per frame, log mel filterbank energies of the power
/// spectrum, plus a log mean-energy column from the raw frame. Not
/// normalized; follow with [`cmvn`].
pub fn mfsc(seg: &AudioSegment, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    let (windowed, raw) = frame_signal(seg, cfg)?;
    let bank = mel_filterbank(cfg)?;
    let fft = cfg.effective_fft_size();
    let spectra = power_spectra(&windowed, fft);
    let t = windowed.rows();
    let dim = cfg.dim();
    let n_bins = fft / 2 + 1;
    let mut values = Tensor::zeros(&[t, dim]);
    for ti in 0..t {
        let spec = spectra.row(ti);
        let vrow = values.row_mut(ti);
        for m in 0..cfg.n_mel {
            let filt = &bank.data()[m * n_bins..(m + 1) * n_bins];
            let e: f64 = filt.iter().zip(spec).map(|(f, p)| f * p).sum();
            vrow[m] = e.max(cfg.log_floor).ln();
        }
        if cfg.include_energy {
            let rrow = raw.row(ti);
            let e = rrow.iter().map(|x| x * x).sum::<f64>() / rrow.len() as f64;
            vrow[cfg.n_mel] = e.max(cfg.log_floor).ln();
        }
    }
    Ok(FeatureSequence {
        values,
        frame_len_s: cfg.frame_len_ms / 1000.0,
        frame_hop_s: cfg.frame_hop_ms / 1000.0,
        normalized: false,
        id: seg.id.clone(),
        language: seg.language.clone(),
        domain: seg.domain,
    })
}

const CMVN_VAR_FLOOR: f64 = 1e-8;

/// Utterance-level mean/variance normalization per column (population
/// variance). Constant columns map to all zeros via the variance floor.
pub fn cmvn(fs: &FeatureSequence) -> Result<FeatureSequence> {
    if fs.normalized {
        return Err(Error::invalid("feature sequence is already normalized"));
    }
    let t = fs.n_frames();
    if t < 2 {
        return Err(Error::invalid("cmvn needs at least 2 frames"));
    }
    let dim = fs.dim();
    let mut out = fs.clone();
    for c in 0..dim {
        let mean = (0..t).map(|r| fs.values.row(r)[c]).sum::<f64>() / t as f64;
        let var = (0..t)
            .map(|r| {
                let d = fs.values.row(r)[c] - mean;
                d * d
            })
            .sum::<f64>()
            / t as f64;
        if var < CMVN_VAR_FLOOR {
            for r in 0..t {
                out.values.row_mut(r)[c] = 0.0;
            }
        } else {
            let inv_std = 1.0 / var.sqrt();
            for r in 0..t {
                out.values.row_mut(r)[c] = (fs.values.row(r)[c] - mean) * inv_std;
            }
        }
    }
    out.normalized = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_segment(freq: f64, seconds: f64, rate: u32, amp: f32) -> AudioSegment {
        let n = (seconds * f64::from(rate)) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(rate)).sin() as f32)
            .collect();
        AudioSegment::new("sine", samples, rate).unwrap()
    }

    #[test]
    fn frame_count_formula() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.frame_count(16_000), Some(98));
        assert_eq!(cfg.frame_count(48_000), Some(298));
        assert_eq!(cfg.frame_count(300), None);
    }

    #[test]
    fn too_short_segment_is_rejected() {
        let cfg = FeatureConfig::default();
        let seg = AudioSegment::new("s", vec![0.1; 320], 16_000).unwrap();
        assert!(frame_signal(&seg, &cfg).is_err());
    }

    #[test]
    fn filterbank_rows_positive_and_centers_monotone() {
        let cfg = FeatureConfig::default();
        let bank = mel_filterbank(&cfg).unwrap();
        for m in 0..cfg.n_mel {
            assert!(bank.row(m).iter().any(|&v| v > 0.0), "filter {m} empty");
            assert!(bank.row(m).iter().all(|&v| v >= 0.0));
        }
        let centers = mel_centers_hz(&cfg);
        for w in centers.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn bins_covered_by_at_most_two_filters() {
        let cfg = FeatureConfig::default();
        let bank = mel_filterbank(&cfg).unwrap();
        let n_bins = cfg.effective_fft_size() / 2 + 1;
        for k in 0..n_bins {
            let covering = (0..cfg.n_mel)
                .filter(|&m| bank.data()[m * n_bins + k] > 0.0)
                .count();
            assert!(covering <= 2, "bin {k} covered by {covering} filters");
        }
    }

    #[test]
    fn strongest_filter_at_1khz_is_nearest_center_in_mel() {
        // Evaluate all triangles at exactly 1 kHz and compare with the
        // mel-nearest center.
        let cfg = FeatureConfig::default();
        let centers = mel_centers_hz(&cfg);
        let mel_lo = hz_to_mel(cfg.mel_low_hz);
        let mel_hi = hz_to_mel(cfg.effective_mel_high());
        let n = cfg.n_mel;
        let mel_points: Vec<f64> = (0..n + 2)
            .map(|i| mel_lo + (mel_hi - mel_lo) * i as f64 / (n + 1) as f64)
            .collect();
        let mel_f = hz_to_mel(1000.0);
        let response = |m: usize| -> f64 {
            let (lo, c, hi) = (mel_points[m], mel_points[m + 1], mel_points[m + 2]);
            if mel_f <= lo || mel_f >= hi {
                0.0
            } else if mel_f <= c {
                (mel_f - lo) / (c - lo)
            } else {
                (hi - mel_f) / (hi - c)
            }
        };
        let strongest = (0..n)
            .max_by(|&a, &b| response(a).partial_cmp(&response(b)).unwrap())
            .unwrap();
        let nearest = (0..n)
            .min_by(|&a, &b| {
                let da = (hz_to_mel(centers[a]) - mel_f).abs();
                let db = (hz_to_mel(centers[b]) - mel_f).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(strongest, nearest);
        assert!(response(strongest) > 0.0);
    }

    #[test]
    fn all_zero_signal_hits_log_floor() {
        let cfg = FeatureConfig::default();
        let seg = AudioSegment::new("z", vec![0.0; 16_000], 16_000).unwrap();
        let fs = mfsc(&seg, &cfg).unwrap();
        let expected = cfg.log_floor.ln();
        for v in fs.values.data() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_tone_peaks_in_covering_band() {
        let cfg = FeatureConfig::default();
        let seg = sine_segment(1000.0, 1.0, 16_000, 0.5);
        let fs = mfsc(&seg, &cfg).unwrap();
        let centers = mel_centers_hz(&cfg);
        let expected_band = (0..cfg.n_mel)
            .min_by(|&a, &b| {
                let da = (hz_to_mel(centers[a]) - hz_to_mel(1000.0)).abs();
                let db = (hz_to_mel(centers[b]) - hz_to_mel(1000.0)).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        for r in 0..fs.n_frames() {
            let row = &fs.values.row(r)[..cfg.n_mel];
            let argmax = (0..cfg.n_mel)
                .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
                .unwrap();
            assert_eq!(argmax, expected_band, "frame {r}");
        }
    }

    #[test]
    fn doubling_amplitude_shifts_logs_by_ln4() {
        let cfg = FeatureConfig::default();
        let a = sine_segment(800.0, 1.0, 16_000, 0.2);
        let b = sine_segment(800.0, 1.0, 16_000, 0.4);
        let fa = mfsc(&a, &cfg).unwrap();
        let fb = mfsc(&b, &cfg).unwrap();
        let ln4 = 4f64.ln();
        let floor_log = cfg.log_floor.ln();
        for (va, vb) in fa.values.data().iter().zip(fb.values.data()) {
            if *va > floor_log + 1e-9 && *vb > floor_log + 1e-9 {
                assert!((vb - va - ln4).abs() < 1e-6, "{va} -> {vb}");
            }
        }
    }

    #[test]
    fn cmvn_two_point_column() {
        let fs = FeatureSequence {
            values: Tensor::from_vec(&[2, 1], vec![1.0, 3.0]).unwrap(),
            frame_len_s: 0.025,
            frame_hop_s: 0.010,
            normalized: false,
            id: "t".into(),
            language: None,
            domain: None,
        };
        let out = cmvn(&fs).unwrap();
        assert!((out.values.data()[0] + 1.0).abs() < 1e-12);
        assert!((out.values.data()[1] - 1.0).abs() < 1e-12);
        assert!(out.normalized);
    }

    #[test]
    fn cmvn_constant_column_becomes_zero() {
        let fs = FeatureSequence {
            values: Tensor::from_vec(&[3, 1], vec![5.0, 5.0, 5.0]).unwrap(),
            frame_len_s: 0.025,
            frame_hop_s: 0.010,
            normalized: false,
            id: "t".into(),
            language: None,
            domain: None,
        };
        let out = cmvn(&fs).unwrap();
        assert_eq!(out.values.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn cmvn_zero_mean_and_guards() {
        let cfg = FeatureConfig::default();
        let seg = sine_segment(700.0, 1.0, 16_000, 0.3);
        let fs = mfsc(&seg, &cfg).unwrap();
        let out = cmvn(&fs).unwrap();
        let t = out.n_frames();
        for c in 0..out.dim() {
            let mean = (0..t).map(|r| out.values.row(r)[c]).sum::<f64>() / t as f64;
            assert!(mean.abs() < 1e-9, "column {c} mean {mean}");
        }
        assert!(cmvn(&out).is_err(), "double normalization must be rejected");
        let short = FeatureSequence {
            values: Tensor::from_vec(&[1, 2], vec![0.0, 1.0]).unwrap(),
            ..fs.clone()
        };
        assert!(cmvn(&short).is_err());
    }

    #[test]
    fn crop_seconds_matches_frame_arithmetic() {
        let cfg = FeatureConfig::default();
        let seg = sine_segment(500.0, 3.0, 16_000, 0.3);
        let fs = mfsc(&seg, &cfg).unwrap();
        assert_eq!(fs.n_frames(), 298);
        assert_eq!(fs.crop_seconds(1.0).n_frames(), 98);
        assert_eq!(fs.crop_seconds(2.0).n_frames(), 198);
        assert_eq!(fs.crop_seconds(10.0).n_frames(), 298);
    }
}
