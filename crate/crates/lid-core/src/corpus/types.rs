//! Audio segments and dataset labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recording-condition tag. `Source` segments carry language labels during
/// training; `Target` segments are treated as unlabelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Source => write!(f, "source"),
            Domain::Target => write!(f, "target"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::invalid(format!("unknown domain tag {other:?}"))),
        }
    }
}

/// Dataset split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Evaluation,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Evaluation => write!(f, "evaluation"),
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "evaluation" => Ok(Split::Evaluation),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Raw mono waveform with metadata.
#[derive(Clone, Debug)]
pub struct AudioSegment {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub language: Option<String>,
    pub domain: Option<Domain>,
    pub id: String,
}

impl AudioSegment {
    pub fn new(id: impl Into<String>, samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let seg = AudioSegment {
            samples,
            sample_rate,
            language: None,
            domain: None,
            id: id.into(),
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("audio segment has no samples"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(bad) = self
            .samples
            .iter()
            .find(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::invalid(format!(
                "sample {bad} outside [-1, 1] in segment {:?}",
                self.id
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Keeps the first `seconds` of the segment. Shorter segments are returned
/// unchanged with the short flag set.
pub fn crop_segment(seg: &AudioSegment, seconds: f64) -> Result<(AudioSegment, bool)> {
    if !(seconds > 0.0) {
        return Err(Error::invalid("crop length must be positive"));
    }
    let want = (seconds * f64::from(seg.sample_rate)).floor() as usize;
    if seg.samples.len() <= want {
        return Ok((seg.clone(), seg.samples.len() < want));
    }
    let mut out = seg.clone();
    out.samples.truncate(want);
    Ok((out, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(n: usize, rate: u32) -> AudioSegment {
        AudioSegment::new("t", vec![0.25; n], rate).unwrap()
    }

    #[test]
    fn crop_takes_first_samples() {
        let (out, short) = crop_segment(&seg(80_000, 16_000), 3.0).unwrap();
        assert_eq!(out.samples.len(), 48_000);
        assert!(!short);
    }

    #[test]
    fn crop_keeps_short_segments_whole() {
        let (out, short) = crop_segment(&seg(32_000, 16_000), 3.0).unwrap();
        assert_eq!(out.samples.len(), 32_000);
        assert!(short);
    }

    #[test]
    fn crop_exact_length_is_identity() {
        let (out, short) = crop_segment(&seg(48_000, 16_000), 3.0).unwrap();
        assert_eq!(out.samples.len(), 48_000);
        assert!(!short);
    }

    #[test]
    fn segment_validation_rejects_out_of_range() {
        assert!(AudioSegment::new("x", vec![1.5], 16_000).is_err());
        assert!(AudioSegment::new("x", vec![], 16_000).is_err());
        assert!(AudioSegment::new("x", vec![0.0], 0).is_err());
    }
}
