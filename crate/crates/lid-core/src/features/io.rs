//! Feature file format (`.lidf`): little-endian binary.
//!
//! Layout: magic `LIDF`, version u32, T u32, dim u32, `T*dim` float32
//! row-major values, then a length-prefixed UTF-8 JSON metadata block
//! (id, language, domain, normalized flag, frame geometry, optional seed).

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::types::Domain;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"LIDF";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    id: String,
    language: Option<String>,
    domain: Option<String>,
    normalized: bool,
    frame_len_s: f64,
    frame_hop_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    global_seed: Option<u64>,
}

pub fn save_features(path: &Path, fs: &FeatureSequence, global_seed: Option<u64>) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(fs.n_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(fs.dim() as u32).to_le_bytes());
    for &v in fs.values.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let meta = Meta {
        id: fs.id.clone(),
        language: fs.language.clone(),
        domain: fs.domain.map(|d| d.to_string()),
        normalized: fs.normalized,
        frame_len_s: fs.frame_len_s,
        frame_hop_s: fs.frame_hop_s,
        global_seed,
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::FileFormat(e.to_string()))?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<FeatureSequence> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::FileFormat(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[0..4] != MAGIC {
        return Err(fail("not a LIDF file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let data_len = t * dim * 4;
    if bytes.len() < 16 + data_len + 4 {
        return Err(fail("truncated feature payload"));
    }
    let mut values = Vec::with_capacity(t * dim);
    for chunk in bytes[16..16 + data_len].chunks_exact(4) {
        values.push(f64::from(f32::from_le_bytes([
            chunk[0], chunk[1], chunk[2], chunk[3],
        ])));
    }
    let meta_off = 16 + data_len;
    let meta_len =
        u32::from_le_bytes(bytes[meta_off..meta_off + 4].try_into().unwrap()) as usize;
    if bytes.len() < meta_off + 4 + meta_len {
        return Err(fail("truncated metadata block"));
    }
    let meta: Meta = serde_json::from_slice(&bytes[meta_off + 4..meta_off + 4 + meta_len])
        .map_err(|e| fail(&format!("bad metadata JSON: {e}")))?;
    let domain = match meta.domain {
        Some(s) => Some(Domain::from_str(&s)?),
        None => None,
    };
    Ok(FeatureSequence {
        values: Tensor::from_vec(&[t, dim], values)?,
        frame_len_s: meta.frame_len_s,
        frame_hop_s: meta.frame_hop_s,
        normalized: meta.normalized,
        id: meta.id,
        language: meta.language,
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_fs() -> FeatureSequence {
        FeatureSequence {
            values: Tensor::from_vec(&[2, 3], vec![0.5, -1.25, 3.0, 0.0, 2.5, -0.125]).unwrap(),
            frame_len_s: 0.025,
            frame_hop_s: 0.010,
            normalized: true,
            id: "seg01".into(),
            language: Some("aa".into()),
            domain: Some(Domain::Target),
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.lidf");
        let fs = sample_fs();
        save_features(&p, &fs, Some(5)).unwrap();
        let back = load_features(&p).unwrap();
        assert_eq!(back.id, fs.id);
        assert_eq!(back.language, fs.language);
        assert_eq!(back.domain, fs.domain);
        assert_eq!(back.normalized, fs.normalized);
        assert_eq!(back.values.shape(), fs.values.shape());
        // values chosen exactly representable in f32
        assert_eq!(back.values.data(), fs.values.data());
    }

    #[test]
    fn file_bytes_are_stable_across_save_load_save() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.lidf");
        let p2 = dir.path().join("b.lidf");
        let fs = sample_fs();
        save_features(&p1, &fs, Some(5)).unwrap();
        let loaded = load_features(&p1).unwrap();
        save_features(&p2, &loaded, Some(5)).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.lidf");
        std::fs::write(&p, b"NOPExxxxxxxxxxxxxxxx").unwrap();
        assert!(load_features(&p).is_err());
    }
}
