//! Dataset manifests: CSV I/O and stratified splitting.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::corpus::types::{Domain, Split};
use crate::error::{Error, Result};
use crate::seed::rng_for_indexed;

pub const MANIFEST_HEADER: &str = "id,path,language,domain,split,duration_s";

#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub language: String,
    pub domain: Domain,
    pub split: Split,
    pub duration_s: f64,
}

/// Ordered list of corpus entries.
#[derive(Clone, Debug, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = DatasetManifest { entries };
        m.check_consistent()?;
        Ok(m)
    }

    /// Structural checks: unique ids, positive durations.
    pub fn check_consistent(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::invalid(format!("duplicate manifest id {:?}", e.id)));
            }
            if !(e.duration_s > 0.0) {
                return Err(Error::invalid(format!(
                    "entry {:?} has non-positive duration",
                    e.id
                )));
            }
        }
        Ok(())
    }

    /// Verifies every referenced file exists.
    pub fn check_files_exist(&self) -> Result<()> {
        for e in &self.entries {
            if !e.path.exists() {
                return Err(Error::invalid(format!(
                    "manifest references missing file {}",
                    e.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn languages(&self) -> Vec<String> {
        let mut set: Vec<String> = self
            .entries
            .iter()
            .map(|e| e.language.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        set.sort();
        set
    }

    pub fn filter(&self, pred: impl Fn(&ManifestEntry) -> bool) -> DatasetManifest {
        DatasetManifest {
            entries: self.entries.iter().filter(|e| pred(e)).cloned().collect(),
        }
    }

    /// Writes the manifest as CSV. A `# global_seed=...` comment line is
    /// prepended when a seed is given so outputs record their provenance.
    pub fn save_csv(&self, path: &Path, global_seed: Option<u64>) -> Result<()> {
        let mut out = String::new();
        if let Some(seed) = global_seed {
            out.push_str(&format!("# global_seed={seed}\n"));
        }
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            for e in &self.entries {
                w.write_record([
                    e.id.as_str(),
                    &e.path.display().to_string(),
                    e.language.as_str(),
                    &e.domain.to_string(),
                    &e.split.to_string(),
                    &format!("{:.6}", e.duration_s),
                ])
                .map_err(|e| Error::FileFormat(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::FileFormat(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(raw.as_bytes());
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::FileFormat(format!("{}: {e}", path.display())))?;
            if rec.len() != 6 {
                return Err(Error::FileFormat(format!(
                    "{}: expected 6 columns, got {}",
                    path.display(),
                    rec.len()
                )));
            }
            entries.push(ManifestEntry {
                id: rec[0].to_string(),
                path: PathBuf::from(&rec[1]),
                language: rec[2].to_string(),
                domain: Domain::from_str(&rec[3])?,
                split: Split::from_str(&rec[4])?,
                duration_s: rec[5]
                    .parse()
                    .map_err(|e| Error::FileFormat(format!("bad duration: {e}")))?,
            });
        }
        DatasetManifest::new(entries)
    }
}

/// Largest-remainder apportionment of `total` into parts proportional to
/// `ratios`; remainder ties go to the earlier part.
fn apportion(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % 3]] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Stratified split by (language, domain). Deterministic given the seed;
/// every entry lands in exactly one split.
pub fn split_manifest(
    manifest: &DatasetManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetManifest> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("ratios must all be positive"));
    }
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("ratios must sum to 1"));
    }

    let mut strata: BTreeMap<(String, Domain), Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        strata
            .entry((e.language.clone(), e.domain))
            .or_default()
            .push(i);
    }

    let mut assignment: Vec<Option<Split>> = vec![None; manifest.entries.len()];
    for (stratum_idx, ((lang, domain), mut idxs)) in strata.into_iter().enumerate() {
        if idxs.len() < 3 {
            return Err(Error::invalid(format!(
                "stratum ({lang}, {domain}) has {} entries; need at least 3",
                idxs.len()
            )));
        }
        let mut rng = rng_for_indexed(seed, "split", &[stratum_idx as u64]);
        idxs.shuffle(&mut rng);
        let [n_train, n_val, _] = apportion(idxs.len(), &r);
        for (pos, idx) in idxs.into_iter().enumerate() {
            let split = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_val {
                Split::Validation
            } else {
                Split::Evaluation
            };
            assignment[idx] = Some(split);
        }
    }

    let entries = manifest
        .entries
        .iter()
        .zip(assignment)
        .map(|(e, s)| {
            let mut e = e.clone();
            e.split = s.expect("every entry assigned");
            e
        })
        .collect();
    DatasetManifest::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_manifest(per_stratum: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for lang in ["aa", "bb"] {
            for domain in [Domain::Source, Domain::Target] {
                for i in 0..per_stratum {
                    entries.push(ManifestEntry {
                        id: format!("{lang}_{domain}_{i}"),
                        path: PathBuf::from(format!("{lang}_{domain}_{i}.wav")),
                        language: lang.to_string(),
                        domain,
                        split: Split::Train,
                        duration_s: 3.0,
                    });
                }
            }
        }
        DatasetManifest::new(entries).unwrap()
    }

    #[test]
    fn split_counts_match_ratios_per_stratum() {
        let m = toy_manifest(100);
        let s = split_manifest(&m, (0.8, 0.1, 0.1), 7).unwrap();
        for lang in ["aa", "bb"] {
            for domain in [Domain::Source, Domain::Target] {
                let counts = |split: Split| {
                    s.entries
                        .iter()
                        .filter(|e| e.language == lang && e.domain == domain && e.split == split)
                        .count()
                };
                assert_eq!(counts(Split::Train), 80);
                assert_eq!(counts(Split::Validation), 10);
                assert_eq!(counts(Split::Evaluation), 10);
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let m = toy_manifest(20);
        let a = split_manifest(&m, (0.6, 0.2, 0.2), 3).unwrap();
        let b = split_manifest(&m, (0.6, 0.2, 0.2), 3).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.split, y.split);
        }
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let m = toy_manifest(10);
        let err = split_manifest(&m, (0.5, 0.5, 0.2), 1).unwrap_err();
        assert!(err.to_string().contains("sum to 1"));
        assert!(split_manifest(&m, (1.0, 0.0, 0.0), 1).is_err());
    }

    #[test]
    fn tiny_stratum_is_rejected() {
        let m = toy_manifest(2);
        assert!(split_manifest(&m, (0.6, 0.2, 0.2), 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        let m = toy_manifest(4);
        m.save_csv(&p, Some(99)).unwrap();
        let loaded = DatasetManifest::load_csv(&p).unwrap();
        assert_eq!(loaded.entries.len(), m.entries.len());
        assert_eq!(loaded.entries[0].id, m.entries[0].id);
        assert_eq!(loaded.entries[3].domain, m.entries[3].domain);
        let raw = std::fs::read_to_string(&p).unwrap();
        assert!(raw.starts_with("# global_seed=99\n"));
        assert!(raw.contains(MANIFEST_HEADER));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut m = toy_manifest(3);
        let dup = m.entries[0].clone();
        m.entries.push(dup);
        assert!(m.check_consistent().is_err());
    }
}
