//! Embedding collections and per-language prototype vectors.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Provenance of an embedding collection.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingProvenance {
    pub checkpoint_digest: String,
    pub segment_seconds: f64,
}

/// Embedding vectors grouped by language.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingSet {
    by_language: BTreeMap<String, Vec<Vec<f64>>>,
    dim: Option<usize>,
    pub provenance: EmbeddingProvenance,
    /// (id, language) per inserted vector, in insertion order.
    pub ids: Vec<(String, String)>,
    raw: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(provenance: EmbeddingProvenance) -> Self {
        EmbeddingSet {
            provenance,
            ..EmbeddingSet::default()
        }
    }

    pub fn insert(&mut self, id: &str, language: &str, vector: Vec<f64>) -> Result<()> {
        match self.dim {
            None => self.dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::shape(format!(
                    "embedding for {id:?} has dim {}, expected {d}",
                    vector.len()
                )));
            }
            _ => {}
        }
        self.by_language
            .entry(language.to_string())
            .or_default()
            .push(vector.clone());
        self.ids.push((id.to_string(), language.to_string()));
        self.raw.push(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(0)
    }

    pub fn languages(&self) -> Vec<String> {
        self.by_language.keys().cloned().collect()
    }

    pub fn vectors(&self, language: &str) -> Option<&[Vec<f64>]> {
        self.by_language.get(language).map(Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.raw.len()
    }

    /// All vectors in insertion order, paired with `ids`.
    pub fn all_vectors(&self) -> &[Vec<f64>] {
        &self.raw
    }

    /// CSV `id,language,e0..e{dim-1}` with provenance comment lines.
    pub fn save_csv(&self, path: &Path, global_seed: Option<u64>) -> Result<()> {
        let mut out = String::new();
        if let Some(seed) = global_seed {
            out.push_str(&format!("# global_seed={seed}\n"));
        }
        out.push_str(&format!(
            "# checkpoint_digest={} segment_seconds={}\n",
            self.provenance.checkpoint_digest, self.provenance.segment_seconds
        ));
        out.push_str("id,language");
        for i in 0..self.dim() {
            out.push_str(&format!(",e{i}"));
        }
        out.push('\n');
        for ((id, lang), vec) in self.ids.iter().zip(&self.raw) {
            out.push_str(id);
            out.push(',');
            out.push_str(lang);
            for v in vec {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<EmbeddingSet> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut set = EmbeddingSet::default();
        for line in raw.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for part in rest.split_whitespace() {
                    if let Some(v) = part.strip_prefix("checkpoint_digest=") {
                        set.provenance.checkpoint_digest = v.to_string();
                    } else if let Some(v) = part.strip_prefix("segment_seconds=") {
                        set.provenance.segment_seconds = v.parse().unwrap_or(0.0);
                    }
                }
                continue;
            }
            if line.starts_with("id,language") {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 3 {
                return Err(Error::FileFormat(format!(
                    "{}: embedding rows need id,language,values",
                    path.display()
                )));
            }
            let vec: Vec<f64> = cells[2..]
                .iter()
                .map(|c| c.parse().map_err(|e| Error::FileFormat(format!("{e}"))))
                .collect::<Result<_>>()?;
            set.insert(cells[0], cells[1], vec)?;
        }
        Ok(set)
    }
}

/// One prototype vector per language.
#[derive(Clone, Debug, Default)]
pub struct PrototypeSet {
    by_language: BTreeMap<String, Vec<f64>>,
}

impl PrototypeSet {
    pub fn new() -> Self {
        PrototypeSet::default()
    }

    pub fn insert(&mut self, language: &str, vector: Vec<f64>) {
        self.by_language.insert(language.to_string(), vector);
    }

    pub fn get(&self, language: &str) -> Option<&[f64]> {
        self.by_language.get(language).map(Vec::as_slice)
    }

    pub fn languages(&self) -> Vec<String> {
        self.by_language.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.by_language.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_language.is_empty()
    }

    /// CSV `language,v0..v{dim-1}`.
    pub fn save_csv(&self, path: &Path, global_seed: Option<u64>) -> Result<()> {
        let mut out = String::new();
        if let Some(seed) = global_seed {
            out.push_str(&format!("# global_seed={seed}\n"));
        }
        for (lang, vec) in &self.by_language {
            out.push_str(lang);
            for v in vec {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Per-language arithmetic mean of the embeddings.
pub fn prototypes(es: &EmbeddingSet) -> Result<PrototypeSet> {
    let mut out = PrototypeSet::new();
    for lang in es.languages() {
        let vecs = es.vectors(&lang).unwrap();
        if vecs.is_empty() {
            return Err(Error::invalid(format!("language {lang:?} has no vectors")));
        }
        let dim = vecs[0].len();
        let mut mean = vec![0.0f64; dim];
        for v in vecs {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let inv = 1.0 / vecs.len() as f64;
        for m in mean.iter_mut() {
            *m *= inv;
        }
        out.insert(&lang, mean);
    }
    if out.is_empty() {
        return Err(Error::invalid("embedding set is empty"));
    }
    Ok(out)
}

/// Replaces `group` by a single `new_code` prototype equal to the group mean.
/// Merging happens before any distance computation.
pub fn merge_languages(
    ps: &PrototypeSet,
    group: &[String],
    new_code: &str,
) -> Result<PrototypeSet> {
    if group.is_empty() {
        return Err(Error::invalid("merge group is empty"));
    }
    let mut missing: Vec<&String> = group
        .iter()
        .filter(|g| ps.get(g).is_none())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::invalid(format!("unknown language codes {missing:?}")));
    }
    let dim = ps.get(&group[0]).unwrap().len();
    let mut mean = vec![0.0f64; dim];
    for g in group {
        for (m, x) in mean.iter_mut().zip(ps.get(g).unwrap()) {
            *m += x;
        }
    }
    let inv = 1.0 / group.len() as f64;
    for m in mean.iter_mut() {
        *m *= inv;
    }
    let mut out = PrototypeSet::new();
    for lang in ps.languages() {
        if !group.contains(&lang) {
            out.insert(&lang, ps.get(&lang).unwrap().to_vec());
        }
    }
    out.insert(new_code, mean);
    Ok(out)
}

/// Keeps only the named languages.
pub fn restrict_languages(ps: &PrototypeSet, keep: &[String]) -> Result<PrototypeSet> {
    let mut out = PrototypeSet::new();
    for k in keep {
        match ps.get(k) {
            Some(v) => out.insert(k, v.to_vec()),
            None => return Err(Error::invalid(format!("unknown language code {k:?}"))),
        }
    }
    Ok(out)
}
