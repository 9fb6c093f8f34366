//! Labeled symmetric dissimilarity matrices, cosine and geographic
//! distances, and Pearson correlation over matrix pairs.

use std::collections::BTreeMap;
use std::path::Path;

use crate::analysis::embeddings::PrototypeSet;
use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Symmetric n x n dissimilarities with ordered labels.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::shape(format!(
                "distance matrix for {n} labels needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        let dm = DistanceMatrix { labels, values };
        dm.validate()?;
        Ok(dm)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        for i in 0..n {
            if self.values[i * n + i] != 0.0 {
                return Err(Error::invalid(format!(
                    "nonzero diagonal at {:?}",
                    self.labels[i]
                )));
            }
            for j in 0..n {
                let v = self.values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!(
                        "invalid distance {v} between {:?} and {:?}",
                        self.labels[i], self.labels[j]
                    )));
                }
                if (v - self.values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "asymmetry between {:?} and {:?}",
                        self.labels[i], self.labels[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strict upper-triangle values in row order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Keeps only the named labels, preserving their current order.
    pub fn restrict(&self, keep: &[String]) -> Result<DistanceMatrix> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.labels
                    .iter()
                    .position(|l| l == k)
                    .ok_or_else(|| Error::invalid(format!("unknown label {k:?}")))
            })
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = idx;
        order.sort_unstable();
        let labels: Vec<String> = order.iter().map(|&i| self.labels[i].clone()).collect();
        let n = order.len();
        let mut values = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        DistanceMatrix::new(labels, values)
    }

    /// CSV with a label header row and a label column.
    pub fn save_csv(&self, path: &Path, global_seed: Option<u64>) -> Result<()> {
        let mut out = String::new();
        if let Some(seed) = global_seed {
            out.push_str(&format!("# global_seed={seed}\n"));
        }
        out.push_str("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&self.labels[i]);
            for j in 0..self.n() {
                out.push_str(&format!(",{}", self.get(i, j)));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<DistanceMatrix> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut labels: Vec<String> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (ln, line) in raw.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if labels.is_empty() {
                labels = cells[1..].iter().map(|s| s.to_string()).collect();
                continue;
            }
            if cells.len() != labels.len() + 1 {
                return Err(Error::FileFormat(format!(
                    "{}:{}: expected {} cells",
                    path.display(),
                    ln + 1,
                    labels.len() + 1
                )));
            }
            for c in &cells[1..] {
                values.push(
                    c.parse()
                        .map_err(|e| Error::FileFormat(format!("bad value {c:?}: {e}")))?,
                );
            }
        }
        DistanceMatrix::new(labels, values)
    }
}

/// Pairwise cosine distances between prototypes: `1 - a.b / (|a||b|)`.
pub fn cosine_distance_matrix(ps: &PrototypeSet) -> Result<DistanceMatrix> {
    let labels = ps.languages();
    let n = labels.len();
    let mut norms = Vec::with_capacity(n);
    for l in &labels {
        let v = ps.get(l).unwrap();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid(format!(
                "prototype for {l:?} has zero norm; cosine distance undefined"
            )));
        }
        norms.push(norm);
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let vi = ps.get(&labels[i]).unwrap();
        for j in (i + 1)..n {
            let vj = ps.get(&labels[j]).unwrap();
            let dot: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
            let d = (1.0 - dot / (norms[i] * norms[j])).max(0.0);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(labels, values)
}

/// Language coordinates (latitude, longitude) in degrees.
#[derive(Clone, Debug, Default)]
pub struct GeoTable {
    coords: BTreeMap<String, (f64, f64)>,
}

impl GeoTable {
    pub fn new() -> Self {
        GeoTable::default()
    }

    pub fn insert(&mut self, language: &str, lat: f64, lon: f64) -> Result<()> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid(format!("latitude {lat} out of range")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(format!("longitude {lon} out of range")));
        }
        self.coords.insert(language.to_string(), (lat, lon));
        Ok(())
    }

    pub fn get(&self, language: &str) -> Option<(f64, f64)> {
        self.coords.get(language).copied()
    }

    pub fn languages(&self) -> Vec<String> {
        self.coords.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// CSV `language,lat,lon`, `#` comments allowed.
    pub fn load_csv(path: &Path) -> Result<GeoTable> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = GeoTable::new();
        for (ln, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("language,") {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(Error::FileFormat(format!(
                    "{}:{}: expected language,lat,lon",
                    path.display(),
                    ln + 1
                )));
            }
            let lat: f64 = cells[1]
                .trim()
                .parse()
                .map_err(|e| Error::FileFormat(format!("bad latitude: {e}")))?;
            let lon: f64 = cells[2]
                .trim()
                .parse()
                .map_err(|e| Error::FileFormat(format!("bad longitude: {e}")))?;
            table.insert(cells[0].trim(), lat, lon)?;
        }
        Ok(table)
    }
}

/// Great-circle distance in kilometers (haversine).
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

/// Pairwise log10(km) great-circle distances; diagonal forced to 0.
pub fn geo_distance_matrix(geo: &GeoTable) -> Result<DistanceMatrix> {
    let labels = geo.languages();
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("geo distance needs at least 2 languages"));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let km = haversine_km(geo.get(&labels[i]).unwrap(), geo.get(&labels[j]).unwrap());
            if km <= 0.0 {
                return Err(Error::invalid(format!(
                    "{:?} and {:?} share coordinates; log distance undefined",
                    labels[i], labels[j]
                )));
            }
            let d = km.log10();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(labels, values)
}

/// Pearson correlation over the strict upper triangles of two matrices with
/// identical labels.
pub fn pearson(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64> {
    if a.labels() != b.labels() {
        return Err(Error::invalid(
            "matrices must share labels and order for correlation",
        ));
    }
    pearson_vec(&a.upper_triangle(), &b.upper_triangle())
}

/// Pearson correlation of two equal-length vectors.
pub fn pearson_vec(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("pearson needs two equal vectors, len >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("pearson undefined for zero-variance input"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
