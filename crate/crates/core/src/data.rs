//! Labelled feature datasets: CSV I/O and synthetic Gaussian blobs.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use thiserror::Error;

use crate::seed::SeedStream;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: i64, classes: usize },

    #[error("dataset has no examples")]
    EmptyDataset,

    #[error("last column must be named `label`, found {0:?}")]
    MissingLabelColumn(String),

    #[error("{0}")]
    InvalidBlobs(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_dim: usize,
    class_count: usize,
    /// Row-major `N × d`.
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(feature_dim: usize, class_count: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        assert_eq!(features.len(), labels.len() * feature_dim, "features must be N × d");
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(DataError::LabelOutOfRange {
                label: bad as i64,
                classes: class_count,
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::ParseError {
                line: (pos / feature_dim.max(1)) as u64 + 2,
                message: "non-finite feature".into(),
            });
        }
        Ok(Self {
            feature_dim,
            class_count,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Same examples, with the class count widened to `classes`.
    pub fn with_class_count(mut self, classes: usize) -> Result<Self> {
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= classes) {
            return Err(DataError::LabelOutOfRange {
                label: bad as i64,
                classes,
            });
        }
        self.class_count = classes;
        Ok(self)
    }
}

/// Parses a CSV with a header row; feature columns first, then `label`.
/// `C` is inferred as `max label + 1`.
pub fn read_dataset(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let last = headers.iter().next_back().unwrap_or("").to_string();
    if last != "label" {
        return Err(DataError::MissingLabelColumn(last));
    }
    let d = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::ParseError {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| DataError::ParseError { line, message };
        for cell in rec.iter().take(d) {
            let v: f64 = cell.parse().map_err(|_| parse_err(format!("bad feature {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite feature {cell:?}")));
            }
            features.push(v);
        }
        let cell = &rec[d];
        let y: i64 = cell.parse().map_err(|_| parse_err(format!("bad label {cell:?}")))?;
        if y < 0 {
            return Err(DataError::LabelOutOfRange { label: y, classes: 0 });
        }
        labels.push(y as usize);
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(d, classes, features, labels)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes `x0, …, x{d-1}, label`. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_dataset(ds: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.feature_dim).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.feature(i).iter().map(|v| v.to_string()).collect();
        row.push(ds.label(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, std::fs::File::create(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
}

/// Class `c` centred at `s·e_c` with isotropic `N(0, σ²)` noise, classes in
/// order. Requires `dim ≥ classes`.
pub fn synth_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
    if spec.classes < 2 {
        return Err(DataError::InvalidBlobs("need at least two classes".into()));
    }
    if spec.dim < spec.classes {
        return Err(DataError::InvalidBlobs(format!(
            "dimension {} cannot hold {} axis-aligned means",
            spec.dim, spec.classes
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(DataError::InvalidBlobs(format!("invalid noise {}", spec.noise)));
    }
    let mut rng = SeedStream::new(seed).rng("blobs", 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = spec.classes * spec.per_class;
    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        for _ in 0..spec.per_class {
            for k in 0..spec.dim {
                let mean = if k == c { spec.separation } else { 0.0 };
                features.push(mean + spec.noise * normal.sample(&mut rng));
            }
            labels.push(c);
        }
    }
    Dataset::new(spec.dim, spec.classes, features, labels)
}

/// Bayes error of two equiprobable blobs from [`synth_blobs`]: the means are
/// `s·√2` apart, so the error is `Q(s / (σ·√2))`.
pub fn two_blob_bayes_error(separation: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        return 0.0;
    }
    let z = separation / (noise * std::f64::consts::SQRT_2);
    StdNormal::standard().cdf(-z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_small_file() {
        let ds = read_dataset("a,b,label\n0.5,1,0\n-2,3e-3,1\n1,1,1\n0,0,0\n".as_bytes()).unwrap();
        assert_eq!((ds.feature_dim(), ds.class_count(), ds.len()), (2, 2, 4));
        assert_eq!(ds.feature(1), &[-2.0, 3e-3]);
    }

    #[test]
    fn rejects_bad_input() {
        match read_dataset("a,label\n1,0\nNaN,1\n".as_bytes()) {
            Err(DataError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_dataset("a,label\n".as_bytes()), Err(DataError::EmptyDataset)));
        assert!(matches!(
            read_dataset("a,label\n1,-1\n".as_bytes()),
            Err(DataError::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            read_dataset("a,b\n1,0\n".as_bytes()),
            Err(DataError::MissingLabelColumn(_))
        ));
        assert!(matches!(read_dataset("a,label\n1,x\n".as_bytes()), Err(DataError::ParseError { .. })));
    }

    #[test]
    fn blobs() {
        let spec = BlobSpec {
            classes: 3,
            per_class: 4,
            dim: 3,
            separation: 2.0,
            noise: 0.0,
        };
        let ds = synth_blobs(&spec, 1).unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.feature(5), &[0.0, 2.0, 0.0]);
        let noisy = BlobSpec { noise: 1.0, ..spec };
        assert_eq!(synth_blobs(&noisy, 9).unwrap(), synth_blobs(&noisy, 9).unwrap());
        assert_ne!(synth_blobs(&noisy, 9).unwrap(), synth_blobs(&noisy, 10).unwrap());
        assert!(synth_blobs(&BlobSpec { dim: 2, ..spec }, 1).is_err());
    }

    #[test]
    fn bayes_error_closed_form() {
        // Q(2√2) ≈ 0.002339
        assert!((two_blob_bayes_error(4.0, 1.0) - 0.002339).abs() < 1e-5);
        assert!((two_blob_bayes_error(0.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
