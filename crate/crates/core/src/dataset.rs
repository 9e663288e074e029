//! Labeled sample matrices and their CSV form.
//!
//! CSV layout: first column is the 0/1 label, remaining columns are the
//! features. A header row is optional.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// S samples by F real-valued features with binary labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    feature_count: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, feature_count: usize) -> Result<Self> {
        if feature_count == 0 {
            return Err(Error::Data("dataset needs at least one feature".into()));
        }
        if features.len() != labels.len() * feature_count {
            return Err(Error::Data(format!(
                "{} values do not form {} rows of {} features",
                features.len(),
                labels.len(),
                feature_count
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Data(format!("label {bad} is not binary")));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, feature {}",
                i / feature_count,
                i % feature_count
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_count,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let f = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::Data("rows have differing lengths".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Data("row and label counts differ".into()));
        }
        Self::new(rows.concat(), labels, f)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn sample_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, sample: usize) -> &[f64] {
        let f = self.feature_count;
        &self.features[sample * f..(sample + 1) * f]
    }

    #[inline]
    pub fn value(&self, sample: usize, feature: usize) -> f64 {
        self.features[sample * self.feature_count + feature]
    }

    /// Copy with labels replaced; features untouched.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.feature_count)
    }

    /// Reorders columns so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let f = self.feature_count;
        let mut seen = vec![false; f];
        if perm.len() != f || perm.iter().any(|&p| p >= f || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Data("column permutation is not a permutation".into()));
        }
        let mut features = Vec::with_capacity(self.features.len());
        for s in 0..self.sample_count() {
            let row = self.row(s);
            features.extend(perm.iter().map(|&p| row[p]));
        }
        Self::new(features, self.labels.clone(), f)
    }

    pub fn read_csv(path: &Path, has_header: bool) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(csv_err)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let line = i + 1 + usize::from(has_header);
            if record.len() < 2 {
                return Err(Error::Data(format!(
                    "{}: line {line}: need a label and at least one feature",
                    path.display()
                )));
            }
            match width {
                None => width = Some(record.len() - 1),
                Some(w) if w != record.len() - 1 => {
                    return Err(Error::Data(format!(
                        "{}: line {line}: expected {w} features, found {}",
                        path.display(),
                        record.len() - 1
                    )))
                }
                _ => {}
            }
            let label = match &record[0] {
                "0" | "0.0" => 0u8,
                "1" | "1.0" => 1u8,
                other => {
                    return Err(Error::Data(format!(
                        "{}: line {line}: label '{other}' is not 0 or 1",
                        path.display()
                    )))
                }
            };
            labels.push(label);
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!("{}: line {line}: '{field}' is not a number", path.display()))
                })?;
                features.push(v);
            }
        }
        let width = width.ok_or_else(|| Error::Data(format!("{}: no samples", path.display())))?;
        Self::new(features, labels, width)
    }

    pub fn write_csv(&self, path: &Path, header: bool) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        self.write_csv_to(&mut out, header).map_err(io_err)?;
        out.flush().map_err(io_err)
    }

    /// Values are printed with round-trip precision.
    pub fn write_csv_to<W: Write>(&self, out: &mut W, header: bool) -> std::io::Result<()> {
        if header {
            write!(out, "label")?;
            for j in 0..self.feature_count {
                write!(out, ",f{j}")?;
            }
            writeln!(out)?;
        }
        for s in 0..self.sample_count() {
            write!(out, "{}", self.labels[s])?;
            for v in self.row(s) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
