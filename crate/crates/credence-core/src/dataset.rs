//! Feature/label datasets backed by CSV.
//!
//! Format: header row, one column named `label` holding the class index, every
//! other column a feature (kept in file order). Floats are written with 17
//! significant digits so a write/read cycle reproduces the exact bits. An
//! optional sidecar `<path>.meta.json` carries a per-dimension feature range.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::fmt_f64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_range: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    feature_range: Vec<[f64; 2]>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Self {
        Dataset {
            features,
            labels,
            feature_range: None,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::invalid("dataset", "needs at least one row"));
        }
        if self.labels.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                what: "dataset labels",
                expected: self.features.len(),
                actual: self.labels.len(),
            });
        }
        let p = self.num_features();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::invalid(
                    "dataset",
                    format!("row {i} has {} features, expected {p}", row.len()),
                ));
            }
            if !crate::linalg::all_finite(row) {
                return Err(Error::invalid("dataset", format!("row {i} is non-finite")));
            }
        }
        if let Some(bad) = self.labels.iter().position(|l| *l >= num_classes) {
            return Err(Error::invalid(
                "dataset",
                format!(
                    "label {} at row {bad} out of range for {num_classes} classes",
                    self.labels[bad]
                ),
            ));
        }
        if let Some(r) = &self.feature_range {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "feature_range",
                    expected: p,
                    actual: r.len(),
                });
            }
        }
        Ok(())
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_os_string();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    pub fn to_csv_string(&self) -> String {
        let p = self.num_features();
        let mut out = String::new();
        out.push_str("label");
        for j in 0..p {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for (row, label) in self.features.iter().zip(&self.labels) {
            out.push_str(&label.to_string());
            for v in row {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_csv_string())?;
        if let Some(range) = &self.feature_range {
            let sidecar = Sidecar {
                feature_range: range.clone(),
            };
            let json = crate::report::to_json_precise(&sidecar)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            fs::write(Self::sidecar_path(path), json)?;
        }
        Ok(())
    }

    pub fn from_csv_string(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::invalid("dataset csv", "empty file"))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let label_col = columns
            .iter()
            .position(|c| *c == "label")
            .ok_or_else(|| Error::invalid("dataset csv", "no 'label' column in header"))?;

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Error::invalid(
                    "dataset csv",
                    format!(
                        "line {}: {} fields, header has {}",
                        lineno + 1,
                        fields.len(),
                        columns.len()
                    ),
                ));
            }
            let mut row = Vec::with_capacity(columns.len() - 1);
            for (i, field) in fields.iter().enumerate() {
                if i == label_col {
                    labels.push(field.parse::<usize>().map_err(|_| {
                        Error::invalid(
                            "dataset csv",
                            format!("line {}: bad label '{field}'", lineno + 1),
                        )
                    })?);
                } else {
                    row.push(field.parse::<f64>().map_err(|_| {
                        Error::invalid(
                            "dataset csv",
                            format!("line {}: bad number '{field}'", lineno + 1),
                        )
                    })?);
                }
            }
            features.push(row);
        }
        Ok(Dataset::new(features, labels))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::invalid("dataset csv", format!("{}: {e}", path.display()))
        })?;
        let mut ds = Self::from_csv_string(&text)?;
        let sidecar = Self::sidecar_path(path);
        if sidecar.exists() {
            let body = fs::read_to_string(&sidecar).map_err(|e| {
                Error::invalid("dataset sidecar", format!("{}: {e}", sidecar.display()))
            })?;
            let parsed: Sidecar = serde_json::from_str(&body).map_err(|e| {
                Error::invalid("dataset sidecar", format!("{}: {e}", sidecar.display()))
            })?;
            ds.feature_range = Some(parsed.feature_range);
        }
        Ok(ds)
    }

    /// Tight per-dimension bounding box of the features.
    pub fn bounding_box(&self) -> Vec<[f64; 2]> {
        let p = self.num_features();
        let mut out = vec![[f64::INFINITY, f64::NEG_INFINITY]; p];
        for row in &self.features {
            for (b, v) in out.iter_mut().zip(row) {
                b[0] = b[0].min(*v);
                b[1] = b[1].max(*v);
            }
        }
        out
    }
}
