use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-feature scaling fitted on a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub std: Vec<f64>,
    pub mean: Vec<f64>,
    pub centered: bool,
}

impl Normalization {
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let shifted = if self.centered { v - self.mean[j] } else { v };
                shifted / self.std[j]
            })
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let scaled = v * self.std[j];
                if self.centered {
                    scaled + self.mean[j]
                } else {
                    scaled
                }
            })
            .collect()
    }
}

/// Tabular samples: an `n × p` feature matrix and `n × q` targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub targets: Array2<f64>,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub feature_std: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub normalized: bool,
    pub centered: bool,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    feature_names: Vec<String>,
    target_names: Vec<String>,
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        let p = features.ncols();
        let q = targets.ncols();
        let feature_names = (0..p).map(|j| format!("x{j}")).collect();
        let target_names = if q == 1 {
            vec!["y".to_string()]
        } else {
            (0..q).map(|j| format!("y{j}")).collect()
        };
        Self::with_names(features, targets, feature_names, target_names)
    }

    pub fn with_names(
        features: Array2<f64>,
        targets: Array2<f64>,
        feature_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} target rows",
                features.nrows(),
                targets.nrows()
            )));
        }
        if feature_names.len() != features.ncols() || target_names.len() != targets.ncols() {
            return Err(Error::Shape("column names do not match the data".into()));
        }
        if features.iter().chain(targets.iter()).any(|v| v.is_nan()) {
            return Err(Error::Config("dataset contains NaN".into()));
        }
        let p = features.ncols();
        Ok(Dataset {
            features,
            targets,
            feature_names,
            target_names,
            feature_std: vec![1.0; p],
            feature_mean: vec![0.0; p],
            normalized: false,
            centered: false,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).to_vec()
    }

    /// Divides every feature column by its population standard deviation,
    /// subtracting the mean first only when `center` is set.
    pub fn normalize(&self, center: bool) -> Result<Dataset> {
        if self.normalized {
            return Err(Error::Config("dataset is already normalized".into()));
        }
        let stats = self.fit_normalization(center)?;
        self.normalize_with(&stats)
    }

    pub fn fit_normalization(&self, center: bool) -> Result<Normalization> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = self.len() as f64;
        let mut std = Vec::with_capacity(self.n_features());
        let mut mean = Vec::with_capacity(self.n_features());
        for (j, col) in self.features.axis_iter(Axis(1)).enumerate() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 0.0 && s.is_finite() {
                std.push(s);
            } else {
                log::warn!(
                    "feature {} is constant; leaving it unscaled",
                    self.feature_names[j]
                );
                std.push(1.0);
            }
            mean.push(m);
        }
        Ok(Normalization {
            std,
            mean,
            centered: center,
        })
    }

    pub fn normalize_with(&self, stats: &Normalization) -> Result<Dataset> {
        if self.normalized {
            return Err(Error::Config("dataset is already normalized".into()));
        }
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if stats.std.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "normalization has {} features, dataset {}",
                stats.std.len(),
                self.n_features()
            )));
        }
        let mut features = self.features.clone();
        for mut row in features.rows_mut() {
            let scaled = stats.apply(row.as_slice().expect("standard layout"));
            row.assign(&ndarray::aview1(&scaled));
        }
        Ok(Dataset {
            features,
            feature_std: stats.std.clone(),
            feature_mean: stats.mean.clone(),
            normalized: true,
            centered: stats.centered,
            ..self.clone()
        })
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalized.then(|| Normalization {
            std: self.feature_std.clone(),
            mean: self.feature_mean.clone(),
            centered: self.centered,
        })
    }

    pub fn denormalize(&self) -> Dataset {
        let Some(stats) = self.normalization() else {
            return self.clone();
        };
        let mut features = self.features.clone();
        for mut row in features.rows_mut() {
            let raw = stats.invert(row.as_slice().expect("standard layout"));
            row.assign(&ndarray::aview1(&raw));
        }
        let p = self.n_features();
        Dataset {
            features,
            feature_std: vec![1.0; p],
            feature_mean: vec![0.0; p],
            normalized: false,
            centered: false,
            ..self.clone()
        }
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            ..self.clone()
        }
    }

    /// Column permutation: new column `j` is old column `perm[j]`.
    pub fn permute_features(&self, perm: &[usize]) -> Dataset {
        let pick = |v: &[f64]| perm.iter().map(|&j| v[j]).collect::<Vec<_>>();
        Dataset {
            features: self.features.select(Axis(1), perm),
            feature_names: perm.iter().map(|&j| self.feature_names[j].clone()).collect(),
            feature_std: pick(&self.feature_std),
            feature_mean: pick(&self.feature_mean),
            ..self.clone()
        }
    }

    /// CSV text: a header row, then one sample per line with targets last.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .chain(&self.target_names)
            .map(String::as_str)
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (x, y) in self.features.rows().into_iter().zip(self.targets.rows()) {
            let cells: Vec<String> = x.iter().chain(y.iter()).map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads a CSV whose target columns are the ones named `y*`.
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Dataset, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        let is_target: Vec<bool> = header.iter().map(|h| h.starts_with('y')).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut n = 0;
        for record in reader.records() {
            let record = record.map_err(|e| e.to_string())?;
            if record.len() != header.len() {
                return Err(format!("line {}: expected {} fields", n + 2, header.len()));
            }
            for (cell, &target) in record.iter().zip(&is_target) {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| format!("line {}: `{cell}` is not a number", n + 2))?;
                if target {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
            n += 1;
        }
        let names = |want: bool| {
            header
                .iter()
                .zip(&is_target)
                .filter(|(_, &t)| t == want)
                .map(|(h, _)| h.clone())
                .collect::<Vec<_>>()
        };
        let (feature_names, target_names) = (names(false), names(true));
        let features = Array2::from_shape_vec((n, feature_names.len()), xs).map_err(|e| e.to_string())?;
        let targets = Array2::from_shape_vec((n, target_names.len()), ys).map_err(|e| e.to_string())?;
        Dataset::with_names(features, targets, feature_names, target_names).map_err(|e| e.to_string())
    }

    pub fn to_json_string(&self) -> String {
        let doc = DatasetJson {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            features: self.features.rows().into_iter().map(|r| r.to_vec()).collect(),
            targets: self.targets.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("dataset serializes")
    }

    pub fn read_json(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: DatasetJson = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let to_array = |rows: Vec<Vec<f64>>, width: usize| {
            let n = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            Array2::from_shape_vec((n, width), flat).map_err(|e| Error::parse(path, e))
        };
        let p = doc.feature_names.len();
        let q = doc.target_names.len();
        Dataset::with_names(
            to_array(doc.features, p)?,
            to_array(doc.targets, q)?,
            doc.feature_names,
            doc.target_names,
        )
    }

    /// Loads CSV or JSON by file extension.
    pub fn load(path: &Path) -> Result<Dataset> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::read_json(path),
            _ => Self::read_csv(path),
        }
    }

    /// SHA-256 of the CSV rendering.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}
