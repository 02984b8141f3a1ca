//! Datasets: plain observation matrices and labeled classification data,
//! with CSV ingestion.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::numkit::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("row {row}: could not parse field {field:?} as a number")]
    BadNumber { row: usize, field: String },
    #[error("row {row}: label {value} is not in {{-1, 1}} or {{0, 1}}")]
    BadLabel { row: usize, value: f64 },
}

/// `n` observations, each a point in `R^p`, stored row-major.
///
/// Classification observations pack the label first: a row is `(y, z_1..z_p)`
/// and loss models over labeled data interpret it that way.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    obs_dim: usize,
    rows: Vec<f64>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Invalid("dataset needs at least one observation".into()));
        }
        let obs_dim = rows[0].len();
        if obs_dim == 0 {
            return Err(DataError::Invalid("observations need at least one coordinate".into()));
        }
        let mut flat = Vec::with_capacity(rows.len() * obs_dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != obs_dim {
                return Err(DataError::Invalid(format!(
                    "row {i} has {} coordinates, expected {obs_dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Invalid(format!("row {i} has a non-finite coordinate")));
            }
            flat.extend_from_slice(r);
        }
        Ok(Dataset {
            n: rows.len(),
            obs_dim,
            rows: flat,
        })
    }

    pub fn from_flat(n: usize, obs_dim: usize, rows: Vec<f64>) -> Result<Self, DataError> {
        if n == 0 || obs_dim == 0 {
            return Err(DataError::Invalid("dataset must be non-empty".into()));
        }
        if rows.len() != n * obs_dim {
            return Err(DataError::Invalid(format!(
                "flat data length {} does not match {n}x{obs_dim}",
                rows.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite coordinate".into()));
        }
        Ok(Dataset { n, obs_dim, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.obs_dim)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.obs_dim];
        for r in self.iter_rows() {
            for (mj, v) in m.iter_mut().zip(r) {
                *mj += v;
            }
        }
        for mj in &mut m {
            *mj /= self.n as f64;
        }
        m
    }

    /// Sample covariance with `1/(n-1)` normalization.
    pub fn sample_covariance(&self) -> Matrix {
        let mean = self.mean();
        let mut c = Matrix::zeros(self.obs_dim, self.obs_dim);
        let mut centered = vec![0.0; self.obs_dim];
        for r in self.iter_rows() {
            for (k, v) in centered.iter_mut().enumerate() {
                *v = r[k] - mean[k];
            }
            c.add_outer(&centered, 1.0);
        }
        c.scaled(1.0 / (self.n as f64 - 1.0).max(1.0))
    }

    /// Reads all numeric columns of a headered CSV as coordinates.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(record.len());
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| DataError::BadNumber {
                    row: i,
                    field: field.to_string(),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Dataset::from_rows(&rows)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(file)
    }
}

/// Per-covariate standardization parameters (train-set z-scores).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Binary classification data: covariates `z` and labels `y` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    z: Matrix,
    y: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(z: Matrix, y: Vec<f64>) -> Result<Self, DataError> {
        if z.rows() != y.len() {
            return Err(DataError::Invalid(format!(
                "{} covariate rows but {} labels",
                z.rows(),
                y.len()
            )));
        }
        if z.rows() == 0 || z.cols() == 0 {
            return Err(DataError::Invalid("labeled dataset must be non-empty".into()));
        }
        if !z.all_finite() {
            return Err(DataError::Invalid("non-finite covariate".into()));
        }
        for (i, &v) in y.iter().enumerate() {
            if v != 1.0 && v != -1.0 {
                return Err(DataError::BadLabel { row: i, value: v });
            }
        }
        Ok(LabeledDataset { z, y })
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }

    pub fn covariate_dim(&self) -> usize {
        self.z.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.z
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        self.z.row(i)
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// Packs rows as `(y, z_1..z_p)` for loss models over labeled data.
    pub fn to_dataset(&self) -> Dataset {
        let p = self.covariate_dim();
        let mut flat = Vec::with_capacity(self.n() * (p + 1));
        for i in 0..self.n() {
            flat.push(self.y[i]);
            flat.extend_from_slice(self.z.row(i));
        }
        Dataset::from_flat(self.n(), p + 1, flat).expect("validated parts")
    }

    /// Train-set z-scoring; constant covariates keep sd 1 so the transform
    /// stays invertible.
    pub fn standardize(&self) -> (LabeledDataset, Standardization) {
        let n = self.n() as f64;
        let p = self.covariate_dim();
        let mut mean = vec![0.0; p];
        for i in 0..self.n() {
            for (m, v) in mean.iter_mut().zip(self.z.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; p];
        for i in 0..self.n() {
            for (k, v) in self.z.row(i).iter().enumerate() {
                var[k] += (v - mean[k]).powi(2);
            }
        }
        let sd: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / (n - 1.0).max(1.0)).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let params = Standardization { mean, sd };
        let mut zs = Matrix::zeros(self.n(), p);
        for i in 0..self.n() {
            let row = params.apply(self.z.row(i));
            zs.row_mut(i).copy_from_slice(&row);
        }
        (
            LabeledDataset {
                z: zs,
                y: self.y.clone(),
            },
            params,
        )
    }

    /// Reads a headered CSV with a label column named `y` (values in
    /// `{-1, 1}` or `{0, 1}`, 0 mapped to -1); all other columns are numeric
    /// covariates in file order.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h.trim() == "y")
            .ok_or_else(|| DataError::Invalid("no column named \"y\" in CSV header".into()))?;
        let mut z_rows: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(record.len().saturating_sub(1));
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| DataError::BadNumber {
                    row: i,
                    field: field.to_string(),
                })?;
                if j == y_col {
                    let label = if v == 1.0 {
                        1.0
                    } else if v == -1.0 || v == 0.0 {
                        -1.0
                    } else {
                        return Err(DataError::BadLabel { row: i, value: v });
                    };
                    y.push(label);
                } else {
                    row.push(v);
                }
            }
            z_rows.push(row);
        }
        if z_rows.is_empty() {
            return Err(DataError::Invalid("dataset needs at least one observation".into()));
        }
        let z = Matrix::from_rows(&z_rows)
            .map_err(|e| DataError::Invalid(e.to_string()))?;
        LabeledDataset::new(z, y)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        LabeledDataset::from_csv_reader(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_unlabeled() {
        let csv = "a,b\n1.0,2.0\n3.5,-1\n";
        let ds = Dataset::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.obs_dim(), 2);
        assert_eq!(ds.row(1), &[3.5, -1.0]);
    }

    #[test]
    fn csv_labeled_maps_zero_to_minus_one() {
        let csv = "z1,y,z2\n0.5,0,1.5\n-0.2,1,0.0\n";
        let ds = LabeledDataset::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
        assert_eq!(ds.covariate_row(0), &[0.5, 1.5]);
    }

    #[test]
    fn csv_labeled_rejects_other_labels() {
        let csv = "y,z\n2,0.1\n";
        assert!(matches!(
            LabeledDataset::from_csv_reader(csv.as_bytes()),
            Err(DataError::BadLabel { .. })
        ));
    }

    #[test]
    fn packed_rows_put_label_first() {
        let z = Matrix::from_rows(&[vec![0.5, 1.0], vec![-0.5, 2.0]]).unwrap();
        let ds = LabeledDataset::new(z, vec![1.0, -1.0]).unwrap();
        let packed = ds.to_dataset();
        assert_eq!(packed.row(0), &[1.0, 0.5, 1.0]);
        assert_eq!(packed.row(1), &[-1.0, -0.5, 2.0]);
    }

    #[test]
    fn standardize_round_trip() {
        let z = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![5.0]]).unwrap();
        let ds = LabeledDataset::new(z, vec![1.0, -1.0, 1.0]).unwrap();
        let (std_ds, params) = ds.standardize();
        assert!((params.mean[0] - 3.0).abs() < 1e-14);
        let back: Vec<f64> = (0..3)
            .map(|i| std_ds.covariate_row(i)[0] * params.sd[0] + params.mean[0])
            .collect();
        assert!((back[0] - 1.0).abs() < 1e-12);
        assert!((back[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn mean_and_covariance() {
        let ds = Dataset::from_rows(&[vec![1.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(ds.mean(), vec![2.0, 2.0]);
        let c = ds.sample_covariance();
        assert!((c[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((c[(1, 1)] - 8.0).abs() < 1e-12);
        assert!((c[(0, 1)] - 4.0).abs() < 1e-12);
    }
}
