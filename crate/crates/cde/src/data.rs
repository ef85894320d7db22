//! Paired (x, y) samples, CSV interchange, and feature normalization.
//!
//! CSV files carry a mandatory header `x_0,...,x_{l-1},y_0,...,y_{m-1}`;
//! the header is what determines how many columns are conditioning
//! variables versus targets. Floats are written in shortest round-trip
//! form, so a write/read cycle reproduces the values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

/// Standard deviations below this floor are clamped before normalization
/// so constant columns cannot produce infinities.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// A dataset of N conditioning vectors x (dimension l) paired with N
/// target vectors y (dimension m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
}

impl Dataset {
    /// Errors unless `x` and `y` have the same number of rows and at least
    /// one row each.
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.n_rows() != y.n_rows() || x.n_rows() == 0 {
            return Err(CdeError::ShapeMismatch {
                context: "Dataset::new",
                expected: "equal, non-zero row counts for x and y".into(),
                got: format!("x: {} rows, y: {} rows", x.n_rows(), y.n_rows()),
            });
        }
        Ok(Dataset { x, y })
    }

    pub fn from_rows(x_rows: &[Vec<f64>], y_rows: &[Vec<f64>]) -> Result<Self> {
        Dataset::new(Matrix::from_rows(x_rows)?, Matrix::from_rows(y_rows)?)
    }

    pub fn n(&self) -> usize {
        self.x.n_rows()
    }

    pub fn x_dim(&self) -> usize {
        self.x.n_cols()
    }

    pub fn y_dim(&self) -> usize {
        self.y.n_cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        self.y.row(i)
    }

    /// Rows `[0, floor(fraction * N))`, the chronological head.
    pub fn head_fraction(&self, fraction: f64) -> Result<Dataset> {
        let k = self.split_index(fraction)?;
        let idx: Vec<usize> = (0..k).collect();
        self.select(&idx)
    }

    /// Rows `[floor(fraction * N), N)`, the chronological tail.
    pub fn tail_fraction(&self, fraction: f64) -> Result<Dataset> {
        let k = self.split_index(fraction)?;
        let idx: Vec<usize> = (k..self.n()).collect();
        self.select(&idx)
    }

    fn split_index(&self, fraction: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(CdeError::InvalidParameter(format!(
                "split fraction must lie in [0, 1], got {fraction}"
            )));
        }
        Ok((fraction * self.n() as f64).floor() as usize)
    }

    /// Selects the given rows into a new dataset; errors if empty.
    pub fn select(&self, idx: &[usize]) -> Result<Dataset> {
        Dataset::new(self.x.select_rows(idx), self.y.select_rows(idx))
    }

    /// Writes the RFC 4180 CSV representation with the canonical header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = Vec::with_capacity(self.x_dim() + self.y_dim());
        for j in 0..self.x_dim() {
            header.push(format!("x_{j}"));
        }
        for j in 0..self.y_dim() {
            header.push(format!("y_{j}"));
        }
        wtr.write_record(&header).map_err(csv_io)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            for &v in self.x.row(i) {
                record.push(v.to_string());
            }
            for &v in self.y.row(i) {
                record.push(v.to_string());
            }
            wtr.write_record(&record).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Parses a CSV produced by [`write_csv`] (or any file following the
    /// `x_*`/`y_*` header convention). Malformed rows are reported with
    /// their 1-based line number.
    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers().map_err(csv_io)?.clone();
        let (l, m) = parse_header(&header)?;
        let mut x_rows: Vec<Vec<f64>> = Vec::new();
        let mut y_rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2; // 1-based, after the header line
            let rec = rec.map_err(|e| CdeError::CsvParse {
                line,
                detail: e.to_string(),
            })?;
            if rec.len() != l + m {
                return Err(CdeError::CsvParse {
                    line,
                    detail: format!("expected {} fields, got {}", l + m, rec.len()),
                });
            }
            let mut vals = Vec::with_capacity(l + m);
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| CdeError::CsvParse {
                    line,
                    detail: format!("not a number: {field:?}"),
                })?;
                vals.push(v);
            }
            y_rows.push(vals.split_off(l));
            x_rows.push(vals);
        }
        if x_rows.is_empty() {
            return Err(CdeError::CsvParse {
                line: 2,
                detail: "no data rows".into(),
            });
        }
        Dataset::from_rows(&x_rows, &y_rows)
    }

    pub fn read_csv_path(path: &Path) -> Result<Dataset> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_io(e: csv::Error) -> CdeError {
    CdeError::CsvParse {
        line: 0,
        detail: e.to_string(),
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let mut l = 0;
    let mut m = 0;
    for (j, name) in header.iter().enumerate() {
        let name = name.trim();
        let expect_x = format!("x_{l}");
        let expect_y = format!("y_{m}");
        if m == 0 && name == expect_x {
            l += 1;
        } else if name == expect_y {
            m += 1;
        } else {
            return Err(CdeError::CsvParse {
                line: 1,
                detail: format!(
                    "unexpected column {j} named {name:?}; header must be x_0..x_{{l-1}},y_0..y_{{m-1}}"
                ),
            });
        }
    }
    if l == 0 || m == 0 {
        return Err(CdeError::CsvParse {
            line: 1,
            detail: "header needs at least one x_* and one y_* column".into(),
        });
    }
    Ok((l, m))
}

/// Per-column location/scale statistics of a training set.
///
/// `sigma_*` entries are population standard deviations floored at
/// [`SIGMA_FLOOR`]; `floored_x`/`floored_y` list the columns where the
/// floor was applied (effectively constant columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mu_x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub sigma_y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub floored_x: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub floored_y: Vec<usize>,
}

impl NormalizationStats {
    /// Identity transform: zero shift, unit scale. Normalizing with it is
    /// a no-op, which is how estimators run with normalization disabled.
    pub fn identity(x_dim: usize, y_dim: usize) -> Self {
        NormalizationStats {
            mu_x: vec![0.0; x_dim],
            sigma_x: vec![1.0; x_dim],
            mu_y: vec![0.0; y_dim],
            sigma_y: vec![1.0; y_dim],
            floored_x: Vec::new(),
            floored_y: Vec::new(),
        }
    }

    pub fn x_dim(&self) -> usize {
        self.mu_x.len()
    }

    pub fn y_dim(&self) -> usize {
        self.mu_y.len()
    }

    pub fn normalize_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mu_x.iter().zip(&self.sigma_x))
            .map(|(&v, (&mu, &s))| (v - mu) / s)
            .collect()
    }

    pub fn normalize_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mu_y.iter().zip(&self.sigma_y))
            .map(|(&v, (&mu, &s))| (v - mu) / s)
            .collect()
    }

    /// Sum of log target scales; densities over normalized targets are
    /// divided by `exp` of this to express them on the original scale.
    pub fn log_sigma_y_sum(&self) -> f64 {
        self.sigma_y.iter().map(|s| s.ln()).sum()
    }

    /// Applies the transform to every row of a dataset.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.x_dim() != self.x_dim() || data.y_dim() != self.y_dim() {
            return Err(CdeError::ShapeMismatch {
                context: "NormalizationStats::apply",
                expected: format!("x dim {}, y dim {}", self.x_dim(), self.y_dim()),
                got: format!("x dim {}, y dim {}", data.x_dim(), data.y_dim()),
            });
        }
        let x_rows: Vec<Vec<f64>> = (0..data.n()).map(|i| self.normalize_x(data.x_row(i))).collect();
        let y_rows: Vec<Vec<f64>> = (0..data.n()).map(|i| self.normalize_y(data.y_row(i))).collect();
        Dataset::from_rows(&x_rows, &y_rows)
    }
}

/// Estimates normalization statistics from `data` and returns them together
/// with the normalized dataset. Scales are population standard deviations;
/// columns with (near-)zero variance are floored and reported in the stats.
pub fn normalize_fit(data: &Dataset) -> (NormalizationStats, Dataset) {
    let mut stats = NormalizationStats {
        mu_x: data.x().col_means(),
        sigma_x: data.x().col_stds(),
        mu_y: data.y().col_means(),
        sigma_y: data.y().col_stds(),
        floored_x: Vec::new(),
        floored_y: Vec::new(),
    };
    for (j, s) in stats.sigma_x.iter_mut().enumerate() {
        if *s < SIGMA_FLOOR {
            *s = SIGMA_FLOOR;
            stats.floored_x.push(j);
        }
    }
    for (j, s) in stats.sigma_y.iter_mut().enumerate() {
        if *s < SIGMA_FLOOR {
            *s = SIGMA_FLOOR;
            stats.floored_y.push(j);
        }
    }
    let normalized = stats.apply(data).expect("stats built from same data");
    (stats, normalized)
}
