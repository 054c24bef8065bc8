//! Datasets, standardization and back-transformation.
//!
//! Every path engine works on a [`StandardizedDataset`]: predictors are
//! centered and scaled to unit Euclidean norm, the response is centered.
//! Coefficients computed on that scale are mapped back with
//! [`destandardize`].

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FlashError, Result};

/// Raw design matrix and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
    /// Predictors that are constant; accepted here, rejected by [`standardize`].
    pub constant_columns: Vec<usize>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 || p < 1 {
            return Err(FlashError::Shape(format!(
                "need n >= 2 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        if y.len() != n {
            return Err(FlashError::Shape(format!(
                "response has {} entries but the design has {n} rows",
                y.len()
            )));
        }
        if column_names.len() != p {
            return Err(FlashError::Shape(format!(
                "{} column names for {p} predictors",
                column_names.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(FlashError::InvalidArgument(
                "design or response contains a non-finite value".into(),
            ));
        }
        let constant_columns = (0..p)
            .filter(|&j| {
                let col = x.column(j);
                col.iter().all(|&v| v == col[0])
            })
            .collect();
        Ok(Self {
            x,
            y,
            column_names,
            constant_columns,
        })
    }

    /// Builds a dataset with generated names `x1..xp`.
    pub fn from_parts(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Self::new(x, y, self.column_names.clone())
    }
}

/// Centered, unit-norm design with the metadata needed to undo the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    pub xs: DMatrix<f64>,
    pub ys: DVector<f64>,
    pub scaling: Standardization,
    pub column_names: Vec<String>,
}

/// Location and scale of every column of the original data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    pub y_mean: f64,
}

impl StandardizedDataset {
    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn p(&self) -> usize {
        self.xs.ncols()
    }

    /// Treats the standardized arrays as a raw dataset.
    pub fn as_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.xs.clone(), self.ys.clone(), self.column_names.clone())
    }
}

/// Coefficients on the original scale of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
}

impl CoefficientEstimate {
    pub fn new(beta: Vec<f64>, intercept: f64) -> Self {
        let support = beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect();
        Self {
            beta,
            intercept,
            support,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::from_element(x.nrows(), self.intercept);
        for &j in &self.support {
            out.axpy(self.beta[j], &x.column(j), 1.0);
        }
        out
    }

    pub fn nonzero(&self) -> usize {
        self.support.len()
    }
}

/// Reads a comma separated file with a header row. Quoted fields are not supported.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FlashError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, response)
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, response: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| FlashError::Csv("empty file".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let resp_idx = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| FlashError::MissingColumn(response.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(FlashError::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                cells.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (cell, name) in cells.iter().zip(&header) {
            let v: f64 = cell.trim().parse().map_err(|_| FlashError::Parse {
                row: i + 1,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FlashError::Parse {
                    row: i + 1,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    let n = rows.len();
    let p = header.len() - 1;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != resp_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let x = DMatrix::from_fn(n, p, |i, j| {
        let src = if j < resp_idx { j } else { j + 1 };
        rows[i][src]
    });
    let y = DVector::from_fn(n, |i, _| rows[i][resp_idx]);
    Dataset::new(x, y, names)
}

/// Writes a dataset as CSV with the response as the last column.
pub fn write_csv(d: &Dataset, response: &str) -> String {
    let mut out = d.column_names.join(",");
    out.push(',');
    out.push_str(response);
    out.push('\n');
    for i in 0..d.n() {
        for j in 0..d.p() {
            out.push_str(&d.x[(i, j)].to_string());
            out.push(',');
        }
        out.push_str(&d.y[i].to_string());
        out.push('\n');
    }
    out
}

pub(crate) fn center_and_scale(x: &DMatrix<f64>, names: &[String]) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let (n, p) = x.shape();
    let mut xs = x.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let mut col = xs.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        let reference = mean.abs().max(col.amax()).max(f64::MIN_POSITIVE);
        if norm <= 1e-12 * reference * (n as f64).sqrt() || norm == 0.0 {
            return Err(FlashError::ZeroVariance(names[j].clone()));
        }
        col /= norm;
        means.push(mean);
        scales.push(norm);
    }
    Ok((xs, means, scales))
}

/// Centers every column, scales it to unit L2 norm, and centers the response.
pub fn standardize(d: &Dataset) -> Result<StandardizedDataset> {
    let (xs, col_means, col_scales) = center_and_scale(&d.x, &d.column_names)?;
    let y_mean = d.y.mean();
    let ys = d.y.add_scalar(-y_mean);
    Ok(StandardizedDataset {
        xs,
        ys,
        scaling: Standardization {
            col_means,
            col_scales,
            y_mean,
        },
        column_names: d.column_names.clone(),
    })
}

/// Maps standardized coefficients back to the original scale.
pub fn destandardize(beta_std: &DVector<f64>, scaling: &Standardization) -> Result<CoefficientEstimate> {
    let p = scaling.col_scales.len();
    if beta_std.len() != p {
        return Err(FlashError::Shape(format!(
            "coefficient vector has length {}, expected {p}",
            beta_std.len()
        )));
    }
    let beta: Vec<f64> = beta_std
        .iter()
        .zip(&scaling.col_scales)
        .map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s })
        .collect();
    let intercept = scaling.y_mean
        - beta
            .iter()
            .zip(&scaling.col_means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    Ok(CoefficientEstimate::new(beta, intercept))
}

/// `Xs^T (ys - Xs beta)`.
pub fn residual_correlations(sd: &StandardizedDataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if beta.len() != sd.p() {
        return Err(FlashError::Shape(format!(
            "coefficient vector has length {}, expected {}",
            beta.len(),
            sd.p()
        )));
    }
    let resid = &sd.ys - &sd.xs * beta;
    Ok(sd.xs.tr_mul(&resid))
}
