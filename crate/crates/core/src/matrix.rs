use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major matrix of finite reals: one sample per row, one feature per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("feature matrix needs at least one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "feature matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("feature matrix needs at least one row"))?;
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[k]).collect()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Unbiased sample covariance (divisor `rows - 1`), `cols x cols` row-major.
    pub fn sample_covariance(&self) -> Result<Vec<f64>> {
        if self.rows < 2 {
            return Err(Error::invalid("sample covariance needs at least two rows"));
        }
        let k = self.cols;
        let means = self.column_means();
        let mut cov = vec![0.0; k * k];
        let mut centered = vec![0.0; k];
        for r in self.iter_rows() {
            for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&means)) {
                *c = v - m;
            }
            for a in 0..k {
                let ca = centered[a];
                for b in a..k {
                    cov[a * k + b] += ca * centered[b];
                }
            }
        }
        let denom = (self.rows - 1) as f64;
        for a in 0..k {
            for b in a..k {
                let v = cov[a * k + b] / denom;
                cov[a * k + b] = v;
                cov[b * k + a] = v;
            }
        }
        Ok(cov)
    }

    /// Unbiased per-column sample variances.
    pub fn column_variances(&self) -> Result<Vec<f64>> {
        if self.rows < 2 {
            return Err(Error::invalid("sample variance needs at least two rows"));
        }
        let means = self.column_means();
        let mut var = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let denom = (self.rows - 1) as f64;
        var.iter_mut().for_each(|s| *s /= denom);
        Ok(var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(FeatureMatrix::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn covariance_of_two_columns() {
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let cov = m.sample_covariance().unwrap();
        assert_eq!(cov, vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(m.column_variances().unwrap(), vec![1.0, 4.0]);
        assert_eq!(m.column_means(), vec![2.0, 4.0]);
    }
}
