use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::stats::rng::rng_from_seed;
use crate::{Error, FeatureMatrix, Result};

/// Centered projection onto `K` orthonormal loading vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaExtractor {
    pub mean: Vec<f64>,
    /// `K` rows of length `m`.
    pub loadings: Vec<Vec<f64>>,
    /// Covariance eigenvalue for each loading, decreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaExtractor {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.loadings.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mean.len();
        if self.loadings.is_empty() {
            return Err(Error::invalid("PCA extractor needs at least one loading"));
        }
        for (i, v) in self.loadings.iter().enumerate() {
            if v.len() != m {
                return Err(Error::invalid(format!(
                    "loading {i} has length {}, expected {m}",
                    v.len()
                )));
            }
            for (j, w) in self.loadings.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(v, w) - target).abs() > 1e-8 {
                    return Err(Error::invalid(format!("loadings {i} and {j} are not orthonormal")));
                }
            }
        }
        Ok(())
    }

    pub fn project(&self, sample: &[f64]) -> Result<Vec<f64>> {
        if sample.len() != self.mean.len() {
            return Err(Error::invalid(format!(
                "sample has length {}, PCA expects {}",
                sample.len(),
                self.mean.len()
            )));
        }
        let centered: Vec<f64> = sample.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.loadings.iter().map(|v| dot(v, &centered)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(mat: &[f64], m: usize, v: &[f64]) -> Vec<f64> {
    mat.chunks_exact(m).map(|row| dot(row, v)).collect()
}

/// Remove components along `basis` (assumed orthonormal) and renormalize.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Top-`k` principal directions by power iteration with deflation.
///
/// Each direction is iterated until `||C v - (v'Cv) v|| <= tol * max(1, lambda_1)`.
/// Signs are fixed so that the first component with magnitude above `1e-12` is positive.
pub fn fit_pca(data: &FeatureMatrix, k: usize, iters: usize, tol: f64) -> Result<PcaExtractor> {
    let (rows, m) = (data.rows(), data.cols());
    if rows < 2 {
        return Err(Error::invalid("PCA needs at least two rows"));
    }
    if k == 0 || k > m {
        return Err(Error::invalid(format!("K must lie in 1..={m}, got {k}")));
    }
    let mean = data.column_means();
    let mut cov = data.sample_covariance()?;
    let scale = cov
        .iter()
        .step_by(m + 1)
        .fold(0.0f64, |a, &d| a.max(d))
        .max(1.0);

    let mut rng = rng_from_seed(0x5eed_0f_9ca);
    let mut loadings: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        orthonormalize(&mut v, &loadings);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..iters.max(1) {
            let w = mat_vec(&cov, m, &v);
            let lambda = dot(&v, &w);
            residual = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= tol * scale {
                converged = true;
                break;
            }
            let mut next = w;
            if orthonormalize(&mut next, &loadings) <= f64::EPSILON * scale {
                // Remaining spectrum is numerically zero: any orthogonal unit vector is an eigenvector.
                converged = true;
                break;
            }
            v = next;
        }
        if !converged {
            return Err(Error::Convergence { residual });
        }
        orthonormalize(&mut v, &loadings);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let lambda = dot(&v, &mat_vec(&cov, m, &v));
        // Deflate: C <- C - lambda v v'.
        for a in 0..m {
            for b in 0..m {
                cov[a * m + b] -= lambda * v[a] * v[b];
            }
        }
        eigenvalues.push(lambda.max(0.0));
        loadings.push(v);
    }
    Ok(PcaExtractor {
        mean,
        loadings,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rng_from_seed(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * (1.0 + (i % cols) as f64)
            })
            .collect();
        FeatureMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn rank_one_line_is_recovered() {
        let dir = [1.0, 2.0, 2.0];
        let rows: Vec<Vec<f64>> = (-5..=5)
            .map(|t| dir.iter().map(|d| d * t as f64).collect())
            .collect();
        let data = FeatureMatrix::from_rows(&rows).unwrap();
        let pca = fit_pca(&data, 1, 1000, 1e-12).unwrap();
        let v = &pca.loadings[0];
        for (a, b) in v.iter().zip(dir) {
            assert!((a - b / 3.0).abs() < 1e-9);
        }
        for r in &rows {
            let score = pca.project(r).unwrap()[0];
            for ((x, l), mu) in r.iter().zip(v).zip(&pca.mean) {
                assert!((mu + score * l - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn loadings_are_orthonormal() {
        let data = random_matrix(50, 5, 1);
        let pca = fit_pca(&data, 5, 5000, 1e-12).unwrap();
        pca.validate().unwrap();
        for (i, a) in pca.loadings.iter().enumerate() {
            for (j, b) in pca.loadings.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - target).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn top_eigenvalue_matches_dense_solver() {
        let data = random_matrix(50, 5, 2);
        let pca = fit_pca(&data, 2, 5000, 1e-12).unwrap();
        let cov = DMatrix::from_row_slice(5, 5, &data.sample_covariance().unwrap());
        let eig = SymmetricEigen::new(cov);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        assert!((pca.eigenvalues[0] - vals[0]).abs() < 1e-6);
        assert!((pca.eigenvalues[1] - vals[1]).abs() < 1e-6);
    }

    #[test]
    fn projection_ignores_constant_shift() {
        let data = random_matrix(30, 4, 3);
        let shift = [10.0, -3.0, 7.5, 100.0];
        let shifted_rows: Vec<Vec<f64>> = data
            .iter_rows()
            .map(|r| r.iter().zip(shift).map(|(x, s)| x + s).collect())
            .collect();
        let shifted = FeatureMatrix::from_rows(&shifted_rows).unwrap();
        let a = fit_pca(&data, 2, 5000, 1e-12).unwrap();
        let b = fit_pca(&shifted, 2, 5000, 1e-12).unwrap();
        for (r, s) in data.iter_rows().zip(&shifted_rows) {
            let pa = a.project(r).unwrap();
            let pb = b.project(s).unwrap();
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn k_larger_than_m_rejected() {
        let data = random_matrix(10, 3, 4);
        assert!(matches!(fit_pca(&data, 4, 100, 1e-9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn reports_non_convergence() {
        // Two nearly equal leading eigenvalues converge slowly; two iterations are not enough.
        let data = random_matrix(40, 6, 5);
        assert!(matches!(
            fit_pca(&data, 1, 2, 1e-14),
            Err(Error::Convergence { .. })
        ));
    }
}
