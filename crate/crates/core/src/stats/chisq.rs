use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::rng::rng_from_seed;
use crate::{Error, Result};

const MIN_DRAWS: usize = 10_000;
const PSD_TOL: f64 = 1e-9;

/// Monte Carlo law of `scale * Z^T S Z` with `Z ~ N(0, I_K)`.
///
/// `Z^T S Z` equals `sum_i lambda_i chi2_1` over the eigenvalues of `S`, so
/// each draw costs `K` squared normals.
#[derive(Debug, Clone)]
pub struct GeneralizedChiSquare {
    sorted: Vec<f64>,
}

impl GeneralizedChiSquare {
    /// `cov` is `k x k`, row-major. It is symmetrized and negative eigenvalues
    /// down to `-1e-9` are clipped to zero.
    pub fn simulate(cov: &[f64], k: usize, scale: f64, draws: usize, seed: u64) -> Result<Self> {
        if k == 0 || cov.len() != k * k {
            return Err(Error::invalid(format!(
                "covariance has {} entries, expected {k}x{k}",
                cov.len()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        if draws < MIN_DRAWS {
            return Err(Error::invalid(format!(
                "at least {MIN_DRAWS} Monte Carlo draws required, got {draws}"
            )));
        }
        let weights = clipped_eigenvalues(cov, k)?;
        let mut rng = rng_from_seed(seed);
        let mut sorted: Vec<f64> = (0..draws)
            .map(|_| {
                let q: f64 = weights
                    .iter()
                    .map(|w| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        w * z * z
                    })
                    .sum();
                scale * q
            })
            .collect();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        super::sorted_quantile(&self.sorted, p)
    }

    /// Fraction of draws at or above `x`.
    pub fn sf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < x);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    pub fn draws(&self) -> usize {
        self.sorted.len()
    }
}

/// Eigenvalues of `(S + S^T)/2`, clipped at zero; errors when any is below `-1e-9`.
pub(crate) fn clipped_eigenvalues(cov: &[f64], k: usize) -> Result<Vec<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance contains non-finite entries"));
    }
    let m = DMatrix::from_row_slice(k, k, cov);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut out = Vec::with_capacity(k);
    for &l in eig.eigenvalues.iter() {
        if l < -PSD_TOL {
            return Err(Error::invalid(format!(
                "covariance is not positive semidefinite (eigenvalue {l:e})"
            )));
        }
        out.push(l.max(0.0));
    }
    Ok(out)
}

/// Empirical `(1 - alpha)` quantile of `scale * Z^T S Z` over `draws` normal vectors.
pub fn gen_chisq_quantile(
    cov: &[f64],
    k: usize,
    scale: f64,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    super::check_alpha(alpha)?;
    Ok(GeneralizedChiSquare::simulate(cov, k, scale, draws, seed)?.quantile(1.0 - alpha))
}
