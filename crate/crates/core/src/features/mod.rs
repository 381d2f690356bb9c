//! Summary functions `f: R^m -> R^K` applied to raw simulator outputs before aggregation.

mod neural;
mod pca;
mod summary;

pub use neural::{load_weights_file, Activation, NeuralLayer, NeuralNet, Padding};
pub use pca::{fit_pca, PcaExtractor};
pub use summary::{summary_stats_extract, SummaryConfig};

use serde::{Deserialize, Serialize};

use crate::{Error, FeatureMatrix, Result};

/// A feature extractor. Serialized with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorSpec {
    SummaryStats(SummaryConfig),
    Pca(PcaExtractor),
    Neural(NeuralNet),
    /// Raw output used as features, e.g. the sojourn vector of a short G/G/1 run.
    Identity { dim: usize },
}

impl ExtractorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExtractorSpec::SummaryStats(c) => c.validate(),
            ExtractorSpec::Pca(p) => p.validate(),
            ExtractorSpec::Neural(_) => Ok(()),
            ExtractorSpec::Identity { dim } if *dim == 0 => {
                Err(Error::invalid("identity extractor needs dim >= 1"))
            }
            ExtractorSpec::Identity { .. } => Ok(()),
        }
    }

    /// Required input length, if fixed.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            ExtractorSpec::SummaryStats(_) => None,
            ExtractorSpec::Pca(p) => Some(p.input_dim()),
            ExtractorSpec::Neural(n) => Some(n.input_dim()),
            ExtractorSpec::Identity { dim } => Some(*dim),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ExtractorSpec::SummaryStats(c) => c.output_dim(),
            ExtractorSpec::Pca(p) => p.output_dim(),
            ExtractorSpec::Neural(n) => n.output_dim(),
            ExtractorSpec::Identity { dim } => *dim,
        }
    }

    pub fn extract(&self, sample: &[f64]) -> Result<Vec<f64>> {
        if let Some(m) = self.input_dim() {
            if sample.len() != m {
                return Err(Error::invalid(format!(
                    "sample has length {}, extractor expects {m}",
                    sample.len()
                )));
            }
        }
        let out = match self {
            ExtractorSpec::SummaryStats(c) => summary_stats_extract(sample, c)?,
            ExtractorSpec::Pca(p) => p.project(sample)?,
            ExtractorSpec::Neural(n) => n.forward(sample)?,
            ExtractorSpec::Identity { .. } => sample.to_vec(),
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("extract", "non-finite feature"));
        }
        Ok(out)
    }

    /// Extract every row; row `i` of the result is `extract(samples[i])`.
    pub fn extract_batch<R: AsRef<[f64]>>(&self, samples: &[R]) -> Result<FeatureMatrix> {
        let k = self.output_dim();
        let mut data = Vec::with_capacity(samples.len() * k);
        for s in samples {
            data.extend(self.extract(s.as_ref())?);
        }
        FeatureMatrix::new(samples.len(), k, data)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::parse(None, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_tagging() {
        let spec = ExtractorSpec::from_json(
            r#"{"kind": "summary_stats", "quantiles": [0.5], "acf_lags": [1], "squared_acf_lags": []}"#,
        )
        .unwrap();
        assert_eq!(spec.output_dim(), 6);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(ExtractorSpec::from_json(&back).unwrap(), spec);

        let neural = ExtractorSpec::from_json(
            r#"{"kind": "neural", "input_dim": 2, "output_dim": 1, "layers": [
                {"type": "dense", "weights": [[1, 2]], "bias": [0], "activation": "linear"}]}"#,
        )
        .unwrap();
        assert_eq!(neural.extract(&[1.0, 1.0]).unwrap(), vec![3.0]);
        let back = serde_json::to_string(&neural).unwrap();
        assert_eq!(ExtractorSpec::from_json(&back).unwrap(), neural);
    }

    #[test]
    fn batch_equals_elementwise() {
        let spec = ExtractorSpec::SummaryStats(SummaryConfig::default());
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|r| (0..40).map(|i| ((i * (r + 3)) % 7) as f64).collect())
            .collect();
        let batch = spec.extract_batch(&rows).unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(batch.row(i), spec.extract(r).unwrap().as_slice());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let spec = ExtractorSpec::Identity { dim: 3 };
        assert!(matches!(spec.extract(&[1.0]), Err(Error::InvalidInput(_))));
        assert!(ExtractorSpec::Identity { dim: 0 }.validate().is_err());
    }
}
