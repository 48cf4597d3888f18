use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("train_ratio must lie strictly between 0 and 1, got {0}")]
    TrainRatio(f64),
    #[error("corruption_rate must lie strictly between 0 and 1, got {0}")]
    CorruptionRate(f64),
    #[error("poisson_lambda must be positive and finite, got {0}")]
    PoissonLambda(f64),
    #[error("category_lo ({lo}) must be below category_hi ({hi})")]
    CategoryBounds { lo: usize, hi: usize },
    #[error("noise_modes_per_sample must be between 1 and 5, got {0}")]
    ModesPerSample(usize),
}

/// Constants shared by every pipeline stage.
///
/// The epoch counts are never used for training here; they are echoed into
/// split manifests for downstream trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train_ratio: f64,
    pub category_lo: usize,
    pub category_hi: usize,
    pub corruption_rate: f64,
    pub poisson_lambda: f64,
    pub noise_modes_per_sample: usize,
    pub cross_epochs: u32,
    pub same_epochs: u32,
    pub bleu_noticeable_threshold: f64,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            category_lo: 100,
            category_hi: 150,
            corruption_rate: 0.15,
            poisson_lambda: 3.0,
            noise_modes_per_sample: 2,
            cross_epochs: 10,
            same_epochs: 30,
            bleu_noticeable_threshold: 2.0,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(ConfigError::TrainRatio(self.train_ratio));
        }
        if !(self.corruption_rate > 0.0 && self.corruption_rate < 1.0) {
            return Err(ConfigError::CorruptionRate(self.corruption_rate));
        }
        if !(self.poisson_lambda > 0.0 && self.poisson_lambda.is_finite()) {
            return Err(ConfigError::PoissonLambda(self.poisson_lambda));
        }
        if self.category_lo >= self.category_hi {
            return Err(ConfigError::CategoryBounds {
                lo: self.category_lo,
                hi: self.category_hi,
            });
        }
        if !(1..=5).contains(&self.noise_modes_per_sample) {
            return Err(ConfigError::ModesPerSample(self.noise_modes_per_sample));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.train_ratio, 0.8);
        assert_eq!(cfg.corruption_rate, 0.15);
        assert_eq!(cfg.poisson_lambda, 3.0);
        assert_eq!((cfg.cross_epochs, cfg.same_epochs), (10, 30));
        assert_eq!(cfg.bleu_noticeable_threshold, 2.0);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = PipelineConfig { train_ratio: 1.0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::TrainRatio(1.0)));
        let bad = PipelineConfig { corruption_rate: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ConfigError::CorruptionRate(_))));
        let bad = PipelineConfig { poisson_lambda: -1.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ConfigError::PoissonLambda(_))));
        let bad = PipelineConfig { category_lo: 150, category_hi: 100, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ConfigError::CategoryBounds { .. })));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"rng_seed": 7}"#).unwrap();
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.train_ratio, 0.8);
    }
}
