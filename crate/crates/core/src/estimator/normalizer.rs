use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ComplexityFeatures;
use crate::error::{Error, Result};

/// Threshold calibrated on HotpotQA easy/hard questions with the original
/// parser stack. Shipped only as a default; recalibrate for other annotators.
pub const HOTPOT_LAMBDA: f64 = 0.682;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityLabel {
    Simple,
    Complex,
}

impl ComplexityLabel {
    pub const ALL: [ComplexityLabel; 2] = [ComplexityLabel::Simple, ComplexityLabel::Complex];

    pub fn index(self) -> usize {
        match self {
            ComplexityLabel::Simple => 0,
            ComplexityLabel::Complex => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityLabel::Simple => "simple",
            ComplexityLabel::Complex => "complex",
        }
    }
}

impl std::fmt::Display for ComplexityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ComplexityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(ComplexityLabel::Simple),
            "complex" => Ok(ComplexityLabel::Complex),
            other => Err(Error::Invalid(format!("complexity must be simple|complex, got `{other}`"))),
        }
    }
}

/// Per-feature corpus extremes plus the decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub min: [f64; 5],
    pub max: [f64; 5],
    pub lambda: f64,
}

impl FeatureNormalizer {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("normalizer", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let n: Self = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if !(0.0..=1.0).contains(&n.lambda) || n.min.iter().zip(&n.max).any(|(a, b)| a > b) {
            return Err(Error::Data(format!("{}: normalizer violates min <= max or 0 <= lambda <= 1", path.display())));
        }
        Ok(n)
    }
}

pub fn fit_normalizer(features: &[ComplexityFeatures], lambda: f64) -> Result<FeatureNormalizer> {
    if features.is_empty() {
        return Err(Error::Invalid("cannot fit a normalizer on an empty corpus".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    let mut min = [f64::INFINITY; 5];
    let mut max = [f64::NEG_INFINITY; 5];
    for f in features {
        for (i, v) in f.to_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(FeatureNormalizer { min, max, lambda })
}

/// Min-max scaling clamped to `[0, 1]`; a constant feature maps to 0.
pub fn normalize(features: &ComplexityFeatures, normalizer: &FeatureNormalizer) -> [f64; 5] {
    let raw = features.to_array();
    std::array::from_fn(|i| {
        let (lo, hi) = (normalizer.min[i], normalizer.max[i]);
        if hi <= lo {
            0.0
        } else {
            ((raw[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    })
}

pub fn cpx_score(normalized: &[f64; 5]) -> f64 {
    normalized.iter().sum::<f64>() / 5.0
}

/// Complex iff the score is strictly above the threshold.
pub fn classify(score: f64, lambda: f64) -> ComplexityLabel {
    if score > lambda {
        ComplexityLabel::Complex
    } else {
        ComplexityLabel::Simple
    }
}

/// Normalised vector, score and label in one go.
pub fn score_features(features: &ComplexityFeatures, normalizer: &FeatureNormalizer) -> ([f64; 5], f64, ComplexityLabel) {
    let norm = normalize(features, normalizer);
    let score = cpx_score(&norm);
    (norm, score, classify(score, normalizer.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(v: f64) -> ComplexityFeatures {
        ComplexityFeatures::from_array([v; 5])
    }

    #[test]
    fn fit_extremes() {
        let n = fit_normalizer(&[feats(1.0), feats(3.0), feats(5.0)], 0.5).unwrap();
        assert_eq!(n.min[0], 1.0);
        assert_eq!(n.max[0], 5.0);
        let c = fit_normalizer(&[feats(2.0), feats(2.0)], 0.5).unwrap();
        assert_eq!((c.min[3], c.max[3]), (2.0, 2.0));
        let single = fit_normalizer(&[ComplexityFeatures::from_array([1.0, 2.0, 3.0, 4.0, 5.0])], 0.5).unwrap();
        assert_eq!(single.min, single.max);
        assert!(fit_normalizer(&[], 0.5).is_err());
    }

    #[test]
    fn normalize_endpoints_and_clamp() {
        let n = fit_normalizer(&[feats(1.0), feats(5.0)], 0.5).unwrap();
        assert_eq!(normalize(&feats(1.0), &n), [0.0; 5]);
        assert_eq!(normalize(&feats(5.0), &n), [1.0; 5]);
        assert_eq!(normalize(&feats(3.0), &n), [0.5; 5]);
        assert_eq!(normalize(&feats(9.0), &n), [1.0; 5]);
        assert_eq!(normalize(&feats(-9.0), &n), [0.0; 5]);
        let constant = fit_normalizer(&[feats(2.0)], 0.5).unwrap();
        assert_eq!(normalize(&feats(7.0), &constant), [0.0; 5]);
    }

    #[test]
    fn score_is_the_mean() {
        assert_eq!(cpx_score(&[0.0; 5]), 0.0);
        assert_eq!(cpx_score(&[1.0; 5]), 1.0);
        assert!((cpx_score(&[0.2, 0.4, 0.6, 0.8, 1.0]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(classify(0.70, HOTPOT_LAMBDA), ComplexityLabel::Complex);
        assert_eq!(classify(0.682, HOTPOT_LAMBDA), ComplexityLabel::Simple);
        assert_eq!(classify(0.0, 0.0), ComplexityLabel::Simple);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Complex".parse::<ComplexityLabel>().unwrap(), ComplexityLabel::Complex);
        assert!("medium".parse::<ComplexityLabel>().is_err());
    }
}
