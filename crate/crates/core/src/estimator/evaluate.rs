use serde::{Deserialize, Serialize};

use super::{classify, ComplexityLabel};
use crate::error::{Error, Result};

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub ts_ps: usize,
    pub ts_pc: usize,
    pub tc_ps: usize,
    pub tc_pc: usize,
}

impl ConfusionMatrix {
    pub fn from_pairs(pred: &[ComplexityLabel], gold: &[ComplexityLabel]) -> Result<Self> {
        if pred.len() != gold.len() {
            return Err(Error::Invalid(format!("{} predictions vs {} gold labels", pred.len(), gold.len())));
        }
        let mut m = Self::default();
        for (p, g) in pred.iter().zip(gold) {
            use ComplexityLabel::*;
            match (g, p) {
                (Simple, Simple) => m.ts_ps += 1,
                (Simple, Complex) => m.ts_pc += 1,
                (Complex, Simple) => m.tc_ps += 1,
                (Complex, Complex) => m.tc_pc += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.ts_ps + self.ts_pc + self.tc_ps + self.tc_pc
    }

    /// `(true positives, false positives, false negatives, support)` for a class.
    pub fn class_counts(&self, class: ComplexityLabel) -> (usize, usize, usize, usize) {
        match class {
            ComplexityLabel::Simple => (self.ts_ps, self.tc_ps, self.ts_pc, self.ts_ps + self.ts_pc),
            ComplexityLabel::Complex => (self.tc_pc, self.ts_pc, self.tc_ps, self.tc_ps + self.tc_pc),
        }
    }

    pub fn f1(&self, class: ComplexityLabel) -> f64 {
        let (tp, fp, fne, _) = self.class_counts(class);
        class_f1(tp, fp, fne)
    }

    pub fn macro_f1(&self) -> f64 {
        0.5 * (self.f1(ComplexityLabel::Simple) + self.f1(ComplexityLabel::Complex))
    }

    pub fn weighted_f1(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        ComplexityLabel::ALL
            .iter()
            .map(|&c| self.class_counts(c).3 as f64 * self.f1(c))
            .sum::<f64>()
            / total as f64
    }
}

/// `2PR / (P + R)`, with 0 whenever precision and recall are both 0 or undefined.
pub fn class_f1(tp: usize, fp: usize, fne: usize) -> f64 {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fne == 0 { 0.0 } else { tp as f64 / (tp + fne) as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn macro_f1(pred: &[ComplexityLabel], gold: &[ComplexityLabel]) -> Result<f64> {
    Ok(ConfusionMatrix::from_pairs(pred, gold)?.macro_f1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEvaluation {
    pub confusion: ConfusionMatrix,
    pub f1_simple: f64,
    pub f1_complex: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl From<ConfusionMatrix> for EstimatorEvaluation {
    fn from(confusion: ConfusionMatrix) -> Self {
        Self {
            f1_simple: confusion.f1(ComplexityLabel::Simple),
            f1_complex: confusion.f1(ComplexityLabel::Complex),
            macro_f1: confusion.macro_f1(),
            weighted_f1: confusion.weighted_f1(),
            confusion,
        }
    }
}

pub fn evaluate_estimator(pred: &[ComplexityLabel], gold: &[ComplexityLabel]) -> Result<EstimatorEvaluation> {
    if pred.is_empty() {
        return Err(Error::Invalid("nothing to evaluate".into()));
    }
    Ok(ConfusionMatrix::from_pairs(pred, gold)?.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub macro_f1: f64,
}

/// Grid search over `lambda in {0.00, 0.01, ..., 1.00}` for the best
/// macro-F1; the smallest maximiser wins.
pub fn calibrate_threshold(scores: &[f64], gold: &[ComplexityLabel]) -> Result<Calibration> {
    if scores.len() != gold.len() {
        return Err(Error::Invalid(format!("{} scores vs {} gold labels", scores.len(), gold.len())));
    }
    let has = |c| gold.contains(&c);
    if !has(ComplexityLabel::Simple) || !has(ComplexityLabel::Complex) {
        return Err(Error::Invalid("calibration needs both simple and complex gold labels".into()));
    }
    let mut best = Calibration { lambda: 0.0, macro_f1: f64::NEG_INFINITY };
    for step in 0..=100u32 {
        let lambda = f64::from(step) / 100.0;
        let pred: Vec<ComplexityLabel> = scores.iter().map(|&s| classify(s, lambda)).collect();
        let f1 = ConfusionMatrix::from_pairs(&pred, gold)?.macro_f1();
        if f1 > best.macro_f1 {
            best = Calibration { lambda, macro_f1: f1 };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ComplexityLabel::*;

    fn expand(m: ConfusionMatrix) -> (Vec<ComplexityLabel>, Vec<ComplexityLabel>) {
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        for (n, g, p) in [(m.ts_ps, Simple, Simple), (m.ts_pc, Simple, Complex), (m.tc_ps, Complex, Simple), (m.tc_pc, Complex, Complex)] {
            for _ in 0..n {
                gold.push(g);
                pred.push(p);
            }
        }
        (pred, gold)
    }

    #[test]
    fn published_in_domain_counts() {
        let m = ConfusionMatrix { ts_ps: 5271, ts_pc: 155, tc_ps: 210, tc_pc: 3407 };
        let (pred, gold) = expand(m);
        let e = evaluate_estimator(&pred, &gold).unwrap();
        assert_eq!(e.confusion, m);
        // (10542/10907 + 6814/7179) / 2
        let expected = 0.5 * (10542.0 / 10907.0 + 6814.0 / 7179.0);
        assert!((e.macro_f1 - expected).abs() < 1e-12);
        assert!((e.macro_f1 - 0.958).abs() < 5e-4);
    }

    #[test]
    fn published_out_domain_counts() {
        let m = ConfusionMatrix { ts_ps: 93, ts_pc: 15, tc_ps: 12, tc_pc: 67 };
        let (pred, gold) = expand(m);
        let e = evaluate_estimator(&pred, &gold).unwrap();
        let expected = (108.0 * (186.0 / 213.0) + 79.0 * (134.0 / 161.0)) / 187.0;
        assert!((e.weighted_f1 - expected).abs() < 1e-12);
        assert!((e.weighted_f1 - 0.8559).abs() < 1e-4);
    }

    #[test]
    fn perfect_predictions() {
        let gold = vec![Simple, Complex, Complex];
        let e = evaluate_estimator(&gold, &gold).unwrap();
        assert_eq!(e.macro_f1, 1.0);
        assert_eq!(e.weighted_f1, 1.0);
        assert!(evaluate_estimator(&gold, &gold[..2]).is_err());
        assert!(evaluate_estimator(&[], &[]).is_err());
    }

    #[test]
    fn two_point_calibration_picks_smallest() {
        let c = calibrate_threshold(&[0.2, 0.9], &[Simple, Complex]).unwrap();
        assert_eq!(c.lambda, 0.20);
        assert_eq!(c.macro_f1, 1.0);
    }

    #[test]
    fn planted_uniform_threshold() {
        let scores: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let gold: Vec<_> = scores.iter().map(|&s| classify(s, 0.65)).collect();
        let c = calibrate_threshold(&scores, &gold).unwrap();
        assert_eq!(c.lambda, 0.65);
        assert_eq!(c.macro_f1, 1.0);
    }

    #[test]
    fn inverted_labels_are_deterministic() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let gold = [Complex, Complex, Simple, Simple];
        let a = calibrate_threshold(&scores, &gold).unwrap();
        let b = calibrate_threshold(&scores, &gold).unwrap();
        assert!(a.macro_f1 < 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(calibrate_threshold(&[0.1, 0.2], &[Simple, Simple]).is_err());
    }
}
