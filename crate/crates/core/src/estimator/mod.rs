//! Training-free question complexity estimator.
//!
//! Five raw features are computed per (question, passage, answer) triple,
//! min-max normalised against a fitted corpus, averaged into a score in
//! `[0, 1]`, and compared against a threshold.

mod divergence;
mod evaluate;
mod features;
mod normalizer;

pub use divergence::js_divergence;
pub use evaluate::{
    calibrate_threshold, class_f1, evaluate_estimator, macro_f1, Calibration, ConfusionMatrix, EstimatorEvaluation,
};
pub use features::{
    compute_raw_features, feature_entity_answer_distance, feature_entity_frequency, feature_topic_coherence,
    features_from_documents, resolve_answer_span, ComplexityFeatures, F3Mode, FeatureOptions, F3_FLOOR,
};
pub use normalizer::{
    classify, cpx_score, fit_normalizer, normalize, score_features, ComplexityLabel, FeatureNormalizer,
    HOTPOT_LAMBDA,
};
