// Fit the feature normaliser on gold-labelled feature vectors and pick the
// complexity threshold by grid search. The bundled fixture plants the
// boundary at 0.65.

use std::path::Path;

use ccqg::dataset::read_jsonl;
use ccqg::estimator::{calibrate_threshold, cpx_score, fit_normalizer, normalize, Calibration, ComplexityFeatures, ComplexityLabel};

#[derive(serde::Deserialize)]
struct Row {
    raw: [f64; 5],
    gold: ComplexityLabel,
}

pub fn run_example() -> ccqg::Result<Calibration> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/planted_features.jsonl");
    let rows: Vec<Row> = read_jsonl(&path)?;
    let features: Vec<ComplexityFeatures> = rows.iter().map(|r| ComplexityFeatures::from_array(r.raw)).collect();
    let gold: Vec<ComplexityLabel> = rows.iter().map(|r| r.gold).collect();
    let normalizer = fit_normalizer(&features, 0.5)?;
    let scores: Vec<f64> = features.iter().map(|f| cpx_score(&normalize(f, &normalizer))).collect();
    let calibration = calibrate_threshold(&scores, &gold)?;
    println!("{} items: lambda = {:.2}, macro-F1 = {:.4}", rows.len(), calibration.lambda, calibration.macro_f1);
    Ok(calibration)
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
