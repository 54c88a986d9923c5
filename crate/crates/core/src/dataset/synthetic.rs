//! Deterministic toy corpora whose questions follow fixed surface patterns,
//! so a pattern matcher can serve as an exact complexity oracle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::QAInstance;
use crate::estimator::ComplexityLabel;

const SUBJECTS: [&str; 12] =
    ["falcon", "river", "engine", "garden", "tower", "comet", "violin", "harbor", "lantern", "glacier", "meadow", "canyon"];
const VERBS: [&str; 6] = ["guards", "crosses", "powers", "feeds", "faces", "follows"];
const OBJECTS: [&str; 8] = ["bridge", "valley", "village", "station", "forest", "castle", "market", "island"];
const PLACES: [&str; 5] = ["coast", "hills", "city", "border", "lake"];

/// The simple-pattern question `what is X ?`.
pub fn simple_question(subject: &str) -> String {
    format!("what is {subject} ?")
}

/// The complex-pattern question `what is the X that <verb> the <object> ?`.
pub fn complex_question(subject: &str, verb: &str, object: &str) -> String {
    format!("what is the {subject} that {verb} the {object} ?")
}

/// Oracle labeller for pattern corpora: a question containing the
/// relative pronoun `that` is complex, anything else simple.
pub fn pattern_label(question_tokens: &[String]) -> ComplexityLabel {
    if question_tokens.iter().any(|t| t == "that") {
        ComplexityLabel::Complex
    } else {
        ComplexityLabel::Simple
    }
}

/// `n_inputs` distinct passages, each paired with its answer and emitted
/// twice: once with the simple question and once with the complex one.
/// Ids are `p{i}-simple` and `p{i}-complex`; gold labels are set.
pub fn pattern_corpus(n_inputs: usize, seed: u64) -> Vec<QAInstance> {
    let mut combos: Vec<(usize, usize, usize, usize)> = Vec::new();
    for s in 0..SUBJECTS.len() {
        for v in 0..VERBS.len() {
            for o in 0..OBJECTS.len() {
                combos.push((s, v, o, (s + v + o) % PLACES.len()));
            }
        }
    }
    combos.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    assert!(n_inputs <= combos.len(), "at most {} distinct pattern inputs", combos.len());
    let mut out = Vec::with_capacity(2 * n_inputs);
    for (i, &(s, v, o, p)) in combos.iter().take(n_inputs).enumerate() {
        let (s, v, o, p) = (SUBJECTS[s], VERBS[v], OBJECTS[o], PLACES[p]);
        let passage = format!("the {s} {v} the {o} near the {p} .");
        for (label, question) in [(ComplexityLabel::Simple, simple_question(s)), (ComplexityLabel::Complex, complex_question(s, v, o))] {
            let mut inst = QAInstance::new(format!("p{i}-{label}"), passage.clone(), question, s);
            inst.gold_complexity = Some(label);
            out.push(inst);
        }
    }
    out
}
