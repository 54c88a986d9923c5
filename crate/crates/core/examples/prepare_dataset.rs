// Load a SQuAD-style file, drop items whose answer is not a passage span,
// split 80/10/10 with a seed and build the generator vocabulary.

use ccqg::dataset::{build_vocab, filter_answerable, parse_qa_json, split_dataset, QaFormat};

fn squad_text() -> String {
    let colours = ["red", "green", "blue", "amber", "violet"];
    let mut qas = Vec::new();
    for i in 0..24 {
        let colour = colours[i % colours.len()];
        // Every eighth answer does not occur in the passage.
        let answer = if i % 8 == 7 { "purple" } else { colour };
        qas.push(format!(
            r#"{{"id": "q{i}", "question": "Which colour is listed {i}th?", "answers": [{{"text": "{answer}"}}]}}"#
        ));
    }
    format!(
        r#"{{"data": [{{"paragraphs": [{{"context": "The flags are red, green, blue, amber and violet.", "qas": [{}]}}]}}]}}"#,
        qas.join(",")
    )
}

/// Returns (removed, train, dev, test, vocabulary size).
pub fn run_example() -> ccqg::Result<(usize, usize, usize, usize, usize)> {
    let instances = parse_qa_json(&squad_text(), QaFormat::Squad)?;
    let (kept, removed) = filter_answerable(instances);
    let split = split_dataset(kept, 42)?;
    let (train, dev, test) = split.sizes();
    let vocab = build_vocab(&split.train, 50);
    println!("removed {removed}; train {train}, dev {dev}, test {test}; vocabulary {}", vocab.len());
    println!("first training ids: {:?}", &split.manifest().train[..3]);
    Ok((removed, train, dev, test, vocab.len()))
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
