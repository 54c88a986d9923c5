// Parse CoNLL-U annotations that follow the `<id>#passage` /
// `<id>#question` document convention and inspect the structural counts
// the estimator uses.

use ccqg::annotation::{clause_count, entity_mentions, mod_relation_count, parse_conllu, AnnotationIndex};

const ANNOTATIONS: &str = "\
# doc_id = q1#question
# text = Which old bridge did the river that floods cross ?
1\tWhich\twhich\tDET\t_\t_\t3\tdet\t_\t_
2\told\told\tADJ\t_\t_\t3\tamod\t_\t_
3\tbridge\tbridge\tNOUN\t_\t_\t10\tobj\t_\t_
4\tdid\tdo\tAUX\t_\t_\t10\taux\t_\t_
5\tthe\tthe\tDET\t_\t_\t6\tdet\t_\t_
6\triver\triver\tNOUN\t_\t_\t10\tnsubj\t_\t_
7\tthat\tthat\tPRON\t_\t_\t8\tnsubj\t_\t_
8\tfloods\tflood\tVERB\t_\t_\t6\tacl:relcl\t_\t_
9\t?\t?\tPUNCT\t_\t_\t10\tpunct\t_\t_
10\tcross\tcross\tVERB\t_\t_\t0\troot\t_\t_

# doc_id = q1#passage
# text = The Avon crossed Bath .
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tAvon\tavon\tPROPN\t_\t_\t3\tnsubj\t_\tNER=B-LOC
3\tcrossed\tcross\tVERB\t_\t_\t0\troot\t_\t_
4\tBath\tbath\tPROPN\t_\t_\t3\tobj\t_\tNER=B-GPE
5\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_
";

/// Returns (clauses, modifier relations) of the question and the number
/// of passage entity mentions.
pub fn run_example() -> ccqg::Result<(usize, usize, usize)> {
    let index = AnnotationIndex::new(parse_conllu(ANNOTATIONS)?)?;
    let question = index.question("q1")?;
    let passage = index.passage("q1")?;
    let clauses: usize = question.sentences.iter().map(clause_count).sum();
    let modifiers: usize = question.sentences.iter().map(mod_relation_count).sum();
    let mentions = entity_mentions(passage).total_mentions;
    println!("question `{}`", question.source_text);
    println!("  clauses {clauses}, modifier relations {modifiers}");
    println!("passage has {mentions} entity mentions over {} tokens", passage.token_count());
    Ok((clauses, modifiers, mentions))
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
