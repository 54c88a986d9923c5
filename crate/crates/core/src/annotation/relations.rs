use super::Sentence;

/// Dependency relations that introduce a subordinate clause.
pub const CLAUSE_RELATIONS: &[&str] = &["csubj", "csubjpass", "ccomp", "xcomp", "advcl", "acl", "acl:relcl", "relcl"];

/// Adverbial, adjectival, nominal and possessive modifier relations.
pub const MODIFIER_RELATIONS: &[&str] = &["advmod", "amod", "nmod", "nmod:npmod", "npmod", "nmod:poss", "poss"];

/// Main clause plus one per clause-introducing relation.
pub fn clause_count(sentence: &Sentence) -> usize {
    1 + count_relations(sentence, CLAUSE_RELATIONS)
}

pub fn mod_relation_count(sentence: &Sentence) -> usize {
    count_relations(sentence, MODIFIER_RELATIONS)
}

fn count_relations(sentence: &Sentence, set: &[&str]) -> usize {
    sentence.tokens.iter().filter(|t| set.contains(&t.deprel.as_str())).count()
}
