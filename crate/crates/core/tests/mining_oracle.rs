mod common;

use common::oracle::{assert_stages_match, config_variant, random_corpus};

#[test]
fn randomized_corpora_match_the_brute_force_stages() {
    for seed in 0..120u64 {
        let corpus = random_corpus(seed);
        let cfg = config_variant(seed);
        assert_stages_match(&corpus, &cfg, &format!("seed {seed}"));
    }
}

#[test]
fn single_solution_and_single_node_corpora_match() {
    use feedmine::model::{AstNode, SolutionCorpus};
    let corpus = SolutionCorpus { solutions: vec![("only".into(), AstNode::leaf("move"))] };
    for i in 0..27 {
        assert_stages_match(&corpus, &config_variant(i), &format!("variant {i}"));
    }
}
