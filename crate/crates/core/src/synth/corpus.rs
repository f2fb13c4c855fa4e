//! Correct-solution corpus generation.

use crate::error::Result;
use crate::model::SolutionCorpus;
use crate::synth::templates::{custom_solution, flat_solution, Deviation, LoopStyle};
use crate::synth::GeneratorConfig;

fn rounded(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Builds a corpus of working solutions with the configured strategy mix.
///
/// Flat solutions come first, then custom-block solutions. Deviating
/// solutions appear in pairs, one per loop style, so that every local
/// deviation splits both styles' occurrence sets the same way; the pair
/// count is `custom_count * edit_error_rate / 2` rounded down. Start
/// sizes cycle over 40..70 by solution index. Output depends only on the
/// configuration, so equal configurations give equal corpora.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<SolutionCorpus> {
    config.validate()?;
    let n = config.n_solutions;
    let n_custom = rounded(n, config.custom_block_fraction).min(n);
    let n_flat = n - n_custom;
    let n_nested = rounded(n_custom, config.nested_loop_fraction).min(n_custom);
    let n_multiplied = n_custom - n_nested;
    let n_pairs = (rounded(n_custom, config.edit_error_rate) / 2)
        .min(n_multiplied)
        .min(n_nested);

    const PAIR_KINDS: [Deviation; 3] = [
        Deviation::MoveWrapped,
        Deviation::TurnFlipped,
        Deviation::ChangeOff,
    ];

    let mut styles = Vec::with_capacity(n_custom);
    for k in 0..n_pairs {
        let kind = PAIR_KINDS[k % PAIR_KINDS.len()];
        styles.push((LoopStyle::Multiplied, kind));
        styles.push((LoopStyle::Nested, kind));
    }
    for _ in 0..n_multiplied - n_pairs {
        styles.push((LoopStyle::Multiplied, Deviation::None));
    }
    for _ in 0..n_nested - n_pairs {
        styles.push((LoopStyle::Nested, Deviation::None));
    }

    let mut solutions = Vec::with_capacity(n);
    for i in 0..n_flat {
        solutions.push((format!("sol{i:02}"), flat_solution()));
    }
    for (j, (style, deviation)) in styles.into_iter().enumerate() {
        let i = n_flat + j;
        let start_size = 40 + 10 * (i as u32 % 4);
        solutions.push((format!("sol{i:02}"), custom_solution(style, deviation, start_size)));
    }
    Ok(SolutionCorpus { solutions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rules::truth_row;
    use crate::synth::templates::CUSTOM_BLOCK;

    #[test]
    fn default_layout_counts() {
        let corpus = generate_corpus(&GeneratorConfig::default()).unwrap();
        assert_eq!(corpus.len(), 20);
        let with_block: Vec<usize> = corpus
            .solutions
            .iter()
            .enumerate()
            .filter(|(_, (_, tree))| {
                tree.children.iter().any(|c| c.label == CUSTOM_BLOCK)
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(with_block, (2..20).collect::<Vec<_>>());
    }

    #[test]
    fn full_custom_mix_means_no_flat_solutions() {
        let config = GeneratorConfig { custom_block_fraction: 1.0, ..Default::default() };
        let corpus = generate_corpus(&config).unwrap();
        assert!(corpus
            .solutions
            .iter()
            .all(|(_, tree)| tree.children.iter().any(|c| c.label == CUSTOM_BLOCK)));
    }

    #[test]
    fn every_solution_earns_its_strategy_objectives() {
        let corpus = generate_corpus(&GeneratorConfig::default()).unwrap();
        for (id, tree) in &corpus.solutions {
            let truth = truth_row(tree);
            if tree.children.iter().any(|c| c.label == CUSTOM_BLOCK) {
                assert_eq!(truth.len(), 4, "{id} should complete everything");
            } else {
                assert_eq!(
                    truth.into_iter().collect::<Vec<_>>(),
                    vec![3, 4],
                    "{id} draws with a variable but has no loop or block"
                );
            }
        }
    }

    #[test]
    fn deviating_pairs_split_both_loop_styles() {
        let corpus = generate_corpus(&GeneratorConfig::default()).unwrap();
        let wrapped: Vec<&str> = corpus
            .solutions
            .iter()
            .filter(|(_, tree)| {
                let mut found = false;
                tree.walk(&mut |n| {
                    found |= n.label == "move"
                        && n.children.first().is_some_and(|c| c.label == "times");
                });
                found
            })
            .map(|(id, _)| id.as_str())
            .collect();
        assert_eq!(wrapped, ["sol02", "sol03"]);
    }

    #[test]
    fn same_config_same_corpus() {
        let config = GeneratorConfig { seed: 99, ..Default::default() };
        let a = generate_corpus(&config).unwrap();
        let b = generate_corpus(&config).unwrap();
        assert_eq!(a.solutions, b.solutions);
    }

    #[test]
    fn single_solution_corpus_is_fine() {
        let config = GeneratorConfig { n_solutions: 1, ..Default::default() };
        assert_eq!(generate_corpus(&config).unwrap().len(), 1);
    }
}
