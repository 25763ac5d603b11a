//! Train every generator configuration plus the baselines on a synthetic
//! corpus and print the results table and pairwise comparisons.
//!
//! `cargo run --release --example ablation_study -- [entities] [epochs] [--type-critical]`

use std::time::Instant;

use shortdesc::corpus::{build_splits, generate_synthetic_corpus, LanguageConfig, SplitSizes, SynthSpec};
use shortdesc::encoding::TypeEmbeddingTable;
use shortdesc::experiment::{run_experiment, ExperimentSettings};
use shortdesc::generator::SystemKind;

fn main() -> shortdesc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nums: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let n = nums.first().copied().unwrap_or(300);
    let epochs = nums.get(1).copied().unwrap_or(20);
    let type_critical = args.iter().any(|a| a == "--type-critical");

    let langs = vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")];
    let mut spec = SynthSpec::new(n, langs, 11);
    spec.type_critical = type_critical;
    spec.single_description = type_critical;
    let synth = generate_synthetic_corpus(&spec)?;
    let test_n = 50.min(n / 5);
    let splits = build_splits(&synth.corpus, SplitSizes { train: n - 2 * test_n, valid: test_n, test: test_n }, 11)?;
    let train = synth.corpus.subset(&splits.train_ids);
    let valid = synth.corpus.subset(&splits.valid_ids);
    let test = synth.corpus.subset(&splits.test_ids);

    let mut settings = ExperimentSettings::default();
    settings.train.epochs = epochs;
    settings.train.batch_size = 16;
    settings.train.optimizer.lr = 2e-3;
    if type_critical {
        settings.systems = vec![SystemKind::Full, SystemKind::NoTypes];
    }
    let types = TypeEmbeddingTable::random(synth.type_ids.clone(), settings.model.d_type, 11)?;

    let start = Instant::now();
    let out = run_experiment(&settings, &synth.languages, &types, &train, Some(&valid), &test, &synth.dictionaries)?;
    println!("finished in {:.0}s\n", start.elapsed().as_secs_f64());
    println!("mean similarity by language\n{}", out.results.to_csv());
    println!("P(row beats column), * = sign test p < 0.05\n{}", out.pairwise.matrix_csv());
    println!("exact match: {:?}", out.exact_match);
    println!("baseline applicability: {:?}", out.applicability);
    Ok(())
}
