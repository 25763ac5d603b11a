//! Per-language coverage of a synthetic corpus: articles, missing
//! descriptions, mean description length and how many languages an entity spans.
//!
//! `cargo run --example corpus_statistics -- [entities]`

use shortdesc::corpus::{
    compute_language_stats, generate_synthetic_corpus, language_coverage_distribution, LanguageConfig, SynthSpec,
};

fn main() -> shortdesc::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let langs = vec![
        LanguageConfig::word("en"),
        LanguageConfig::word("de"),
        LanguageConfig::word("nl"),
        LanguageConfig::character("zh"),
    ];
    let mut spec = SynthSpec::new(n, langs, 5);
    for (lang, rate) in [("en", 0.2), ("de", 0.2), ("nl", 0.1), ("zh", 0.85)] {
        spec.missing_description_rate.insert(lang.into(), rate);
    }
    let synth = generate_synthetic_corpus(&spec)?;

    println!("{:<6}{:>10}{:>10}{:>10}{:>10}", "lang", "articles", "missing", "%", "avg len");
    for s in compute_language_stats(&synth.corpus, &synth.languages) {
        println!(
            "{:<6}{:>10}{:>10}{:>10.2}{:>10}",
            s.language.as_str(),
            s.article_count,
            s.missing_description_count,
            s.missing_percent(),
            s.avg_description_length.map_or("-".into(), |l| format!("{l:.2}"))
        );
    }

    let cov = language_coverage_distribution(&synth.corpus);
    println!("\nlanguages per entity (articles): {:?}", cov.articles);
    println!("languages per entity (descriptions): {:?}", cov.descriptions);
    println!(
        "multilingual: {:.1}% of articles, {:.1}% of descriptions; typed {:.1}%",
        100.0 * cov.articles_multi_fraction,
        100.0 * cov.descriptions_multi_fraction,
        100.0 * cov.typed_fraction
    );
    Ok(())
}
