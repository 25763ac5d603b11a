//! Aggregating per-instance scores of several systems: Bradley–Terry
//! strengths, pairwise sign tests, then a propensity-weighted mean for one
//! system.
//!
//! `cargo run --example compare_systems`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::analysis::{
    propensity_weight, stratify, train_propensity, weighted_mean, Binning, PropensityConfig,
};
use shortdesc::corpus::LanguageCode;
use shortdesc::experiment::PairwiseReport;
use shortdesc::metric::ScoreRecord;

fn main() -> shortdesc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let systems = ["full", "no-desc", "prefix"];
    let quality = [0.8, 0.6, 0.45];
    let mut scores = Vec::new();
    for i in 0..300 {
        let id = format!("Q{i}");
        for (sys, q) in systems.iter().zip(quality) {
            scores.push(ScoreRecord {
                id: id.clone(),
                lang: LanguageCode::new("en"),
                system: sys.to_string(),
                score: (q + rng.random_range(-0.25..0.25f64)).clamp(0.0, 1.0),
            });
        }
    }
    let names: Vec<String> = systems.iter().map(|s| s.to_string()).collect();
    let report = PairwiseReport::build(&scores, &names, 0.05)?;
    println!("strengths: {:?}", report.bt.systems.iter().zip(&report.bt.scores).collect::<Vec<_>>());
    println!("P(row beats column), * = significant\n{}", report.matrix_csv());

    // articles that already carry a description are the "treated" class
    let examples: Vec<(String, bool)> = (0..400)
        .map(|i| {
            let famous = i % 3 == 0;
            let text = if famous { format!("famous city {i} capital river") } else { format!("small village {i}") };
            (text, famous || i % 7 == 0)
        })
        .collect();
    let model = train_propensity(&examples, &PropensityConfig::default())?;
    let full: Vec<(f64, f64)> = examples
        .iter()
        .take(300)
        .zip(scores.iter().filter(|s| s.system == "full"))
        .map(|((text, _), s)| (model.predict(text), s.score))
        .collect();
    let weights: Vec<f64> = full.iter().map(|(p, _)| propensity_weight(*p)).collect();
    let values: Vec<f64> = full.iter().map(|(_, s)| *s).collect();
    println!(
        "full: unweighted {:.4}, propensity-weighted {:.4}",
        values.iter().sum::<f64>() / values.len() as f64,
        weighted_mean(&values, &weights)?
    );
    for s in stratify(&full, 5, Binning::Quantile)? {
        println!("  p in [{:.3}, {:.3}]: {:>4} items, mean {:?}", s.lower, s.upper, s.count, s.mean_score);
    }
    Ok(())
}
