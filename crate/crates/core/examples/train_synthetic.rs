//! Train the full generator on a small synthetic corpus and decode held-out entities.
//!
//! `cargo run --release --example train_synthetic -- [entities] [epochs] [d_model]`

use std::time::Instant;

use shortdesc::corpus::{build_splits, generate_synthetic_corpus, LanguageConfig, SplitSizes, SynthSpec};
use shortdesc::encoding::TypeEmbeddingTable;
use shortdesc::generator::{fit, DecodeStrategy, ModelConfig, SystemKind, TrainConfig};
use shortdesc::text::fold;

fn main() -> shortdesc::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(500);
    let epochs = args.get(1).copied().unwrap_or(10);
    let d = args.get(2).copied().unwrap_or(64);

    let langs = vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")];
    let synth = generate_synthetic_corpus(&SynthSpec::new(n, langs, 7))?;
    let splits = build_splits(&synth.corpus, SplitSizes { train: n - 100, valid: 50, test: 50 }, 7)?;
    let train = synth.corpus.subset(&splits.train_ids);
    let valid = synth.corpus.subset(&splits.valid_ids);
    let test = synth.corpus.subset(&splits.test_ids);

    let mut config = ModelConfig::for_system(SystemKind::Full);
    config.d_model = d;
    let types = TypeEmbeddingTable::random(synth.type_ids.clone(), config.d_type, 7)?;
    let mut hyper = TrainConfig { epochs, ..Default::default() };
    if let Some(lr) = std::env::var("LR").ok().and_then(|v| v.parse().ok()) {
        hyper.optimizer.lr = lr;
    }
    if let Some(b) = std::env::var("BATCH").ok().and_then(|v| v.parse().ok()) {
        hyper.batch_size = b;
    }

    let start = Instant::now();
    let model = fit(config, synth.languages.clone(), types, &train, Some(&valid), &hyper)?;
    for e in &model.log.epochs {
        println!("epoch {:>2}  train {:.4}  valid {:.4}", e.epoch, e.train_loss, e.valid_loss.unwrap_or(f64::NAN));
    }
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let (mut hits, mut total) = (0, 0);
    for entity in test.iter() {
        for (lang, gold) in &entity.descriptions {
            let out = model.generate(entity, lang, DecodeStrategy::Greedy)?;
            total += 1;
            if fold(&out.text) == fold(&gold.text) {
                hits += 1;
            } else if total - hits <= 5 {
                println!("{} [{lang}] gold {:?} got {:?}", entity.id, gold.text, out.text);
            }
        }
    }
    println!("exact match {hits}/{total} = {:.3}", hits as f64 / total.max(1) as f64);
    Ok(())
}
