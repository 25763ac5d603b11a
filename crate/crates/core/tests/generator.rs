use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::autograd::Graph;
use shortdesc::corpus::{
    generate_synthetic_corpus, Corpus, Entity, LanguageCode, LanguageConfig, SynthSpec, SyntheticCorpus,
};
use shortdesc::encoding::{build_vocab, pool_descriptions, TypeEmbeddingTable};
use shortdesc::generator::{
    fit, DecodeStrategy, DescriptionModel, GenerationRecord, ModelConfig, SystemKind, TrainConfig,
};

fn langs() -> Vec<LanguageConfig> {
    vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")]
}

fn tiny_config(kind: SystemKind, seed: u64) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        layers: 1,
        heads: 2,
        d_desc: 4,
        desc_layers: 1,
        desc_heads: 1,
        d_type: 4,
        max_positions: 24,
        max_output_tokens: 6,
        seed,
        ..ModelConfig::for_system(kind)
    }
}

fn synth(n: usize, seed: u64) -> SyntheticCorpus {
    generate_synthetic_corpus(&SynthSpec::new(n, langs(), seed)).unwrap()
}

fn tiny_model(s: &SyntheticCorpus, kind: SystemKind, seed: u64) -> DescriptionModel {
    let cfg = tiny_config(kind, seed);
    let vocab = build_vocab(&s.corpus, &s.languages, 500);
    let types = TypeEmbeddingTable::random(s.type_ids.clone(), cfg.d_type, seed).unwrap();
    DescriptionModel::new(cfg, s.languages.clone(), vocab, types).unwrap()
}

fn loss_at(model: &DescriptionModel, e: &Entity, target: &LanguageCode, query: &LanguageCode) -> f64 {
    let mut g = Graph::new(&model.store);
    let l = model.loss_graph(&mut g, e, target, query).unwrap();
    g.scalar(l)
}

#[test]
fn gradients_match_finite_differences() {
    let s = synth(30, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let entities: Vec<&Entity> = s.corpus.iter().collect();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for instance in 0..20 {
        let mut model = tiny_model(&s, SystemKind::Full, instance);
        let e = *entities.choose(&mut rng).unwrap();
        let target = e.descriptions.keys().cloned().collect::<Vec<_>>()[rng.random_range(0..e.descriptions.len())].clone();
        let query = e.articles.keys().cloned().collect::<Vec<_>>()[rng.random_range(0..e.articles.len())].clone();

        let grads = {
            let mut g = Graph::new(&model.store);
            let l = model.loss_graph(&mut g, e, &target, &query).unwrap();
            g.backward(l).params
        };
        let ids: Vec<_> = model
            .store
            .ids()
            .filter(|&id| {
                let n = model.store.name(id);
                n.starts_with("fusion") || n.starts_with("context") || n.starts_with("decoder")
            })
            .collect();
        assert!(!ids.is_empty());
        for id in ids {
            let analytic_full = grads.dense(id, &model.store);
            let (r, c) = analytic_full.dim();
            let (mut diff, mut scale) = (0.0f64, 0.0f64);
            for _ in 0..4 {
                let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
                let orig = model.store.get(id)[[i, j]];
                model.store.get_mut(id)[[i, j]] = orig + h;
                let up = loss_at(&model, e, &target, &query);
                model.store.get_mut(id)[[i, j]] = orig - h;
                let down = loss_at(&model, e, &target, &query);
                model.store.get_mut(id)[[i, j]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = analytic_full[[i, j]];
                diff += (numeric - analytic).powi(2);
                scale += numeric.powi(2) + analytic.powi(2);
            }
            let rel = diff.sqrt() / scale.sqrt().max(1e-6);
            worst = worst.max(rel);
            assert!(rel <= 1e-4, "instance {instance}, {}: relative error {rel:.2e}", model.store.name(id));
        }
    }
    println!("worst relative error {worst:.2e}");
}

fn generate_text(model: &DescriptionModel, e: &Entity, target: &str) -> String {
    model.generate(e, &target.into(), DecodeStrategy::Greedy).unwrap().text
}

fn logprob(model: &DescriptionModel, e: &Entity, target: &str) -> f64 {
    model.generate(e, &target.into(), DecodeStrategy::Greedy).unwrap().log_prob
}

fn entity_with_all(s: &SyntheticCorpus) -> Entity {
    s.corpus
        .iter()
        .find(|e| e.articles.len() == 3 && e.descriptions.len() == 3 && !e.type_ids.is_empty())
        .unwrap()
        .clone()
}

#[test]
fn no_desc_ignores_descriptions() {
    let s = synth(20, 6);
    let model = tiny_model(&s, SystemKind::NoDesc, 1);
    let e = entity_with_all(&s);
    let mutated = e.clone().with_description("de", "völlig andere worte hier").with_description("zh", "完全不同");
    assert_eq!(logprob(&model, &e, "en"), logprob(&model, &mutated, "en"));
    assert_eq!(generate_text(&model, &e, "en"), generate_text(&model, &mutated, "en"));
}

#[test]
fn no_types_ignores_types() {
    let s = synth(20, 7);
    let model = tiny_model(&s, SystemKind::NoTypes, 2);
    let e = entity_with_all(&s);
    let other = s.type_ids.iter().find(|t| !e.type_ids.contains(*t)).unwrap().clone();
    let mutated = e.clone().with_types([other]);
    let cleared = e.clone().with_types(Vec::<String>::new());
    for m in [&mutated, &cleared] {
        assert_eq!(logprob(&model, &e, "de"), logprob(&model, m, "de"));
    }
}

#[test]
fn full_model_is_sensitive_to_types() {
    let s = synth(20, 7);
    let model = tiny_model(&s, SystemKind::Full, 2);
    let e = entity_with_all(&s);
    let other = s.type_ids.iter().find(|t| !e.type_ids.contains(*t)).unwrap().clone();
    assert_ne!(logprob(&model, &e, "de"), logprob(&model, &e.clone().with_types([other]), "de"));
}

#[test]
fn monolingual_ignores_other_articles() {
    let s = synth(20, 8);
    let model = tiny_model(&s, SystemKind::Monolingual, 3);
    let e = entity_with_all(&s);
    let mutated = e.clone().with_article("de", "ganz anderer artikel text").with_article("zh", "另一篇文章");
    assert_eq!(logprob(&model, &e, "en"), logprob(&model, &mutated, "en"));
    let full = tiny_model(&s, SystemKind::Full, 3);
    assert_ne!(logprob(&full, &e, "en"), logprob(&full, &mutated, "en"));
}

#[test]
fn target_description_never_leaks() {
    let s = synth(20, 9);
    let model = tiny_model(&s, SystemKind::Full, 4);
    let e = entity_with_all(&s);
    let mutated = e.clone().with_description("en", "leaked answer words");
    let a = pool_descriptions(model.description_encoder(), &model.store, &model.vocab, &model.languages, &e, &"en".into());
    let b = pool_descriptions(model.description_encoder(), &model.store, &model.vocab, &model.languages, &mutated, &"en".into());
    assert_eq!(a, b);
    assert_eq!(a.n_sources, 2);
    assert_eq!(logprob(&model, &e, "en"), logprob(&model, &mutated, "en"));
}

#[test]
fn output_respects_cap() {
    let s = synth(20, 10);
    let model = tiny_model(&s, SystemKind::Full, 5);
    for e in s.corpus.iter().take(10) {
        for l in e.descriptions.keys() {
            for strat in [DecodeStrategy::Greedy, DecodeStrategy::Beam(3)] {
                let out = model.generate(e, l, strat).unwrap();
                assert!(out.tokens.len() <= model.config.max_output_tokens);
            }
        }
    }
}

fn small_train(seed: u64) -> (SyntheticCorpus, Corpus) {
    let s = synth(40, seed);
    let c = s.corpus.clone();
    (s, c)
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let (s, train) = small_train(12);
    let hyper = TrainConfig {
        epochs: 3,
        batch_size: 8,
        ..Default::default()
    };
    let run = || {
        let cfg = tiny_config(SystemKind::Full, 21);
        let types = TypeEmbeddingTable::random(s.type_ids.clone(), cfg.d_type, 1).unwrap();
        let mut h = hyper.clone();
        h.optimizer.lr = 3e-3;
        fit(cfg, s.languages.clone(), types, &train, Some(&train), &h).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.store, b.store);
    let log = &a.log.epochs;
    assert_eq!(log.len(), 3);
    assert!(log[2].train_loss < log[0].train_loss);
    assert!(log.iter().all(|e| e.valid_loss.is_some()));
}

#[test]
fn checkpoint_roundtrip() {
    let s = synth(20, 13);
    let model = tiny_model(&s, SystemKind::Full, 6);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let back = DescriptionModel::load(dir.path()).unwrap();
    assert_eq!(back.store, model.store);
    let e = entity_with_all(&s);
    assert_eq!(generate_text(&model, &e, "zh"), generate_text(&back, &e, "zh"));
}

#[test]
fn generation_jsonl_schema() {
    let s = synth(20, 14);
    let model = tiny_model(&s, SystemKind::Full, 7);
    let e = entity_with_all(&s);
    let out = model.generate(&e, &"en".into(), DecodeStrategy::Greedy).unwrap();
    let rec = GenerationRecord::new(&e.id, "", &out);
    let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["id", "lang", "logprob", "terminated", "text"]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.jsonl");
    GenerationRecord::write_jsonl(&[rec.clone()], &p).unwrap();
    assert_eq!(GenerationRecord::read_jsonl(&p).unwrap(), vec![rec]);
}

#[test]
fn entity_without_articles_is_rejected() {
    let s = synth(20, 15);
    let model = tiny_model(&s, SystemKind::Full, 8);
    let e = Entity::new("x").with_description("en", "a b");
    assert!(model.generate(&e, &"en".into(), DecodeStrategy::Greedy).is_err());
}
