use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::autograd::{Graph, Mat};
use shortdesc::corpus::{generate_synthetic_corpus, Entity, LanguageCode, LanguageConfig, SynthSpec, SyntheticCorpus};
use shortdesc::encoding::{build_vocab, pool_descriptions, EncodedArticle, TypeEmbeddingTable};
use shortdesc::fusion::{fuse_articles, FusionParameters};
use shortdesc::generator::{DecodeStrategy, DescriptionModel, ModelConfig, SystemKind};

use crate::Outcome;

type Rows = Vec<Vec<f64>>;

fn rows(m: &Mat) -> Rows {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x · W` for a row vector and a matrix given as rows.
fn vec_mat(x: &[f64], w: &Rows) -> Vec<f64> {
    (0..w[0].len()).map(|j| x.iter().zip(w).map(|(xi, wr)| xi * wr[j]).sum()).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Straight-line evaluation of the fusion formula, one query token at a time.
fn fusion_by_hand(articles: &[(String, Rows)], query: &str, p: &FusionParameters) -> Rows {
    let (w_q, w_k, w_v) = (rows(&p.w_q), rows(&p.w_k), rows(&p.w_v));
    let (w1, w2) = (rows(&p.ff_w1), rows(&p.ff_w2));
    let (gain, bias) = (p.ln_gain.row(0).to_vec(), p.ln_bias.row(0).to_vec());
    let (b1, b2) = (p.ff_b1.row(0).to_vec(), p.ff_b2.row(0).to_vec());
    let dk = w_q[0].len();
    let query_tokens = &articles.iter().find(|(l, _)| l == query).expect("query article").1;
    query_tokens
        .iter()
        .map(|a_i| {
            let q = vec_mat(a_i, &w_q);
            let mut acc = vec![0.0; dk];
            for (_, tokens) in articles {
                let keys: Rows = tokens.iter().map(|t| vec_mat(t, &w_k)).collect();
                let values: Rows = tokens.iter().map(|t| vec_mat(t, &w_v)).collect();
                let logits: Vec<f64> = keys.iter().map(|k| dot(&q, k) / (dk as f64).sqrt()).collect();
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|s| (s - top).exp()).sum();
                let mut h = q.clone();
                for (s, v) in logits.iter().zip(&values) {
                    for c in 0..dk {
                        h[c] += (s - top).exp() / z * v[c];
                    }
                }
                let mu = h.iter().sum::<f64>() / dk as f64;
                let var = h.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / dk as f64;
                let normed: Vec<f64> = (0..dk).map(|c| (h[c] - mu) / (var + 1e-5).sqrt() * gain[c] + bias[c]).collect();
                let hidden: Vec<f64> = vec_mat(&normed, &w1).iter().zip(&b1).map(|(x, b)| gelu(x + b)).collect();
                let out = vec_mat(&hidden, &w2);
                for c in 0..dk {
                    acc[c] += (out[c] + b2[c]) / articles.len() as f64;
                }
            }
            acc
        })
        .collect()
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_shape_fn((r, c), |_| rng.random_range(-scale..scale))
}

pub fn fusion_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(4..=8);
        let dk = rng.random_range(4..=8);
        let dff = 2 * dk;
        let p = FusionParameters {
            w_q: random_mat(&mut rng, d, dk, 0.7),
            w_k: random_mat(&mut rng, d, dk, 0.7),
            w_v: random_mat(&mut rng, d, dk, 0.7),
            ln_gain: random_mat(&mut rng, 1, dk, 1.2),
            ln_bias: random_mat(&mut rng, 1, dk, 0.4),
            ff_w1: random_mat(&mut rng, dk, dff, 0.7),
            ff_b1: random_mat(&mut rng, 1, dff, 0.2),
            ff_w2: random_mat(&mut rng, dff, dk, 0.7),
            ff_b2: random_mat(&mut rng, 1, dk, 0.2),
        };
        let encoded: Vec<EncodedArticle> = ["en", "de", "zh"]
            .iter()
            .map(|l| {
                let len = rng.random_range(1..=5);
                EncodedArticle { language: (*l).into(), matrix: random_mat(&mut rng, len, d, 1.0) }
            })
            .collect();
        let query = ["en", "de", "zh"][rng.random_range(0..3)];
        let got = fuse_articles(&encoded, &query.into(), &p).map_err(|e| e.to_string())?;
        let plain: Vec<(String, Rows)> = encoded.iter().map(|e| (e.language.to_string(), rows(&e.matrix))).collect();
        let want = fusion_by_hand(&plain, query, &p);
        check!(got.matrix.nrows() == want.len(), "row count {} vs {}", got.matrix.nrows(), want.len());
        for (i, row) in want.iter().enumerate() {
            for (c, w) in row.iter().enumerate() {
                worst = worst.max((got.matrix[[i, c]] - w).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check!(worst <= 1e-6, "max deviation {worst:.2e} exceeds 1e-6");
    check!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("100 instances, max |deviation| {worst:.1e} <= 1e-6"))
}

fn langs() -> Vec<LanguageConfig> {
    vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")]
}

fn synth(n: usize, seed: u64) -> SyntheticCorpus {
    generate_synthetic_corpus(&SynthSpec::new(n, langs(), seed)).expect("synthetic corpus")
}

fn small_model(s: &SyntheticCorpus, kind: SystemKind, seed: u64) -> DescriptionModel {
    let cfg = ModelConfig {
        d_model: 8,
        layers: 1,
        heads: 2,
        d_desc: 4,
        desc_heads: 1,
        d_type: 4,
        max_positions: 24,
        max_output_tokens: 6,
        seed,
        ..ModelConfig::for_system(kind)
    };
    let vocab = build_vocab(&s.corpus, &s.languages, 500);
    let types = TypeEmbeddingTable::random(s.type_ids.clone(), cfg.d_type, seed).expect("types");
    DescriptionModel::new(cfg, s.languages.clone(), vocab, types).expect("model")
}

fn loss(model: &DescriptionModel, e: &Entity, target: &LanguageCode, query: &LanguageCode) -> f64 {
    let mut g = Graph::new(&model.store);
    let l = model.loss_graph(&mut g, e, target, query).expect("loss");
    g.scalar(l)
}

pub fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let s = synth(30, 41);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let entities: Vec<&Entity> = s.corpus.iter().collect();
    let h = 1e-4;
    let (mut worst, mut checked): (f64, usize) = (0.0, 0);
    for instance in 0..20u64 {
        let mut model = small_model(&s, SystemKind::Full, 100 + instance);
        let e = *entities.choose(&mut rng).expect("entities");
        let targets: Vec<LanguageCode> = e.descriptions.keys().cloned().collect();
        let queries: Vec<LanguageCode> = e.articles.keys().cloned().collect();
        let target = targets.choose(&mut rng).expect("target").clone();
        let query = queries.choose(&mut rng).expect("query").clone();
        let grads = {
            let mut g = Graph::new(&model.store);
            let l = model.loss_graph(&mut g, e, &target, &query).map_err(|e| e.to_string())?;
            g.backward(l).params
        };
        let ids: Vec<_> = model
            .store
            .ids()
            .filter(|&id| ["fusion", "context", "decoder"].iter().any(|p| model.store.name(id).starts_with(p)))
            .collect();
        for id in ids {
            let analytic = grads.dense(id, &model.store);
            let (r, c) = analytic.dim();
            let (mut diff, mut scale) = (0.0f64, 0.0f64);
            for _ in 0..3 {
                let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
                let orig = model.store.get(id)[[i, j]];
                model.store.get_mut(id)[[i, j]] = orig + h;
                let up = loss(&model, e, &target, &query);
                model.store.get_mut(id)[[i, j]] = orig - h;
                let down = loss(&model, e, &target, &query);
                model.store.get_mut(id)[[i, j]] = orig;
                let numeric = (up - down) / (2.0 * h);
                diff += (numeric - analytic[[i, j]]).powi(2);
                scale += numeric.powi(2) + analytic[[i, j]].powi(2);
            }
            let rel = diff.sqrt() / scale.sqrt().max(1e-6);
            worst = worst.max(rel);
            checked += 1;
            check!(rel <= 1e-4, "instance {instance}, {}: relative error {rel:.2e}", model.store.name(id));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("20 instances, {checked} parameter tensors, worst relative error {worst:.1e} <= 1e-4"))
}

fn logprob(model: &DescriptionModel, e: &Entity, target: &str) -> f64 {
    model.generate(e, &target.into(), DecodeStrategy::Greedy).expect("generate").log_prob
}

fn text(model: &DescriptionModel, e: &Entity, target: &str) -> String {
    model.generate(e, &target.into(), DecodeStrategy::Greedy).expect("generate").text
}

pub fn ablation_invariance() -> Outcome {
    let start = Instant::now();
    let s = synth(40, 43);
    let complete: Vec<Entity> = s
        .corpus
        .iter()
        .filter(|e| e.articles.len() == 3 && e.descriptions.len() == 3 && !e.type_ids.is_empty())
        .take(5)
        .cloned()
        .collect();
    check!(!complete.is_empty(), "no fully covered entity in the fixture");

    let no_desc = small_model(&s, SystemKind::NoDesc, 1);
    let no_types = small_model(&s, SystemKind::NoTypes, 2);
    let mono = small_model(&s, SystemKind::Monolingual, 3);
    let full = small_model(&s, SystemKind::Full, 4);
    for e in &complete {
        let desc_mut = e.clone().with_description("de", "völlig andere worte").with_description("zh", "完全不同");
        check!(
            logprob(&no_desc, e, "en") == logprob(&no_desc, &desc_mut, "en")
                && text(&no_desc, e, "en") == text(&no_desc, &desc_mut, "en"),
            "no-desc output moved with descriptions on {}",
            e.id
        );
        let other = s.type_ids.iter().find(|t| !e.type_ids.contains(*t)).expect("spare type").clone();
        for mutated in [e.clone().with_types([other]), e.clone().with_types(Vec::<String>::new())] {
            check!(
                logprob(&no_types, e, "de") == logprob(&no_types, &mutated, "de"),
                "no-types output moved with types on {}",
                e.id
            );
        }
        let art_mut = e.clone().with_article("de", "ganz anderer artikel").with_article("zh", "另一篇文章");
        check!(
            logprob(&mono, e, "en") == logprob(&mono, &art_mut, "en"),
            "monolingual output moved with other-language articles on {}",
            e.id
        );
        let leaked = e.clone().with_description("en", "leaked answer words");
        let pool = |x: &Entity| {
            pool_descriptions(full.description_encoder(), &full.store, &full.vocab, &full.languages, x, &"en".into())
        };
        check!(pool(e) == pool(&leaked), "pooled descriptions depend on the target description for {}", e.id);
        check!(
            logprob(&full, e, "en") == logprob(&full, &leaked, "en"),
            "full output depends on the target description for {}",
            e.id
        );
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("{} entities: no-desc, no-types, monolingual invariant; no target leak", complete.len()))
}
