use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::autograd::Mat;
use shortdesc::corpus::{generate_synthetic_corpus, LanguageConfig, SynthSpec};
use shortdesc::encoding::{build_vocab, TypeEmbeddingTable};
use shortdesc::generator::{DescriptionModel, ModelConfig, SystemKind};
use shortdesc::metric::{
    emd, emd_with, euclidean_cost, similarity, EmdSolver, SimilarityConfig, SinkhornConfig, TokenDistribution,
};

use crate::Outcome;

/// Cheapest plan over all greedy fills (each cell in turn takes as much mass
/// as both marginals allow). Every fill is feasible, and every vertex of the
/// transport polytope is one: order its tree cells leaf first, then the rest.
/// All (m·n)! cell orders are enumerated.
fn enumerate(cost: &Mat, a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = cost.dim();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut order: Vec<usize> = (0..cells.len()).collect();
    permute(&mut order, 0, &mut |ord| {
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let mut total = 0.0;
        for &k in ord {
            let (i, j) = cells[k];
            let f = ra[i].min(rb[j]);
            ra[i] -= f;
            rb[j] -= f;
            total += f * cost[[i, j]];
        }
        best = best.min(total);
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, m: usize, d: usize) -> TokenDistribution {
    let e = Mat::from_shape_simple_fn((m, d), || rng.random_range(-2.0..2.0));
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    TokenDistribution::weighted(e, &w).expect("distribution")
}

fn embedder() -> DescriptionModel {
    let langs = vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")];
    let s = generate_synthetic_corpus(&SynthSpec::new(20, langs, 5)).expect("corpus");
    let cfg = ModelConfig { d_model: 8, heads: 2, d_desc: 8, desc_heads: 2, ..ModelConfig::for_system(SystemKind::Full) };
    let vocab = build_vocab(&s.corpus, &s.languages, 500);
    let types = TypeEmbeddingTable::random(s.type_ids.clone(), cfg.d_type, 1).expect("types");
    DescriptionModel::new(cfg, s.languages.clone(), vocab, types).expect("model")
}

pub fn emd_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut exact_worst: f64 = 0.0;
    let mut small = 0;
    for m in 1..=3 {
        for n in 1..=3 {
            for _ in 0..12 {
                let p = random_distribution(&mut rng, m, 3);
                let q = random_distribution(&mut rng, n, 3);
                let cost = euclidean_cost(p.embeddings(), q.embeddings()).map_err(|e| e.to_string())?;
                let want = enumerate(&cost, p.masses(), q.masses());
                let got = emd_with(&p, &q, EmdSolver::Exact).map_err(|e| e.to_string())?;
                exact_worst = exact_worst.max((got - want).abs());
                small += 1;
            }
        }
    }
    check!(exact_worst <= 1e-9, "exact LP off the enumeration oracle by {exact_worst:.2e}");

    let mut sink_worst: f64 = 0.0;
    for m in 1..=8 {
        for n in 1..=8 {
            let p = random_distribution(&mut rng, m, 4);
            let q = random_distribution(&mut rng, n, 4);
            let exact = emd_with(&p, &q, EmdSolver::Exact).map_err(|e| e.to_string())?;
            let approx = emd_with(&p, &q, EmdSolver::Sinkhorn(SinkhornConfig::default())).map_err(|e| e.to_string())?;
            sink_worst = sink_worst.max((exact - approx).abs());
        }
    }
    check!(sink_worst < 1e-3, "regularized solver off exact by {sink_worst:.2e}");

    let model = embedder();
    let cfg = SimilarityConfig::default();
    for (t, l) in [("river in europe", "en"), ("stadt in bayern", "de"), ("中国城市", "zh"), ("a", "en")] {
        let s = similarity(t, t, &l.into(), &model, &cfg).map_err(|e| e.to_string())?;
        check!(s == 1.0, "similarity({t:?}, itself) = {s}");
    }

    let mut sym_worst: f64 = 0.0;
    for _ in 0..200 {
        let (m, n) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let p = TokenDistribution::uniform(Mat::from_shape_simple_fn((m, 4), || rng.random_range(-1.0..1.0))).expect("p");
        let q = TokenDistribution::uniform(Mat::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0))).expect("q");
        let (pq, qp) = (emd(&p, &q).map_err(|e| e.to_string())?, emd(&q, &p).map_err(|e| e.to_string())?);
        sym_worst = sym_worst.max((pq - qp).abs());
    }
    check!(sym_worst <= 1e-9, "uniform-weight asymmetry {sym_worst:.2e}");
    Ok(format!(
        "exact vs enumeration {exact_worst:.1e} over {small} cases; sinkhorn vs exact {sink_worst:.1e} (m,n<=8); self-similarity 1.0; symmetry {sym_worst:.1e}"
    ))
}
