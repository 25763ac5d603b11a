//! Earth mover's similarity between a generated and a reference description.
//!
//! Each text becomes a distribution over contextual token embeddings;
//! the score is `1 / (1 + EMD)` under Euclidean ground cost.

mod transport;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use transport::{transport_exact, transport_sinkhorn, SinkhornConfig, TransportPlan};

use crate::autograd::{Graph, Mat};
use crate::corpus::LanguageCode;
use crate::error::{Error, Result};
use crate::generator::DescriptionModel;
use crate::text;

/// Document frequencies over a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Idf {
    pub n_documents: usize,
    pub document_frequency: HashMap<String, usize>,
}

impl Idf {
    /// `ln((N + 1) / (df + 1)) + 1`; unseen tokens get `df = 0`.
    pub fn weight(&self, token: &str) -> f64 {
        let df = self.document_frequency.get(token).copied().unwrap_or(0);
        ((self.n_documents as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }
}

pub fn compute_idf<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<Idf> {
    if documents.is_empty() {
        return Err(Error::Validation("idf needs at least one document".into()));
    }
    let mut df = HashMap::new();
    for doc in documents {
        let unique: HashSet<&str> = doc.iter().map(|t| t.as_ref()).collect();
        for t in unique {
            *df.entry(t.to_string()).or_insert(0) += 1;
        }
    }
    Ok(Idf {
        n_documents: documents.len(),
        document_frequency: df,
    })
}

/// Weighted point cloud: one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    embeddings: Mat,
    masses: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(embeddings: Mat, masses: Vec<f64>) -> Result<Self> {
        if embeddings.nrows() == 0 || embeddings.nrows() != masses.len() {
            return Err(Error::Shape(format!(
                "{} embeddings for {} masses",
                embeddings.nrows(),
                masses.len()
            )));
        }
        if !embeddings.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("token embeddings".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) || ((masses.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Validation("masses must be nonnegative and sum to 1".into()));
        }
        Ok(TokenDistribution { embeddings, masses })
    }

    pub fn uniform(embeddings: Mat) -> Result<Self> {
        let m = embeddings.nrows();
        Self::new(embeddings, vec![1.0 / m.max(1) as f64; m])
    }

    /// Masses proportional to `weights`.
    pub fn weighted(embeddings: Mat, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Validation("weights must have positive sum".into()));
        }
        Self::new(embeddings, weights.iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn embeddings(&self) -> &Mat {
        &self.embeddings
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn canonical(&self) -> Vec<(Vec<u64>, u64)> {
        let mut rows: Vec<(Vec<u64>, u64)> = self
            .embeddings
            .rows()
            .into_iter()
            .zip(&self.masses)
            .map(|(r, m)| (r.iter().map(|v| v.to_bits()).collect(), m.to_bits()))
            .collect();
        rows.sort();
        rows
    }
}

/// Pairwise Euclidean distances, `m × m'`.
pub fn euclidean_cost(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("embedding widths {} and {}", a.ncols(), b.ncols())));
    }
    Ok(Mat::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EmdSolver {
    /// Exact when `m·m' ≤ 64`, Sinkhorn above.
    #[default]
    Auto,
    Exact,
    Sinkhorn(SinkhornConfig),
}

/// Largest problem solved exactly under [`EmdSolver::Auto`].
pub const EXACT_LIMIT: usize = 64;

pub fn emd(p: &TokenDistribution, q: &TokenDistribution) -> Result<f64> {
    emd_with(p, q, EmdSolver::Auto)
}

pub fn emd_with(p: &TokenDistribution, q: &TokenDistribution, solver: EmdSolver) -> Result<f64> {
    let (cp, cq) = (p.canonical(), q.canonical());
    if cp == cq {
        return Ok(0.0);
    }
    // solve in a fixed orientation so that swapping the arguments is exact
    let (p, q) = if (p.len(), &cp) > (q.len(), &cq) { (q, p) } else { (p, q) };
    let cost = euclidean_cost(&p.embeddings, &q.embeddings)?;
    let solver = match solver {
        EmdSolver::Auto if p.len() * q.len() <= EXACT_LIMIT => EmdSolver::Exact,
        EmdSolver::Auto => EmdSolver::Sinkhorn(SinkhornConfig::default()),
        s => s,
    };
    let plan = match solver {
        EmdSolver::Sinkhorn(cfg) => transport_sinkhorn(&cost, &p.masses, &q.masses, &cfg)?,
        _ => transport_exact(&cost, &p.masses, &q.masses)?,
    };
    Ok(plan.cost)
}

/// `1 / (1 + d)`.
pub fn score_from_distance(d: f64) -> f64 {
    1.0 / (1.0 + d.max(0.0))
}

/// Contextual token embeddings for a text.
pub trait Embedder {
    /// Tokens and one embedding row per token.
    fn embed(&self, text: &str, language: &LanguageCode) -> Result<(Vec<String>, Mat)>;
}

impl Embedder for DescriptionModel {
    fn embed(&self, text_in: &str, language: &LanguageCode) -> Result<(Vec<String>, Mat)> {
        let unit = self.languages.unit(language);
        let cap = self.config.max_positions;
        let tokens: Vec<String> = text::tokenize(text_in, unit).into_iter().take(cap).collect();
        if tokens.is_empty() {
            return Err(Error::Validation("text has no tokens".into()));
        }
        let ids: Vec<usize> = tokens.iter().map(|t| self.vocab.id(t)).collect();
        let mut g = Graph::new(&self.store);
        let out = self.description_encoder().forward(&mut g, &ids);
        Ok((tokens, g.value(out).clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
    Idf,
}

/// Scorer configuration: mass weighting, optional idf table and solver.
#[derive(Debug, Clone, Default)]
pub struct SimilarityConfig {
    pub weighting: Weighting,
    pub idf: Option<Idf>,
    pub solver: EmdSolver,
}

fn distribution(tokens: &[String], embeddings: Mat, config: &SimilarityConfig) -> Result<TokenDistribution> {
    match (config.weighting, &config.idf) {
        (Weighting::Uniform, _) => TokenDistribution::uniform(embeddings),
        (Weighting::Idf, Some(idf)) => {
            let w: Vec<f64> = tokens.iter().map(|t| idf.weight(t)).collect();
            TokenDistribution::weighted(embeddings, &w)
        }
        (Weighting::Idf, None) => Err(Error::Validation("idf weighting requires an idf table".into())),
    }
}

/// Similarity of `generated` to `reference`, in `[0, 1]`.
pub fn similarity(
    generated: &str,
    reference: &str,
    language: &LanguageCode,
    embedder: &dyn Embedder,
    config: &SimilarityConfig,
) -> Result<f64> {
    let (gt, ge) = embedder.embed(generated, language)?;
    let (rt, re) = embedder.embed(reference, language)?;
    let p = distribution(&gt, ge, config)?;
    let q = distribution(&rt, re, config)?;
    Ok(score_from_distance(emd_with(&p, &q, config.solver)?))
}

/// One scored instance: JSONL row `{"id","lang","system","score"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub lang: LanguageCode,
    pub system: String,
    pub score: f64,
}

pub fn write_scores(records: &[ScoreRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Per-language means plus the pooled per-instance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAverage {
    pub per_language: BTreeMap<LanguageCode, f64>,
    pub counts: BTreeMap<LanguageCode, usize>,
    pub pooled_mean: f64,
    pub instances: BTreeMap<(String, LanguageCode), f64>,
}

/// Arithmetic means of one system's scores.
pub fn corpus_average(scores: &[ScoreRecord]) -> Result<CorpusAverage> {
    if scores.is_empty() {
        return Err(Error::Validation("no scores to average".into()));
    }
    let mut sums: BTreeMap<LanguageCode, (f64, usize)> = BTreeMap::new();
    let mut instances = BTreeMap::new();
    for r in scores {
        let e = sums.entry(r.lang.clone()).or_insert((0.0, 0));
        e.0 += r.score;
        e.1 += 1;
        instances.insert((r.id.clone(), r.lang.clone()), r.score);
    }
    Ok(CorpusAverage {
        per_language: sums.iter().map(|(l, (s, n))| (l.clone(), s / *n as f64)).collect(),
        counts: sums.iter().map(|(l, (_, n))| (l.clone(), *n)).collect(),
        pooled_mean: scores.iter().map(|r| r.score).sum::<f64>() / scores.len() as f64,
        instances,
    })
}
