//! End-to-end comparison of generator configurations and baselines.
//!
//! Trains each requested system, decodes every held-out (entity, language)
//! pair that has a reference description, adds the prefix and translation
//! baselines, scores everything with one shared embedder and assembles a
//! per-language results table plus pairwise Bradley–Terry comparisons.

use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_bradley_terry, pairwise_table, BtScores, OutcomeMatrix, PairwiseRow};
use crate::baselines::{translation_description, PrefixBaseline, ToyTranslator};
use crate::corpus::{compute_language_stats, Corpus, LanguageCode, LanguageSet, TokenDictionary};
use crate::encoding::TypeEmbeddingTable;
use crate::error::{Error, Result};
use crate::generator::{fit, DecodeStrategy, DescriptionModel, GenerationRecord, ModelConfig, SystemKind, TrainConfig};
use crate::metric::{similarity, Embedder, ScoreRecord, SimilarityConfig};
use crate::text::fold;

pub const PREFIX: &str = "prefix";
pub const TRANSLATION: &str = "translation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    pub systems: Vec<SystemKind>,
    pub baselines: bool,
    /// Shared architecture; presets only toggle modalities.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeStrategy,
    /// Whose description encoder embeds tokens for scoring.
    pub scorer: SystemKind,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            systems: SystemKind::ALL.to_vec(),
            baselines: true,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeStrategy::Greedy,
            scorer: SystemKind::Full,
        }
    }
}

impl ExperimentSettings {
    pub fn model_config(&self, kind: SystemKind) -> ModelConfig {
        let preset = ModelConfig::for_system(kind);
        ModelConfig {
            use_desc: preset.use_desc,
            use_types: preset.use_types,
            monolingual: preset.monolingual,
            ..self.model.clone()
        }
    }
}

/// Held-out (entity, language) pairs with a reference description.
pub fn test_instances(test: &Corpus) -> Vec<(String, LanguageCode)> {
    test.iter()
        .filter(|e| !e.articles.is_empty())
        .flat_map(|e| e.descriptions.keys().map(move |l| (e.id.clone(), l.clone())))
        .collect()
}

pub fn train_system(
    settings: &ExperimentSettings,
    kind: SystemKind,
    languages: &LanguageSet,
    types: &TypeEmbeddingTable,
    train: &Corpus,
    valid: Option<&Corpus>,
) -> Result<DescriptionModel> {
    info!("training {kind}");
    fit(settings.model_config(kind), languages.clone(), types.clone(), train, valid, &settings.train)
}

pub fn generate_all(model: &DescriptionModel, system: &str, test: &Corpus, strategy: DecodeStrategy) -> Result<Vec<GenerationRecord>> {
    test_instances(test)
        .into_iter()
        .map(|(id, lang)| {
            let entity = test.get(&id).expect("instance from corpus");
            let out = model.generate(entity, &lang, strategy)?;
            Ok(GenerationRecord::new(&id, system, &out))
        })
        .collect()
}

/// Article counts per language, the resource ranking for the translation baseline.
pub fn resource_ranking(corpus: &Corpus) -> BTreeMap<LanguageCode, usize> {
    let mut counts = BTreeMap::new();
    for e in corpus.iter() {
        for l in e.articles.keys() {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Baseline outputs plus the fraction of instances each baseline could answer.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub records: Vec<GenerationRecord>,
    pub applicability: BTreeMap<String, f64>,
}

pub fn run_baselines(
    train: &Corpus,
    test: &Corpus,
    languages: &LanguageSet,
    dictionaries: &[TokenDictionary],
) -> Result<BaselineRun> {
    let prefix = PrefixBaseline::from_stats(&compute_language_stats(train, languages), languages.clone());
    let translator = ToyTranslator::new(dictionaries.iter().cloned(), languages.clone());
    let ranking = resource_ranking(train);
    let instances = test_instances(test);
    let mut records = Vec::new();
    let mut answered: BTreeMap<String, usize> = BTreeMap::new();
    for (id, lang) in &instances {
        let entity = test.get(id).expect("instance from corpus");
        let outputs = [
            (PREFIX, prefix.describe(entity, lang)),
            (TRANSLATION, translation_description(entity, lang, &translator, &ranking)?),
        ];
        for (name, out) in outputs {
            if let Some(text) = out.text() {
                *answered.entry(name.to_string()).or_insert(0) += 1;
                records.push(GenerationRecord {
                    id: id.clone(),
                    lang: lang.clone(),
                    system: name.to_string(),
                    text: text.to_string(),
                    terminated: true,
                    logprob: 0.0,
                });
            }
        }
    }
    let n = instances.len().max(1) as f64;
    let applicability = [PREFIX, TRANSLATION]
        .iter()
        .map(|s| (s.to_string(), answered.get(*s).copied().unwrap_or(0) as f64 / n))
        .collect();
    Ok(BaselineRun { records, applicability })
}

/// Score each record against the test corpus reference. Empty outputs score 0.
pub fn score_records(
    records: &[GenerationRecord],
    test: &Corpus,
    embedder: &dyn Embedder,
    config: &SimilarityConfig,
) -> Result<Vec<ScoreRecord>> {
    records
        .iter()
        .map(|r| {
            let entity = test
                .get(&r.id)
                .ok_or_else(|| Error::Validation(format!("unknown entity {}", r.id)))?;
            let reference = entity
                .descriptions
                .get(&r.lang)
                .ok_or_else(|| Error::Validation(format!("{} has no {} reference", r.id, r.lang)))?;
            let score = if r.text.trim().is_empty() {
                0.0
            } else {
                similarity(&r.text, &reference.text, &r.lang, embedder, config)?
            };
            Ok(ScoreRecord {
                id: r.id.clone(),
                lang: r.lang.clone(),
                system: r.system.clone(),
                score,
            })
        })
        .collect()
}

/// Fraction of records whose folded text equals the folded reference.
pub fn exact_match_rate(records: &[GenerationRecord], test: &Corpus) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records
        .iter()
        .filter(|r| {
            test.get(&r.id)
                .and_then(|e| e.descriptions.get(&r.lang))
                .is_some_and(|d| fold(&d.text) == fold(&r.text))
        })
        .count();
    hits as f64 / records.len() as f64
}

/// One row of the per-language results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub system: String,
    pub per_language: BTreeMap<LanguageCode, Option<f64>>,
    pub pooled: Option<f64>,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub languages: Vec<LanguageCode>,
    pub rows: Vec<ResultsRow>,
}

impl ResultsTable {
    /// Systems without any score get an empty row.
    pub fn build(scores: &[ScoreRecord], systems: &[String], languages: &[LanguageCode]) -> Self {
        let rows = systems
            .iter()
            .map(|s| {
                let mine: Vec<&ScoreRecord> = scores.iter().filter(|r| &r.system == s).collect();
                let per_language = languages
                    .iter()
                    .map(|l| {
                        let v: Vec<f64> = mine.iter().filter(|r| &r.lang == l).map(|r| r.score).collect();
                        (l.clone(), (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64))
                    })
                    .collect();
                ResultsRow {
                    system: s.clone(),
                    per_language,
                    pooled: (!mine.is_empty()).then(|| mine.iter().map(|r| r.score).sum::<f64>() / mine.len() as f64),
                    instances: mine.len(),
                }
            })
            .collect();
        ResultsTable {
            languages: languages.to_vec(),
            rows,
        }
    }

    /// CSV columns: `system`, one column per language, `pooled`, `instances`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system");
        for l in &self.languages {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push_str(",pooled,instances\n");
        for r in &self.rows {
            out.push_str(&r.system);
            for l in &self.languages {
                out.push(',');
                if let Some(Some(v)) = r.per_language.get(l) {
                    out.push_str(&format!("{v:.4}"));
                }
            }
            match r.pooled {
                Some(p) => out.push_str(&format!(",{p:.4},{}\n", r.instances)),
                None => out.push_str(&format!(",,{}\n", r.instances)),
            }
        }
        out
    }
}

/// Pairwise comparison over per-instance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub outcomes: OutcomeMatrix,
    pub bt: BtScores,
    pub rows: Vec<PairwiseRow>,
    /// Systems left out because the comparison graph was disconnected with them.
    #[serde(default)]
    pub dropped: Vec<String>,
}

impl PairwiseReport {
    /// Systems without any score are left out. While the comparison graph
    /// is disconnected, the last remaining system is dropped and the fit
    /// retried, down to two systems.
    pub fn build(scores: &[ScoreRecord], systems: &[String], alpha: f64) -> Result<Self> {
        let mut systems: Vec<String> = systems
            .iter()
            .filter(|s| scores.iter().any(|r| &r.system == *s))
            .cloned()
            .collect();
        let mut by_instance: BTreeMap<(String, LanguageCode), BTreeMap<String, f64>> = BTreeMap::new();
        for r in scores {
            by_instance
                .entry((r.id.clone(), r.lang.clone()))
                .or_default()
                .insert(r.system.clone(), r.score);
        }
        let mut dropped = Vec::new();
        loop {
            let outcomes = OutcomeMatrix::from_scores(systems.clone(), &by_instance);
            match fit_bradley_terry(&outcomes) {
                Ok(bt) => {
                    let rows = pairwise_table(&outcomes, &bt, alpha);
                    return Ok(PairwiseReport { outcomes, bt, rows, dropped });
                }
                Err(Error::Disconnected(msg)) if systems.len() > 2 => {
                    let s = systems.pop().expect("nonempty");
                    warn!("{msg}; leaving {s} out of the pairwise comparison");
                    dropped.push(s);
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn row(&self, a: &str, b: &str) -> Option<&PairwiseRow> {
        self.rows.iter().find(|r| r.system_a == a && r.system_b == b)
    }

    /// Square matrix of `P(row beats column)` as CSV.
    pub fn matrix_csv(&self) -> String {
        let names = &self.bt.systems;
        let mut out = String::from("system");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, a) in names.iter().enumerate() {
            out.push_str(a);
            for (j, b) in names.iter().enumerate() {
                out.push(',');
                if i != j {
                    let star = if self.row(a, b).is_some_and(|r| r.significant) { "*" } else { "" };
                    out.push_str(&format!("{:.3}{star}", self.bt.probability(i, j)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Everything an experiment run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub generations: Vec<GenerationRecord>,
    pub scores: Vec<ScoreRecord>,
    pub results: ResultsTable,
    pub pairwise: PairwiseReport,
    pub exact_match: BTreeMap<String, f64>,
    pub applicability: BTreeMap<String, f64>,
    pub models: BTreeMap<String, DescriptionModel>,
}

impl ExperimentOutcome {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        GenerationRecord::write_jsonl(&self.generations, dir.join("generations.jsonl"))?;
        crate::metric::write_scores(&self.scores, dir.join("scores.jsonl"))?;
        put("results.csv", self.results.to_csv())?;
        put("pairwise.csv", self.pairwise.matrix_csv())?;
        crate::analysis::write_pairwise_csv(&self.pairwise.rows, dir.join("sign_tests.csv"))?;
        put(
            "summary.json",
            serde_json::to_string_pretty(&serde_json::json!({
                "exact_match": self.exact_match,
                "applicability": self.applicability,
                "bt_scores": self.pairwise.bt,
            }))?,
        )
    }
}

/// Train, generate, score and compare.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    settings: &ExperimentSettings,
    languages: &LanguageSet,
    types: &TypeEmbeddingTable,
    train: &Corpus,
    valid: Option<&Corpus>,
    test: &Corpus,
    dictionaries: &[TokenDictionary],
) -> Result<ExperimentOutcome> {
    if settings.systems.is_empty() {
        return Err(Error::Validation("no systems requested".into()));
    }
    let mut models = BTreeMap::new();
    let mut generations = Vec::new();
    let mut exact_match = BTreeMap::new();
    for &kind in &settings.systems {
        let model = train_system(settings, kind, languages, types, train, valid)?;
        let recs = generate_all(&model, kind.name(), test, settings.decode)?;
        exact_match.insert(kind.name().to_string(), exact_match_rate(&recs, test));
        generations.extend(recs);
        models.insert(kind.name().to_string(), model);
    }
    let mut applicability = BTreeMap::new();
    if settings.baselines {
        let run = run_baselines(train, test, languages, dictionaries)?;
        for s in [PREFIX, TRANSLATION] {
            let recs: Vec<GenerationRecord> = run.records.iter().filter(|r| r.system == s).cloned().collect();
            if !recs.is_empty() {
                exact_match.insert(s.to_string(), exact_match_rate(&recs, test));
            }
        }
        generations.extend(run.records);
        applicability = run.applicability;
    }
    let scorer_name = if models.contains_key(settings.scorer.name()) {
        settings.scorer.name()
    } else {
        settings.systems[0].name()
    };
    let scores = score_records(&generations, test, &models[scorer_name], &SimilarityConfig::default())?;
    let mut systems: Vec<String> = settings.systems.iter().map(|k| k.name().to_string()).collect();
    if settings.baselines {
        systems.extend([PREFIX.to_string(), TRANSLATION.to_string()]);
    }
    let langs: Vec<LanguageCode> = languages.codes().cloned().collect();
    let results = ResultsTable::build(&scores, &systems, &langs);
    let pairwise = PairwiseReport::build(&scores, &systems, 0.05)?;
    Ok(ExperimentOutcome {
        generations,
        scores,
        results,
        pairwise,
        exact_match,
        applicability,
        models,
    })
}
