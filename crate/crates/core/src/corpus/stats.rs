use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, LanguageCode, LanguageSet};
use crate::text;

/// Per-language article/description counts in the shape of a corpus statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub language: LanguageCode,
    pub article_count: usize,
    pub missing_description_count: usize,
    /// `missing_description_count / article_count`, in `[0, 1]`.
    pub missing_fraction: f64,
    /// Mean description length in the language's unit; `None` if no descriptions.
    pub avg_description_length: Option<f64>,
}

impl LanguageStats {
    /// Stats from raw counts, as published tables report them.
    pub fn from_counts(
        language: LanguageCode,
        article_count: usize,
        missing_description_count: usize,
        avg_description_length: Option<f64>,
    ) -> Self {
        let missing_fraction = if article_count == 0 {
            0.0
        } else {
            missing_description_count as f64 / article_count as f64
        };
        LanguageStats {
            language,
            article_count,
            missing_description_count,
            missing_fraction,
            avg_description_length,
        }
    }

    pub fn missing_percent(&self) -> f64 {
        100.0 * self.missing_fraction
    }
}

/// One row per configured language, in configuration order.
///
/// A description is "missing" when the entity has an article in the
/// language but no description there. Lengths are averaged over every
/// present description.
pub fn compute_language_stats(corpus: &Corpus, languages: &LanguageSet) -> Vec<LanguageStats> {
    languages
        .iter()
        .map(|cfg| {
            let mut articles = 0;
            let mut missing = 0;
            let mut len_sum = 0usize;
            let mut len_n = 0usize;
            for e in corpus.iter() {
                let has_desc = e.descriptions.get(&cfg.code);
                if e.articles.contains_key(&cfg.code) {
                    articles += 1;
                    if has_desc.is_none() {
                        missing += 1;
                    }
                }
                if let Some(d) = has_desc {
                    len_sum += text::length(&d.text, cfg.length_unit);
                    len_n += 1;
                }
            }
            let avg = (len_n > 0).then(|| len_sum as f64 / len_n as f64);
            LanguageStats::from_counts(cfg.code.clone(), articles, missing, avg)
        })
        .collect()
}

/// How many languages each entity covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    /// k → number of entities with articles in exactly k languages.
    pub articles: BTreeMap<usize, usize>,
    /// k → number of entities with descriptions in exactly k languages.
    pub descriptions: BTreeMap<usize, usize>,
    pub total: usize,
    pub articles_multi_fraction: f64,
    pub descriptions_multi_fraction: f64,
    /// Fraction of entities with at least one type id.
    pub typed_fraction: f64,
}

pub fn language_coverage_distribution(corpus: &Corpus) -> CoverageHistogram {
    let mut articles = BTreeMap::new();
    let mut descriptions = BTreeMap::new();
    let mut typed = 0;
    for e in corpus.iter() {
        *articles.entry(e.articles.len()).or_insert(0) += 1;
        *descriptions.entry(e.descriptions.len()).or_insert(0) += 1;
        if !e.type_ids.is_empty() {
            typed += 1;
        }
    }
    let total = corpus.len();
    let frac = |h: &BTreeMap<usize, usize>| {
        if total == 0 {
            0.0
        } else {
            h.range(2..).map(|(_, c)| c).sum::<usize>() as f64 / total as f64
        }
    };
    CoverageHistogram {
        articles_multi_fraction: frac(&articles),
        descriptions_multi_fraction: frac(&descriptions),
        typed_fraction: if total == 0 { 0.0 } else { typed as f64 / total as f64 },
        articles,
        descriptions,
        total,
    }
}

/// Descriptions keyed by (entity id, language).
pub type DescriptionTable = BTreeMap<(String, LanguageCode), String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub language: LanguageCode,
    pub in_a: usize,
    pub in_b: usize,
    pub in_both: usize,
    /// |both| / |either|; `None` when neither side has any entry.
    pub jaccard: Option<f64>,
    /// Share of `in_both` pairs whose normalized texts are equal.
    pub exact_copy_fraction: Option<f64>,
}

/// Overlap between two description sources, per language.
pub fn wikidata_overlap_stats(a: &DescriptionTable, b: &DescriptionTable) -> Vec<OverlapStats> {
    let langs: BTreeSet<&LanguageCode> = a.keys().chain(b.keys()).map(|(_, l)| l).collect();
    langs
        .into_iter()
        .map(|lang| {
            let keys_a: BTreeSet<&String> =
                a.keys().filter(|(_, l)| l == lang).map(|(id, _)| id).collect();
            let keys_b: BTreeSet<&String> =
                b.keys().filter(|(_, l)| l == lang).map(|(id, _)| id).collect();
            let both: Vec<&&String> = keys_a.intersection(&keys_b).collect();
            let union = keys_a.union(&keys_b).count();
            let copies = both
                .iter()
                .filter(|id| {
                    let key = ((***id).clone(), lang.clone());
                    text::normalize(&a[&key]) == text::normalize(&b[&key])
                })
                .count();
            OverlapStats {
                language: lang.clone(),
                in_a: keys_a.len(),
                in_b: keys_b.len(),
                in_both: both.len(),
                jaccard: (union > 0).then(|| both.len() as f64 / union as f64),
                exact_copy_fraction: (!both.is_empty()).then(|| copies as f64 / both.len() as f64),
            }
        })
        .collect()
}
