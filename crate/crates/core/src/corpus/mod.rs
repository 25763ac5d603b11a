//! Entities, their per-language articles and descriptions, and corpus I/O.
//!
//! A corpus is stored as JSONL, one entity per line:
//!
//! ```text
//! {"id": "Q44", "articles": {"en": "..."}, "descriptions": {"en": "..."}, "types": ["Q154"]}
//! ```
//!
//! Only the first paragraph of each article is kept. An entity is admitted
//! when at least one language carries both an article and a description;
//! other lines are skipped with a diagnostic.

mod dedup;
mod split;
mod stats;
mod synth;

pub use dedup::{dedup_exact_matches, DedupOutcome};
pub use split::{build_splits, sample_training_instance, SplitSizes, SplitSpec, TrainingInstance};
pub use stats::{
    compute_language_stats, language_coverage_distribution, wikidata_overlap_stats,
    CoverageHistogram, DescriptionTable, LanguageStats, OverlapStats,
};
pub use synth::{generate_synthetic_corpus, SynthSpec, SyntheticCorpus, TokenDictionary};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{self, LengthUnit};

/// Short language tag such as `en` or `zh`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl Into<String>) -> Self {
        LanguageCode(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LanguageCode {
    fn from(s: &str) -> Self {
        LanguageCode::new(s)
    }
}

/// One entry of the language configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageConfig {
    pub code: LanguageCode,
    pub length_unit: LengthUnit,
}

impl LanguageConfig {
    pub fn word(code: &str) -> Self {
        LanguageConfig {
            code: code.into(),
            length_unit: LengthUnit::Word,
        }
    }

    pub fn character(code: &str) -> Self {
        LanguageConfig {
            code: code.into(),
            length_unit: LengthUnit::Character,
        }
    }
}

/// The configured languages, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageSet(Vec<LanguageConfig>);

impl LanguageSet {
    pub fn new(langs: Vec<LanguageConfig>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for l in &langs {
            if l.code.as_str().is_empty() {
                return Err(Error::Validation("empty language code".into()));
            }
            if !seen.insert(l.code.clone()) {
                return Err(Error::Validation(format!(
                    "language {} configured twice",
                    l.code
                )));
            }
        }
        Ok(LanguageSet(langs))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let langs: Vec<LanguageConfig> = serde_json::from_str(&raw)?;
        Self::new(langs)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageConfig> {
        self.0.iter()
    }

    pub fn codes(&self) -> impl Iterator<Item = &LanguageCode> {
        self.0.iter().map(|l| &l.code)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.0.iter().any(|l| &l.code == code)
    }

    /// Length unit of `code`; unknown codes count in words.
    pub fn unit(&self, code: &LanguageCode) -> LengthUnit {
        self.0
            .iter()
            .find(|l| &l.code == code)
            .map(|l| l.length_unit)
            .unwrap_or(LengthUnit::Word)
    }
}

/// First paragraph of an article in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleText {
    pub language: LanguageCode,
    pub first_paragraph: String,
}

impl ArticleText {
    /// Keeps only the first paragraph of `raw`. Returns `None` if nothing remains.
    pub fn new(language: LanguageCode, raw: &str) -> Option<Self> {
        let first_paragraph = text::first_paragraph(raw);
        (!first_paragraph.is_empty()).then_some(ArticleText {
            language,
            first_paragraph,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptionSource {
    Human,
    Model,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionText {
    pub language: LanguageCode,
    pub text: String,
    pub source: DescriptionSource,
}

impl DescriptionText {
    pub fn new(language: LanguageCode, raw: &str, source: DescriptionSource) -> Option<Self> {
        let text = text::normalize(raw);
        (!text.is_empty()).then_some(DescriptionText {
            language,
            text,
            source,
        })
    }

    pub fn human(language: LanguageCode, raw: &str) -> Option<Self> {
        Self::new(language, raw, DescriptionSource::Human)
    }
}

/// A language-independent concept with per-language articles and descriptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub articles: BTreeMap<LanguageCode, ArticleText>,
    pub descriptions: BTreeMap<LanguageCode, DescriptionText>,
    pub type_ids: Vec<String>,
}

impl Entity {
    pub fn new(id: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            articles: BTreeMap::new(),
            descriptions: BTreeMap::new(),
            type_ids: Vec::new(),
        }
    }

    pub fn with_article(mut self, lang: &str, raw: &str) -> Self {
        let code = LanguageCode::new(lang);
        if let Some(a) = ArticleText::new(code.clone(), raw) {
            self.articles.insert(code, a);
        }
        self
    }

    pub fn with_description(mut self, lang: &str, raw: &str) -> Self {
        let code = LanguageCode::new(lang);
        if let Some(d) = DescriptionText::human(code.clone(), raw) {
            self.descriptions.insert(code, d);
        }
        self
    }

    pub fn with_types<I, S>(mut self, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.type_ids = types.into_iter().map(Into::into).collect();
        self
    }

    /// At least one language has both an article and a description.
    pub fn is_admissible(&self) -> bool {
        self.descriptions
            .keys()
            .any(|l| self.articles.contains_key(l))
    }

    pub fn article_languages(&self) -> impl Iterator<Item = &LanguageCode> {
        self.articles.keys()
    }

    pub fn description_languages(&self) -> impl Iterator<Item = &LanguageCode> {
        self.descriptions.keys()
    }

    pub fn to_record(&self) -> EntityRecord {
        EntityRecord {
            id: self.id.clone(),
            articles: self
                .articles
                .iter()
                .map(|(l, a)| (l.clone(), a.first_paragraph.clone()))
                .collect(),
            descriptions: self
                .descriptions
                .iter()
                .map(|(l, d)| (l.clone(), d.text.clone()))
                .collect(),
            types: self.type_ids.clone(),
        }
    }
}

/// Wire form of one corpus line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    #[serde(default)]
    pub articles: BTreeMap<LanguageCode, String>,
    #[serde(default)]
    pub descriptions: BTreeMap<LanguageCode, String>,
    #[serde(default)]
    pub types: Vec<String>,
}

/// A loading-time warning about a line that was skipped or trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub entity_id: String,
    pub message: String,
}

/// Entities keyed by id, iterated in id order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    entities: BTreeMap<String, Entity>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entities(entities: impl IntoIterator<Item = Entity>) -> Self {
        Corpus {
            entities: entities.into_iter().map(|e| (e.id.clone(), e)).collect(),
        }
    }

    pub fn insert(&mut self, entity: Entity) -> Option<Entity> {
        self.entities.insert(entity.id.clone(), entity)
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entities.keys()
    }

    /// Subset restricted to `ids`, skipping unknown ids.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Corpus {
        Corpus::from_entities(ids.into_iter().filter_map(|id| self.get(id).cloned()))
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for e in self.iter() {
            serde_json::to_writer(&mut w, &e.to_record())?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Result of [`load_corpus`]: the admitted entities and warnings for the rest.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub diagnostics: Vec<Diagnostic>,
}

/// Read a JSONL corpus file.
pub fn load_corpus(path: impl AsRef<Path>, languages: &LanguageSet) -> Result<LoadedCorpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), languages)
}

/// Parse JSONL corpus content from any reader.
pub fn parse_corpus(reader: impl BufRead, languages: &LanguageSet) -> Result<LoadedCorpus> {
    let mut corpus = Corpus::new();
    let mut diagnostics = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EntityRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if let Some(&first) = first_seen.get(&record.id) {
            return Err(Error::DuplicateId {
                id: record.id,
                first,
                second: lineno,
            });
        }
        first_seen.insert(record.id.clone(), lineno);

        for lang in record.articles.keys().chain(record.descriptions.keys()) {
            if !languages.contains(lang) {
                return Err(Error::Validation(format!(
                    "line {lineno}: unknown language code {lang:?} in entity {}",
                    record.id
                )));
            }
        }

        let mut entity = Entity::new(record.id.clone());
        entity.type_ids = record.types;
        for (lang, raw) in record.articles {
            match ArticleText::new(lang.clone(), &raw) {
                Some(a) => {
                    entity.articles.insert(lang, a);
                }
                None => diagnostics.push(Diagnostic {
                    line: lineno,
                    entity_id: record.id.clone(),
                    message: format!("empty article in {lang} dropped"),
                }),
            }
        }
        for (lang, raw) in record.descriptions {
            match DescriptionText::human(lang.clone(), &raw) {
                Some(d) => {
                    entity.descriptions.insert(lang, d);
                }
                None => diagnostics.push(Diagnostic {
                    line: lineno,
                    entity_id: record.id.clone(),
                    message: format!("empty description in {lang} dropped"),
                }),
            }
        }

        if !entity.is_admissible() {
            log::warn!("line {lineno}: entity {} rejected by admission rule", entity.id);
            diagnostics.push(Diagnostic {
                line: lineno,
                entity_id: entity.id,
                message: "no language has both an article and a description".into(),
            });
            continue;
        }
        corpus.insert(entity);
    }

    Ok(LoadedCorpus {
        corpus,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn langs() -> LanguageSet {
        LanguageSet::new(vec![
            LanguageConfig::word("en"),
            LanguageConfig::word("ro"),
            LanguageConfig::character("zh"),
        ])
        .unwrap()
    }

    fn parse(s: &str) -> Result<LoadedCorpus> {
        parse_corpus(s.as_bytes(), &langs())
    }

    #[test]
    fn minimal_entity_is_admitted() {
        let out = parse(
            r#"{"id":"Q44","articles":{"en":"Beer is a drink."},"descriptions":{"en":"alcoholic drink"},"types":["Q154"]}"#,
        )
        .unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert!(out.diagnostics.is_empty());
        let e = out.corpus.get("Q44").unwrap();
        assert_eq!(e.type_ids, vec!["Q154"]);
    }

    #[test]
    fn missing_description_is_rejected_with_warning() {
        let out = parse(r#"{"id":"Q1","articles":{"en":"Text."},"descriptions":{}}"#).unwrap();
        assert!(out.corpus.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].line, 1);
    }

    #[test]
    fn article_and_description_in_different_languages_is_rejected() {
        let out =
            parse(r#"{"id":"Q1","articles":{"en":"Text."},"descriptions":{"ro":"ceva"}}"#).unwrap();
        assert!(out.corpus.is_empty());
    }

    #[test]
    fn duplicate_ids_name_both_lines() {
        let src = concat!(
            r#"{"id":"Q1","articles":{"en":"a"},"descriptions":{"en":"b"}}"#,
            "\n\n",
            r#"{"id":"Q1","articles":{"en":"c"},"descriptions":{"en":"d"}}"#,
        );
        match parse(src) {
            Err(Error::DuplicateId { first, second, .. }) => {
                assert_eq!((first, second), (1, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = concat!(
            r#"{"id":"Q1","articles":{"en":"a"},"descriptions":{"en":"b"}}"#,
            "\n{not json\n"
        );
        assert!(matches!(parse(src), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unknown_language_is_a_validation_error() {
        let src = r#"{"id":"Q1","articles":{"xx":"a"},"descriptions":{"xx":"b"}}"#;
        assert!(matches!(parse(src), Err(Error::Validation(_))));
    }

    #[test]
    fn only_first_paragraph_is_kept() {
        let src = r#"{"id":"Q1","articles":{"en":"First part.\n\nSecond part."},"descriptions":{"en":"x"}}"#;
        let out = parse(src).unwrap();
        let a = &out.corpus.get("Q1").unwrap().articles[&LanguageCode::new("en")];
        assert_eq!(a.first_paragraph, "First part.");
    }

    #[test]
    fn jsonl_roundtrip() {
        let c = Corpus::from_entities([
            Entity::new("a")
                .with_article("en", "x y")
                .with_description("en", "z")
                .with_types(["t"]),
            Entity::new("b")
                .with_article("zh", "啤酒")
                .with_description("zh", "饮料"),
        ]);
        let dir = std::env::temp_dir().join(format!("shortdesc-rt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.jsonl");
        c.write_jsonl(&path).unwrap();
        let back = load_corpus(&path, &langs()).unwrap();
        assert_eq!(back.corpus, c);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn duplicate_language_config_rejected() {
        assert!(LanguageSet::new(vec![LanguageConfig::word("en"), LanguageConfig::word("en")]).is_err());
    }
}
