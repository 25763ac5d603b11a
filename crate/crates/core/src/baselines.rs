//! Non-neural baselines: article prefix and cross-language translation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ArticleText, Entity, LanguageCode, LanguageSet, LanguageStats, TokenDictionary};
use crate::error::{Error, Result};
use crate::text::{self, LengthUnit};

/// A baseline's answer for one (entity, language) instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum BaselineOutput {
    Text(String),
    NotApplicable(String),
}

impl BaselineOutput {
    pub fn text(&self) -> Option<&str> {
        match self {
            BaselineOutput::Text(t) => Some(t),
            BaselineOutput::NotApplicable(_) => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, BaselineOutput::Text(_))
    }
}

/// Round-half-up of an average length, never below one unit.
pub fn prefix_length(avg_length: f64) -> usize {
    ((avg_length + 0.5).floor() as usize).max(1)
}

/// The first `prefix_length(avg_length)` units of the article.
pub fn prefix_description(article: &ArticleText, avg_length: f64, unit: LengthUnit) -> String {
    let tokens = text::tokenize(&article.first_paragraph, unit);
    let n = prefix_length(avg_length).min(tokens.len());
    text::detokenize(&tokens[..n], unit)
}

/// Prefix baseline with per-language lengths taken from corpus statistics.
#[derive(Debug, Clone)]
pub struct PrefixBaseline {
    pub lengths: BTreeMap<LanguageCode, f64>,
    pub languages: LanguageSet,
}

impl PrefixBaseline {
    pub fn from_stats(stats: &[LanguageStats], languages: LanguageSet) -> Self {
        let lengths = stats
            .iter()
            .filter_map(|s| s.avg_description_length.map(|a| (s.language.clone(), a)))
            .collect();
        PrefixBaseline { lengths, languages }
    }

    pub fn describe(&self, entity: &Entity, target: &LanguageCode) -> BaselineOutput {
        let Some(article) = entity.articles.get(target) else {
            return BaselineOutput::NotApplicable(format!("no {target} article"));
        };
        let Some(&avg) = self.lengths.get(target) else {
            return BaselineOutput::NotApplicable(format!("no length statistic for {target}"));
        };
        BaselineOutput::Text(prefix_description(article, avg, self.languages.unit(target)))
    }
}

pub trait Translator {
    fn translate(&self, text: &str, source: &LanguageCode, target: &LanguageCode) -> Result<String>;
}

/// Token-for-token translation through per-pair dictionaries. Tokens
/// missing from a dictionary pass through unchanged.
#[derive(Debug, Clone, Default)]
pub struct ToyTranslator {
    dictionaries: BTreeMap<(LanguageCode, LanguageCode), BTreeMap<String, String>>,
    languages: Option<LanguageSet>,
}

impl ToyTranslator {
    pub fn new(dictionaries: impl IntoIterator<Item = TokenDictionary>, languages: LanguageSet) -> Self {
        ToyTranslator {
            dictionaries: dictionaries
                .into_iter()
                .map(|d| ((d.src_lang, d.tgt_lang), d.map))
                .collect(),
            languages: Some(languages),
        }
    }

    fn unit(&self, lang: &LanguageCode) -> LengthUnit {
        self.languages.as_ref().map_or(LengthUnit::Word, |l| l.unit(lang))
    }
}

impl Translator for ToyTranslator {
    fn translate(&self, text: &str, source: &LanguageCode, target: &LanguageCode) -> Result<String> {
        let dict = self
            .dictionaries
            .get(&(source.clone(), target.clone()))
            .ok_or_else(|| Error::Translator(format!("no dictionary for {source}->{target}")))?;
        let tokens: Vec<String> = text::tokenize(text, self.unit(source))
            .into_iter()
            .map(|t| dict.get(&t).cloned().unwrap_or(t))
            .collect();
        Ok(text::detokenize(&tokens, self.unit(target)))
    }
}

/// Source language for the translation baseline: the non-target description
/// language with the most articles, ties to the smaller code.
pub fn translation_source(
    entity: &Entity,
    target: &LanguageCode,
    resource_ranking: &BTreeMap<LanguageCode, usize>,
) -> Option<LanguageCode> {
    entity
        .descriptions
        .keys()
        .filter(|l| *l != target)
        .max_by(|a, b| {
            let ra = resource_ranking.get(*a).copied().unwrap_or(0);
            let rb = resource_ranking.get(*b).copied().unwrap_or(0);
            ra.cmp(&rb).then_with(|| b.cmp(a))
        })
        .cloned()
}

/// Translate the highest-resource other-language description into `target`.
pub fn translation_description(
    entity: &Entity,
    target: &LanguageCode,
    translator: &dyn Translator,
    resource_ranking: &BTreeMap<LanguageCode, usize>,
) -> Result<BaselineOutput> {
    let Some(source) = translation_source(entity, target, resource_ranking) else {
        return Ok(BaselineOutput::NotApplicable(format!(
            "no description outside {target}"
        )));
    };
    let text = &entity.descriptions[&source].text;
    Ok(BaselineOutput::Text(translator.translate(text, &source, target)?))
}

pub fn save_dictionaries(dicts: &[TokenDictionary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for d in dicts {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn load_dictionaries(path: impl AsRef<Path>) -> Result<Vec<TokenDictionary>> {
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
