use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{Corpus, LanguageCode, LanguageSet};
use crate::error::{Error, Result};
use crate::text::{self, LengthUnit};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
const BASE_SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

fn language_token(code: &LanguageCode) -> String {
    format!("<lang:{code}>")
}

/// Bijective token ↔ id map. Ids `0..4` are PAD, BOS, EOS, UNK, followed by
/// one token per configured language, followed by corpus tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    n_special: usize,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("token {t:?} appears twice in vocabulary")));
            }
        }
        for (i, s) in BASE_SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Validation(format!("reserved id {i} must be {s}")));
            }
        }
        let n_special = BASE_SPECIALS.len()
            + tokens[BASE_SPECIALS.len()..]
                .iter()
                .take_while(|t| t.starts_with("<lang:"))
                .count();
        Ok(Vocabulary {
            tokens,
            index,
            n_special,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Reserved target-language token for `code`.
    pub fn language_id(&self, code: &LanguageCode) -> Option<usize> {
        self.index.get(&language_token(code)).copied()
    }

    /// PAD, BOS, EOS, UNK and the language tokens.
    pub fn is_special(&self, id: usize) -> bool {
        id < self.n_special
    }

    pub fn num_special(&self) -> usize {
        self.n_special
    }

    /// Token ids of `text`, truncated to `max_len`.
    pub fn encode(&self, text: &str, unit: LengthUnit, max_len: usize) -> Vec<usize> {
        text::tokenize(text, unit)
            .iter()
            .take(max_len)
            .map(|t| self.id(t))
            .collect()
    }

    /// Text for `ids`, stopping at EOS and skipping reserved ids.
    pub fn decode(&self, ids: &[usize], unit: LengthUnit) -> String {
        let toks: Vec<&str> = ids
            .iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| !self.is_special(i) || i == UNK)
            .map(|&i| self.token(i))
            .collect();
        text::detokenize(&toks, unit)
    }

    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<&str, usize> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let map: BTreeMap<String, usize> = serde_json::from_str(raw)?;
        let mut tokens = vec![None; map.len()];
        for (t, i) in map {
            let slot = tokens
                .get_mut(i)
                .ok_or_else(|| Error::Validation(format!("vocabulary id {i} out of range")))?;
            if slot.is_some() {
                return Err(Error::Validation(format!("vocabulary id {i} assigned twice")));
            }
            *slot = Some(t);
        }
        Self::from_tokens(tokens.into_iter().map(|t| t.unwrap()).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }
}

/// Keep the `max_size` most frequent article/description tokens; ties go to
/// the lexicographically smaller token.
pub fn build_vocab(corpus: &Corpus, languages: &LanguageSet, max_size: usize) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for e in corpus.iter() {
        let texts = e
            .articles
            .values()
            .map(|a| (&a.language, &a.first_paragraph))
            .chain(e.descriptions.values().map(|d| (&d.language, &d.text)));
        for (lang, t) in texts {
            for tok in text::tokenize(t, languages.unit(lang)) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = BASE_SPECIALS.iter().map(|s| s.to_string()).collect();
    tokens.extend(languages.codes().map(language_token));
    let reserved: std::collections::HashSet<String> = tokens.iter().cloned().collect();
    tokens.extend(
        ranked
            .into_iter()
            .map(|(t, _)| t)
            .filter(|t| !reserved.contains(t))
            .take(max_size),
    );
    Vocabulary::from_tokens(tokens).expect("vocabulary construction keeps tokens unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Entity, LanguageConfig};

    fn langs() -> LanguageSet {
        LanguageSet::new(vec![LanguageConfig::word("en"), LanguageConfig::word("de")]).unwrap()
    }

    #[test]
    fn single_token_corpus() {
        let c = Corpus::from_entities([Entity::new("1").with_article("en", "a").with_description("en", "a")]);
        let v = build_vocab(&c, &langs(), 100);
        assert_eq!(v.len(), 4 + 2 + 1);
        assert_eq!(v.id("a"), 6);
        assert_eq!(v.language_id(&"de".into()), Some(5));
        assert!(v.is_special(5) && !v.is_special(6));
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = Corpus::from_entities([Entity::new("1").with_article("en", "b a").with_description("en", "c")]);
        let v = build_vocab(&c, &langs(), 100);
        assert!(v.id("a") < v.id("b"));
        assert!(v.id("b") < v.id("c"));
    }

    #[test]
    fn rare_tokens_become_unk() {
        let c = Corpus::from_entities([Entity::new("1")
            .with_article("en", "x x x y y z")
            .with_description("en", "x")]);
        let v = build_vocab(&c, &langs(), 2);
        assert!(v.contains("x") && v.contains("y"));
        assert_eq!(v.id("z"), UNK);
        assert_eq!(v.encode("x z", LengthUnit::Word, 10), vec![v.id("x"), UNK]);
    }

    #[test]
    fn json_roundtrip_and_decode() {
        let c = Corpus::from_entities([Entity::new("1").with_article("en", "p q").with_description("en", "r")]);
        let v = build_vocab(&c, &langs(), 10);
        let back = Vocabulary::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(back, v);
        let ids = vec![BOS, v.id("p"), v.id("r"), EOS, v.id("q")];
        assert_eq!(v.decode(&ids, LengthUnit::Word), "p r");
    }

    #[test]
    fn corrupt_json_is_rejected() {
        assert!(Vocabulary::from_json(r#"{"<pad>":0,"<bos>":1,"<eos>":2,"<unk>":3,"a":3}"#).is_err());
        assert!(Vocabulary::from_json(r#"{"<pad>":0,"<bos>":1,"<eos>":2,"a":3}"#).is_err());
    }
}
