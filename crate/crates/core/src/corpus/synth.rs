//! Deterministic synthetic corpora for desk-scale experiments.
//!
//! Every language gets its own lexicon of type words, attribute words,
//! function words and filler. An entity has one type and one attribute;
//! its article mentions both and its description is `<type> <of> <attr>`,
//! so the right description is a learnable function of the inputs. In the
//! type-critical variant the article never names the type and the
//! description is the type word alone.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArticleText, Corpus, DescriptionText, Entity, LanguageCode, LanguageConfig, LanguageSet};
use crate::error::Result;
use crate::text::{self, LengthUnit};

fn default_filler() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_entities: usize,
    pub languages: Vec<LanguageConfig>,
    /// Number of distinct attribute words per language.
    pub vocab_size: usize,
    pub n_types: usize,
    pub seed: u64,
    /// Per-language probability that an entity lacks an article.
    #[serde(default)]
    pub missing_article_rate: BTreeMap<LanguageCode, f64>,
    /// Per-language probability that an article lacks a description.
    #[serde(default)]
    pub missing_description_rate: BTreeMap<LanguageCode, f64>,
    /// Probability that an entity has no type id.
    #[serde(default)]
    pub untyped_rate: f64,
    /// Article omits the type word; description is the type word only.
    #[serde(default)]
    pub type_critical: bool,
    /// Each entity gets a description in exactly one of its article languages.
    #[serde(default)]
    pub single_description: bool,
    /// Maximum filler words before and after the informative span.
    #[serde(default = "default_filler")]
    pub max_filler: usize,
}

impl SynthSpec {
    pub fn new(n_entities: usize, languages: Vec<LanguageConfig>, seed: u64) -> Self {
        SynthSpec {
            n_entities,
            languages,
            vocab_size: 40,
            n_types: 10,
            seed,
            missing_article_rate: BTreeMap::new(),
            missing_description_rate: BTreeMap::new(),
            untyped_rate: 0.0,
            type_critical: false,
            single_description: false,
            max_filler: default_filler(),
        }
    }
}

/// Token-level translation table between two languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDictionary {
    pub src_lang: LanguageCode,
    pub tgt_lang: LanguageCode,
    pub map: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub languages: LanguageSet,
    /// One dictionary per ordered language pair.
    pub dictionaries: Vec<TokenDictionary>,
    /// Every type id the generator can emit.
    pub type_ids: Vec<String>,
}

const FILLER_WORDS: usize = 12;
const FUNCTION_WORDS: usize = 4; // is, a, from, of

struct Lexicon {
    unit: LengthUnit,
    types: Vec<String>,
    attrs: Vec<String>,
    function: Vec<String>,
    filler: Vec<String>,
}

impl Lexicon {
    fn concepts(&self) -> impl Iterator<Item = &String> {
        self.types
            .iter()
            .chain(&self.attrs)
            .chain(&self.function)
            .chain(&self.filler)
    }
}

struct WordFactory {
    used: HashSet<String>,
    cjk: Vec<char>,
}

impl WordFactory {
    const ONSETS: &'static [&'static str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st",
        "kl",
    ];
    const VOWELS: &'static [&'static str] = &["a", "e", "i", "o", "u", "ai", "ou"];

    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut cjk: Vec<char> = (0x4E00u32..0x4E00 + 6000).filter_map(char::from_u32).collect();
        cjk.shuffle(rng);
        WordFactory {
            used: HashSet::new(),
            cjk,
        }
    }

    fn word(&mut self, rng: &mut ChaCha8Rng, capitalized: bool) -> String {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(Self::ONSETS.choose(rng).unwrap());
                w.push_str(Self::VOWELS.choose(rng).unwrap());
            }
            if capitalized {
                let mut c = w.chars();
                let first = c.next().unwrap().to_uppercase().collect::<String>();
                w = first + c.as_str();
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn glyph(&mut self) -> String {
        // 6000 glyphs cover every lexicon this generator is asked for at desk scale.
        self.cjk.pop().expect("synthetic glyph inventory exhausted").to_string()
    }

    fn token(&mut self, rng: &mut ChaCha8Rng, unit: LengthUnit) -> String {
        match unit {
            LengthUnit::Word => self.word(rng, false),
            LengthUnit::Character => self.glyph(),
        }
    }
}

pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    let languages = LanguageSet::new(spec.languages.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut words = WordFactory::new(&mut rng);

    let lexicons: Vec<Lexicon> = spec
        .languages
        .iter()
        .map(|cfg| {
            let unit = cfg.length_unit;
            let mut gen = |n: usize| -> Vec<String> {
                (0..n).map(|_| words.token(&mut rng, unit)).collect()
            };
            Lexicon {
                unit,
                types: gen(spec.n_types),
                attrs: gen(spec.vocab_size),
                function: gen(FUNCTION_WORDS),
                filler: gen(FILLER_WORDS),
            }
        })
        .collect();

    let type_ids: Vec<String> = (0..spec.n_types).map(|k| format!("T{k:03}")).collect();
    let mut entities = Vec::with_capacity(spec.n_entities);

    for i in 0..spec.n_entities {
        let type_idx = rng.random_range(0..spec.n_types);
        let attr_idx = rng.random_range(0..spec.vocab_size);
        let latin_name = words.word(&mut rng, true);
        let glyph_name = format!("{}{}", words.glyph(), words.glyph());
        let typed = rng.random::<f64>() >= spec.untyped_rate;

        let mut has_article: Vec<bool> = spec
            .languages
            .iter()
            .map(|l| rng.random::<f64>() >= rate(&spec.missing_article_rate, &l.code))
            .collect();
        let mut has_desc: Vec<bool> = spec
            .languages
            .iter()
            .zip(&has_article)
            .map(|(l, &a)| a && rng.random::<f64>() >= rate(&spec.missing_description_rate, &l.code))
            .collect();
        if spec.single_description {
            let with_article: Vec<usize> = (0..has_article.len()).filter(|&k| has_article[k]).collect();
            let keep = with_article.choose(&mut rng).copied();
            for (k, d) in has_desc.iter_mut().enumerate() {
                *d = Some(k) == keep;
            }
        }
        if !has_desc.iter().any(|&d| d) {
            let k = rng.random_range(0..spec.languages.len());
            has_article[k] = true;
            has_desc[k] = true;
        }

        let mut entity = Entity::new(format!("E{i:05}"));
        if typed {
            entity.type_ids.push(type_ids[type_idx].clone());
        }
        for (k, cfg) in spec.languages.iter().enumerate() {
            let lex = &lexicons[k];
            let (is, a, from, of) = (&lex.function[0], &lex.function[1], &lex.function[2], &lex.function[3]);
            if has_article[k] {
                let name = match lex.unit {
                    LengthUnit::Word => latin_name.clone(),
                    LengthUnit::Character => glyph_name.clone(),
                };
                let mut toks = vec![name];
                toks.extend(filler(&mut rng, lex, spec.max_filler));
                toks.push(is.clone());
                if !spec.type_critical {
                    toks.push(a.clone());
                    toks.push(lex.types[type_idx].clone());
                }
                toks.push(from.clone());
                toks.push(lex.attrs[attr_idx].clone());
                toks.extend(filler(&mut rng, lex, spec.max_filler));
                let body = text::detokenize(&toks, lex.unit);
                entity.articles.insert(
                    cfg.code.clone(),
                    ArticleText::new(cfg.code.clone(), &body).expect("nonempty article"),
                );
            }
            if has_desc[k] {
                let toks: Vec<&String> = if spec.type_critical {
                    vec![&lex.types[type_idx]]
                } else {
                    vec![&lex.types[type_idx], of, &lex.attrs[attr_idx]]
                };
                let body = text::detokenize(&toks, lex.unit);
                entity.descriptions.insert(
                    cfg.code.clone(),
                    DescriptionText::human(cfg.code.clone(), &body).expect("nonempty description"),
                );
            }
        }
        entities.push(entity);
    }

    let mut dictionaries = Vec::new();
    for (a, la) in spec.languages.iter().enumerate() {
        for (b, lb) in spec.languages.iter().enumerate() {
            if a == b {
                continue;
            }
            let map = lexicons[a]
                .concepts()
                .cloned()
                .zip(lexicons[b].concepts().cloned())
                .collect();
            dictionaries.push(TokenDictionary {
                src_lang: la.code.clone(),
                tgt_lang: lb.code.clone(),
                map,
            });
        }
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::from_entities(entities),
        languages,
        dictionaries,
        type_ids,
    })
}

fn rate(rates: &BTreeMap<LanguageCode, f64>, code: &LanguageCode) -> f64 {
    rates.get(code).copied().unwrap_or(0.0)
}

fn filler(rng: &mut ChaCha8Rng, lex: &Lexicon, max: usize) -> Vec<String> {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| lex.filler.choose(rng).unwrap().clone()).collect()
}
