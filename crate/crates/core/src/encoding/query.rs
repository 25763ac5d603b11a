use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Entity, LanguageCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Train,
    Infer,
}

/// Pick the article language whose tokens act as attention queries in fusion.
///
/// Training draws uniformly among article languages. Inference uses the
/// target when it has an article and otherwise draws uniformly with `rng`.
pub fn select_query_language<R: Rng + ?Sized>(
    entity: &Entity,
    target: &LanguageCode,
    mode: QueryMode,
    rng: &mut R,
) -> Result<LanguageCode> {
    if mode == QueryMode::Infer && entity.articles.contains_key(target) {
        return Ok(target.clone());
    }
    let langs: Vec<&LanguageCode> = entity.articles.keys().collect();
    langs
        .choose(rng)
        .map(|l| (*l).clone())
        .ok_or_else(|| Error::Insufficient(format!("entity {} has no article", entity.id)))
}
