use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Entity, LanguageCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Disjoint train/validation/test id sets, with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_ids: BTreeSet<String>,
    pub valid_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
}

impl SplitSpec {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&raw)?)
    }
}

/// Uniform sampling without replacement among admissible entities.
pub fn build_splits(corpus: &Corpus, sizes: SplitSizes, seed: u64) -> Result<SplitSpec> {
    let mut ids: Vec<&String> = corpus
        .iter()
        .filter(|e| e.is_admissible())
        .map(|e| &e.id)
        .collect();
    let need = sizes.train + sizes.valid + sizes.test;
    if need > ids.len() {
        return Err(Error::Insufficient(format!(
            "requested {need} entities for splits but only {} are admissible",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut it = ids.into_iter().cloned();
    let train_ids = it.by_ref().take(sizes.train).collect();
    let valid_ids = it.by_ref().take(sizes.valid).collect();
    let test_ids = it.take(sizes.test).collect();
    Ok(SplitSpec {
        seed,
        train_ids,
        valid_ids,
        test_ids,
    })
}

/// One training example: an entity and the language to describe it in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInstance {
    pub entity_id: String,
    pub target_language: LanguageCode,
}

/// Draw the target language uniformly among those with a description.
pub fn sample_training_instance<R: Rng + ?Sized>(
    entity: &Entity,
    rng: &mut R,
) -> Result<TrainingInstance> {
    let langs: Vec<&LanguageCode> = entity.descriptions.keys().collect();
    let target = langs.choose(rng).ok_or_else(|| {
        Error::Insufficient(format!("entity {} has no description", entity.id))
    })?;
    Ok(TrainingInstance {
        entity_id: entity.id.clone(),
        target_language: (*target).clone(),
    })
}
