//! Batch assembly: 9 real pairs plus one honeypot per batch.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const BATCH_SIZE: usize = 10;
pub const REAL_PER_BATCH: usize = BATCH_SIZE - 1;

/// One presentation slot in a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    #[serde(rename = "option_1")]
    Option1,
    #[serde(rename = "option_2")]
    Option2,
}

impl Choice {
    pub fn other(self) -> Choice {
        match self {
            Choice::Option1 => Choice::Option2,
            Choice::Option2 => Choice::Option1,
        }
    }
}

/// A test instance to be rated: model output against the human reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignInput {
    pub entity_id: String,
    pub snippet: String,
    pub model_description: String,
    pub human_description: String,
    /// Automatic similarity of the pair, used for per-decile summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moverscore: Option<f64>,
}

/// Ground-truth descriptions that honeypots are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub entity_id: String,
    pub snippet: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemTruth {
    Real {
        model_option: Choice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        moverscore: Option<f64>,
    },
    /// The decoy is another entity's description; picking it fails the honeypot.
    Honeypot { decoy_option: Choice, decoy_entity: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingItem {
    pub item_id: String,
    pub entity_id: String,
    pub snippet: String,
    pub option_1: String,
    pub option_2: String,
    pub truth: ItemTruth,
}

impl RatingItem {
    pub fn is_honeypot(&self) -> bool {
        matches!(self.truth, ItemTruth::Honeypot { .. })
    }

    pub fn view(&self) -> ItemView {
        ItemView {
            item_id: self.item_id.clone(),
            snippet: self.snippet.clone(),
            option_1: self.option_1.clone(),
            option_2: self.option_2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingBatch {
    pub batch_id: String,
    pub campaign_id: String,
    pub items: Vec<RatingItem>,
}

impl RatingBatch {
    pub fn honeypot_position(&self) -> Option<usize> {
        self.items.iter().position(|i| i.is_honeypot())
    }

    pub fn view(&self) -> BatchView {
        BatchView {
            batch_id: Some(self.batch_id.clone()),
            items: self.items.iter().map(RatingItem::view).collect(),
        }
    }
}

/// What a rater sees: no truth, no honeypot flag, no system names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemView {
    pub item_id: String,
    pub snippet: String,
    pub option_1: String,
    pub option_2: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchView {
    pub batch_id: Option<String>,
    pub items: Vec<ItemView>,
}

impl BatchView {
    pub fn empty() -> Self {
        BatchView { batch_id: None, items: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub campaign_id: String,
    pub language: String,
    pub seed: u64,
    pub batches: Vec<RatingBatch>,
    /// Trailing inputs that did not fill a batch of nine.
    pub unbatched: Vec<String>,
}

fn order<R: Rng>(rng: &mut R) -> Choice {
    if rng.random_bool(0.5) {
        Choice::Option1
    } else {
        Choice::Option2
    }
}

fn place(first: Choice, a: String, b: String) -> (String, String) {
    match first {
        Choice::Option1 => (a, b),
        Choice::Option2 => (b, a),
    }
}

/// Split `inputs` into batches of nine in input order, add one honeypot per
/// batch at a uniform position and randomize every pair's order.
pub fn create_campaign(
    campaign_id: &str,
    inputs: &[CampaignInput],
    language: &str,
    pool: &[PoolEntry],
    seed: u64,
) -> Result<Campaign> {
    if inputs.len() < REAL_PER_BATCH {
        return Err(ServiceError::Validation(format!(
            "{} items given, a batch needs {REAL_PER_BATCH}",
            inputs.len()
        )));
    }
    let distinct_pool = |e: &PoolEntry| pool.iter().any(|o| o.entity_id != e.entity_id && o.description != e.description);
    if !pool.iter().any(distinct_pool) {
        return Err(ServiceError::Validation(
            "honeypot pool needs two entities with different descriptions".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_batches = inputs.len() / REAL_PER_BATCH;
    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let batch_id = format!("{campaign_id}-b{b:03}");
        let mut items: Vec<RatingItem> = inputs[b * REAL_PER_BATCH..(b + 1) * REAL_PER_BATCH]
            .iter()
            .map(|inp| {
                let model_option = order(&mut rng);
                let (option_1, option_2) =
                    place(model_option, inp.model_description.clone(), inp.human_description.clone());
                RatingItem {
                    item_id: String::new(),
                    entity_id: inp.entity_id.clone(),
                    snippet: inp.snippet.clone(),
                    option_1,
                    option_2,
                    truth: ItemTruth::Real {
                        model_option,
                        moverscore: inp.moverscore,
                    },
                }
            })
            .collect();

        let shown = loop {
            let e = &pool[rng.random_range(0..pool.len())];
            if distinct_pool(e) {
                break e;
            }
        };
        let decoys: Vec<&PoolEntry> = pool
            .iter()
            .filter(|o| o.entity_id != shown.entity_id && o.description != shown.description)
            .collect();
        let decoy = decoys[rng.random_range(0..decoys.len())];
        let decoy_option = order(&mut rng);
        let (option_1, option_2) = place(decoy_option, decoy.description.clone(), shown.description.clone());
        let position = rng.random_range(0..BATCH_SIZE);
        items.insert(
            position,
            RatingItem {
                item_id: String::new(),
                entity_id: shown.entity_id.clone(),
                snippet: shown.snippet.clone(),
                option_1,
                option_2,
                truth: ItemTruth::Honeypot {
                    decoy_option,
                    decoy_entity: decoy.entity_id.clone(),
                },
            },
        );
        // ids are positional and carry no hint of the honeypot
        let mut ids: Vec<usize> = (0..BATCH_SIZE).collect();
        ids.shuffle(&mut rng);
        for (item, k) in items.iter_mut().zip(ids) {
            item.item_id = format!("{batch_id}-{k:02}");
        }
        batches.push(RatingBatch {
            batch_id,
            campaign_id: campaign_id.to_string(),
            items,
        });
    }
    Ok(Campaign {
        campaign_id: campaign_id.to_string(),
        language: language.to_string(),
        seed,
        batches,
        unbatched: inputs[n_batches * REAL_PER_BATCH..].iter().map(|i| i.entity_id.clone()).collect(),
    })
}
