use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub surviving: Vec<String>,
    pub eliminated: Vec<String>,
    pub eliminated_fraction: f64,
}

/// Drop ids whose generated text equals the gold text up to case and whitespace.
///
/// Ids missing from `gold` survive.
pub fn dedup_exact_matches(
    generated: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
) -> DedupOutcome {
    let (eliminated, surviving): (Vec<String>, Vec<String>) =
        generated.keys().cloned().partition(|id| {
            gold.get(id)
                .is_some_and(|g| text::fold(g) == text::fold(&generated[id]))
        });
    let total = generated.len();
    DedupOutcome {
        eliminated_fraction: if total == 0 {
            0.0
        } else {
            eliminated.len() as f64 / total as f64
        },
        surviving,
        eliminated,
    }
}
