//! Event-sourced service state. [`ServiceState::apply`] is the only mutator,
//! so replaying the log reproduces the live state exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::campaign::{Campaign, Choice, ItemTruth, RatingBatch, RatingItem};

/// Share of failed honeypots above which a worker is excluded.
pub const EXCLUSION_THRESHOLD: f64 = 0.20;
pub const RATERS_PER_ITEM: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub batch_id: String,
    pub item_id: String,
    pub worker_id: String,
    pub choice: Choice,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    CampaignCreated { campaign: Campaign },
    Gated { worker_id: String, passed: bool },
    Assigned { batch_id: String, worker_id: String },
    Voted { vote: Vote },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: String,
    pub entry_question_passed: bool,
    pub honeypots_seen: u32,
    pub honeypots_failed: u32,
    pub excluded: bool,
}

impl WorkerRecord {
    fn over_threshold(&self) -> bool {
        self.honeypots_seen >= 1 && self.honeypots_failed as f64 / self.honeypots_seen as f64 > EXCLUSION_THRESHOLD
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceState {
    pub campaigns: BTreeMap<String, Campaign>,
    /// batch id → (campaign id, batch index).
    pub batch_index: BTreeMap<String, (String, usize)>,
    /// item id → (batch id, item index).
    pub item_index: BTreeMap<String, (String, usize)>,
    pub workers: BTreeMap<String, WorkerRecord>,
    /// Every worker ever assigned, in assignment order.
    pub assignments: BTreeMap<String, Vec<String>>,
    pub votes: BTreeMap<(String, String), Vote>,
    pub events: usize,
}

impl ServiceState {
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut s = ServiceState::default();
        for e in events {
            s.apply(e);
        }
        s
    }

    pub fn apply(&mut self, event: &Event) {
        self.events += 1;
        match event {
            Event::CampaignCreated { campaign } => {
                for (bi, b) in campaign.batches.iter().enumerate() {
                    self.batch_index
                        .insert(b.batch_id.clone(), (campaign.campaign_id.clone(), bi));
                    for (ii, it) in b.items.iter().enumerate() {
                        self.item_index.insert(it.item_id.clone(), (b.batch_id.clone(), ii));
                    }
                }
                self.campaigns.insert(campaign.campaign_id.clone(), campaign.clone());
            }
            Event::Gated { worker_id, passed } => {
                let w = self.workers.entry(worker_id.clone()).or_insert_with(|| WorkerRecord {
                    worker_id: worker_id.clone(),
                    ..Default::default()
                });
                w.entry_question_passed = *passed;
            }
            Event::Assigned { batch_id, worker_id } => {
                self.assignments
                    .entry(batch_id.clone())
                    .or_default()
                    .push(worker_id.clone());
            }
            Event::Voted { vote } => {
                let honeypot = self.item(&vote.item_id).and_then(|it| match &it.truth {
                    ItemTruth::Honeypot { decoy_option, .. } => Some(*decoy_option),
                    ItemTruth::Real { .. } => None,
                });
                if let (Some(decoy), Some(w)) = (honeypot, self.workers.get_mut(&vote.worker_id)) {
                    w.honeypots_seen += 1;
                    w.honeypots_failed += (vote.choice == decoy) as u32;
                    if w.over_threshold() {
                        w.excluded = true;
                    }
                }
                self.votes
                    .insert((vote.item_id.clone(), vote.worker_id.clone()), vote.clone());
            }
        }
    }

    pub fn batch(&self, batch_id: &str) -> Option<&RatingBatch> {
        let (c, i) = self.batch_index.get(batch_id)?;
        self.campaigns.get(c).map(|c| &c.batches[*i])
    }

    pub fn item(&self, item_id: &str) -> Option<&RatingItem> {
        let (b, i) = self.item_index.get(item_id)?;
        self.batch(b).map(|b| &b.items[*i])
    }

    pub fn is_excluded(&self, worker_id: &str) -> bool {
        self.workers.get(worker_id).is_some_and(|w| w.excluded)
    }

    pub fn assignees(&self, batch_id: &str) -> &[String] {
        self.assignments.get(batch_id).map_or(&[], |v| v.as_slice())
    }

    /// Assignees whose votes still count.
    pub fn active_assignees(&self, batch_id: &str) -> Vec<&String> {
        self.assignees(batch_id).iter().filter(|w| !self.is_excluded(w)).collect()
    }

    pub fn has_voted(&self, item_id: &str, worker_id: &str) -> bool {
        self.votes.contains_key(&(item_id.to_string(), worker_id.to_string()))
    }

    /// Batches the worker holds but has not finished.
    pub fn open_batch(&self, worker_id: &str) -> Option<&RatingBatch> {
        self.assignments
            .iter()
            .filter(|(_, ws)| ws.iter().any(|w| w == worker_id))
            .filter_map(|(b, _)| self.batch(b))
            .find(|b| b.items.iter().any(|it| !self.has_voted(&it.item_id, worker_id)))
    }

    /// Counted votes for an item: non-excluded workers, at most three, in
    /// assignment order.
    pub fn counted_votes(&self, item_id: &str) -> Vec<&Vote> {
        let Some((batch_id, _)) = self.item_index.get(item_id) else {
            return Vec::new();
        };
        self.active_assignees(batch_id)
            .into_iter()
            .filter_map(|w| self.votes.get(&(item_id.to_string(), w.clone())))
            .take(RATERS_PER_ITEM)
            .collect()
    }

    pub fn workers_on(&self, batch_id: &str) -> BTreeSet<&String> {
        self.assignees(batch_id).iter().collect()
    }
}
