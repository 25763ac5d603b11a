use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_results, CampaignResults};
use crate::campaign::{create_campaign, BatchView, Campaign, CampaignInput, Choice, PoolEntry};
use crate::error::{Result, ServiceError};
use crate::log::EventLog;
use crate::state::{Event, ServiceState, Vote, RATERS_PER_ITEM};

/// Multiple-choice entry question that workers must pass before rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryQuestion {
    pub language: String,
    pub prompt: String,
    pub options: Vec<String>,
    pub answer: String,
}

/// The question without its answer, as served to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub language: String,
    pub prompt: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRequest {
    pub batch_id: String,
    pub item_id: String,
    pub worker_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteAck {
    pub ack: bool,
    pub seq: u64,
}

/// Single-writer service: every mutation is logged, then applied.
#[derive(Debug)]
pub struct EvalService {
    state: ServiceState,
    log: EventLog,
    question: EntryQuestion,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl EvalService {
    /// Open the event log at `path`, replaying any existing events.
    pub fn open(path: impl AsRef<Path>, question: EntryQuestion) -> Result<Self> {
        if !question.options.contains(&question.answer) {
            return Err(ServiceError::Validation("entry answer is not among the options".into()));
        }
        let (log, events) = EventLog::open(path)?;
        let state = ServiceState::replay(&events);
        log::info!("replayed {} events from {}", events.len(), log.path().display());
        Ok(EvalService { state, log, question })
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn log_len(&self) -> u64 {
        self.log.len()
    }

    pub fn question(&self) -> QuestionView {
        QuestionView {
            language: self.question.language.clone(),
            prompt: self.question.prompt.clone(),
            options: self.question.options.clone(),
        }
    }

    fn commit(&mut self, event: Event) -> Result<u64> {
        let seq = self.log.append(&event)?;
        self.state.apply(&event);
        Ok(seq)
    }

    pub fn create_campaign(
        &mut self,
        campaign_id: &str,
        inputs: &[CampaignInput],
        language: &str,
        pool: &[PoolEntry],
        seed: u64,
    ) -> Result<&Campaign> {
        if self.state.campaigns.contains_key(campaign_id) {
            return Err(ServiceError::Conflict(format!("campaign {campaign_id} exists")));
        }
        let campaign = create_campaign(campaign_id, inputs, language, pool, seed)?;
        self.commit(Event::CampaignCreated { campaign })?;
        Ok(&self.state.campaigns[campaign_id])
    }

    /// The first attempt is final; later attempts return the recorded outcome.
    pub fn gate_worker(&mut self, worker_id: &str, answer: &str) -> Result<bool> {
        if worker_id.trim().is_empty() {
            return Err(ServiceError::Validation("worker_id is empty".into()));
        }
        if let Some(w) = self.state.workers.get(worker_id) {
            return Ok(w.entry_question_passed);
        }
        let passed = answer.trim() == self.question.answer;
        self.commit(Event::Gated {
            worker_id: worker_id.to_string(),
            passed,
        })?;
        Ok(passed)
    }

    fn check_worker(&self, worker_id: &str) -> Result<()> {
        match self.state.workers.get(worker_id) {
            None => Err(ServiceError::Unauthorized(format!("worker {worker_id} has not taken the entry question"))),
            Some(w) if !w.entry_question_passed => {
                Err(ServiceError::Unauthorized(format!("worker {worker_id} did not pass the entry question")))
            }
            Some(w) if w.excluded => Err(ServiceError::Unauthorized(format!("worker {worker_id} is excluded"))),
            Some(_) => Ok(()),
        }
    }

    /// The worker's unfinished batch if any, otherwise a new batch that has
    /// fewer than three active raters and that the worker never held.
    pub fn assign_batch(&mut self, worker_id: &str) -> Result<BatchView> {
        self.check_worker(worker_id)?;
        if let Some(b) = self.state.open_batch(worker_id) {
            return Ok(b.view());
        }
        let pick = self
            .state
            .batch_index
            .keys()
            .filter(|b| !self.state.assignees(b).iter().any(|w| w == worker_id))
            .map(|b| (self.state.active_assignees(b).len(), b))
            .filter(|(n, _)| *n < RATERS_PER_ITEM)
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
            .map(|(_, b)| b.clone());
        let Some(batch_id) = pick else {
            return Ok(BatchView::empty());
        };
        self.commit(Event::Assigned {
            batch_id: batch_id.clone(),
            worker_id: worker_id.to_string(),
        })?;
        Ok(self.state.batch(&batch_id).expect("indexed batch").view())
    }

    pub fn record_vote(&mut self, req: VoteRequest) -> Result<VoteAck> {
        let (batch_of_item, _) = self
            .state
            .item_index
            .get(&req.item_id)
            .ok_or_else(|| ServiceError::NotFound(format!("item {}", req.item_id)))?;
        if batch_of_item != &req.batch_id {
            return Err(ServiceError::Validation(format!(
                "item {} is not in batch {}",
                req.item_id, req.batch_id
            )));
        }
        if !self.state.assignees(&req.batch_id).iter().any(|w| w == &req.worker_id) {
            return Err(ServiceError::Unauthorized(format!(
                "worker {} is not assigned to batch {}",
                req.worker_id, req.batch_id
            )));
        }
        self.check_worker(&req.worker_id)?;
        if self.state.has_voted(&req.item_id, &req.worker_id) {
            return Err(ServiceError::Conflict(format!(
                "worker {} already voted on {}",
                req.worker_id, req.item_id
            )));
        }
        let seq = self.commit(Event::Voted {
            vote: Vote {
                batch_id: req.batch_id,
                item_id: req.item_id,
                worker_id: req.worker_id,
                choice: req.choice,
                timestamp: now_ms(),
            },
        })?;
        Ok(VoteAck { ack: true, seq })
    }

    pub fn aggregate(&self, campaign_id: &str) -> Result<CampaignResults> {
        aggregate_results(&self.state, campaign_id)
    }
}
