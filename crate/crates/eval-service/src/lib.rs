//! Human forced-choice rating backend.
//!
//! Workers pass an entry question, receive batches of ten pairwise items
//! (one of them a hidden honeypot) and vote. Every mutation is appended to
//! a JSONL event log before it is acknowledged; restarting replays the log.
//! Workers failing more than 20% of their honeypots are excluded, their
//! votes stop counting and their batches go back into the queue.

pub mod aggregate;
pub mod campaign;
pub mod error;
pub mod http;
pub mod log;
pub mod service;
pub mod state;

pub use aggregate::{aggregate_results, CampaignResults, CampaignSummary, ItemResult, Winner};
pub use campaign::{
    create_campaign, BatchView, Campaign, CampaignInput, Choice, ItemTruth, ItemView, PoolEntry, RatingBatch,
    RatingItem, BATCH_SIZE,
};
pub use error::{Result, ServiceError};
pub use http::{router, serve, ErrorBody, GateRequest, GateResponse, Shared};
pub use service::{EntryQuestion, EvalService, QuestionView, VoteAck, VoteRequest};
pub use state::{Event, ServiceState, Vote, WorkerRecord};
