//! A complete campaign driven in-process: workers pass the entry question,
//! take batches and vote; one of them fails the hidden honeypots and is
//! excluded. The event log is then replayed into the same results.
//!
//! `cargo run --example rating_campaign`

use shortdesc_eval::{CampaignInput, Choice, EntryQuestion, EvalService, ItemTruth, PoolEntry, VoteRequest};

fn question() -> EntryQuestion {
    EntryQuestion {
        language: "en".into(),
        prompt: "Which of these is a river?".into(),
        options: vec!["Danube".into(), "Everest".into(), "Sahara".into()],
        answer: "Danube".into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let log = dir.path().join("events.jsonl");
    let mut svc = EvalService::open(&log, question())?;

    let inputs: Vec<CampaignInput> = (0..27)
        .map(|i| CampaignInput {
            entity_id: format!("Q{i}"),
            snippet: format!("Entity {i} is a settlement on the coast."),
            model_description: format!("coastal town {i}"),
            human_description: format!("settlement {i}"),
            moverscore: None,
        })
        .collect();
    let pool: Vec<PoolEntry> = (0..3)
        .map(|i| PoolEntry {
            entity_id: format!("P{i}"),
            snippet: format!("Pool entity {i}."),
            description: format!("species of beetle {i}"),
        })
        .collect();
    svc.create_campaign("demo", &inputs, "en", &pool, 1)?;

    for (worker, careless) in [("dot", true), ("ana", false), ("ben", false), ("cy", false)] {
        if !svc.gate_worker(worker, "Danube")? {
            continue;
        }
        let mut refused = 0;
        loop {
            let Ok(batch) = svc.assign_batch(worker) else { break };
            let Some(batch_id) = batch.batch_id else { break };
            for item in batch.items {
                let truth = svc.state().item(&item.item_id).map(|i| i.truth.clone());
                let choice = match truth {
                    Some(ItemTruth::Honeypot { decoy_option, .. }) if careless => decoy_option,
                    Some(ItemTruth::Honeypot { decoy_option, .. }) => decoy_option.other(),
                    _ => Choice::Option1,
                };
                let req = VoteRequest { batch_id: batch_id.clone(), item_id: item.item_id, worker_id: worker.into(), choice };
                if svc.record_vote(req).is_err() {
                    refused += 1;
                }
            }
        }
        println!("{worker}: done, {refused} votes refused");
    }

    let results = svc.aggregate("demo")?;
    println!(
        "{} items, {} complete, model wins {}, excluded {:?}",
        results.summary.items, results.summary.complete_items, results.summary.model_wins, results.summary.excluded_workers
    );
    let replayed = EvalService::open(&log, question())?.aggregate("demo")?;
    println!("replay matches: {}", replayed == results);
    Ok(())
}
