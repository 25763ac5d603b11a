use shortdesc_eval::*;

fn question() -> EntryQuestion {
    EntryQuestion {
        language: "en".into(),
        prompt: "Which is a city?".into(),
        options: vec!["Paris".into(), "Blue".into(), "Seven".into()],
        answer: "Paris".into(),
    }
}

fn inputs(n: usize) -> Vec<CampaignInput> {
    (0..n)
        .map(|i| CampaignInput {
            entity_id: format!("Q{i}"),
            snippet: format!("Thing {i} is a thing."),
            model_description: format!("model {i}"),
            human_description: format!("human {i}"),
            moverscore: Some(i as f64),
        })
        .collect()
}

fn pool() -> Vec<PoolEntry> {
    (0..4)
        .map(|i| PoolEntry {
            entity_id: format!("P{i}"),
            snippet: format!("Pool {i}."),
            description: format!("pool {i}"),
        })
        .collect()
}

fn service(dir: &tempfile::TempDir, n: usize) -> EvalService {
    let mut s = EvalService::open(dir.path().join("events.jsonl"), question()).unwrap();
    s.create_campaign("c1", &inputs(n), "en", &pool(), 42).unwrap();
    s
}

/// The option a worker should pick to favour the model (or the true
/// description on honeypots).
fn pick(s: &EvalService, item_id: &str, prefer_model: bool) -> Choice {
    match s.state().item(item_id).unwrap().truth {
        ItemTruth::Real { model_option, .. } => {
            if prefer_model {
                model_option
            } else {
                model_option.other()
            }
        }
        ItemTruth::Honeypot { decoy_option, .. } => decoy_option.other(),
    }
}

fn vote(s: &mut EvalService, batch: &BatchView, item: &ItemView, worker: &str, choice: Choice) -> Result<VoteAck> {
    s.record_vote(VoteRequest {
        batch_id: batch.batch_id.clone().unwrap(),
        item_id: item.item_id.clone(),
        worker_id: worker.into(),
        choice,
    })
}

#[test]
fn gating_is_recorded_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    assert!(matches!(s.assign_batch("w1"), Err(ServiceError::Unauthorized(_))));
    assert!(s.gate_worker("w1", "Paris").unwrap());
    assert!(!s.gate_worker("w2", "Blue").unwrap());
    let len = s.log_len();
    assert!(s.gate_worker("w1", "Blue").unwrap());
    assert!(!s.gate_worker("w2", "Paris").unwrap());
    assert_eq!(s.log_len(), len);
    assert!(matches!(s.assign_batch("w2"), Err(ServiceError::Unauthorized(_))));
}

#[test]
fn assignment_is_idempotent_until_the_batch_is_done() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 18);
    s.gate_worker("w1", "Paris").unwrap();
    let a = s.assign_batch("w1").unwrap();
    assert_eq!(a.items.len(), BATCH_SIZE);
    assert_eq!(s.assign_batch("w1").unwrap(), a);
    for it in &a.items {
        let c = pick(&s, &it.item_id, true);
        vote(&mut s, &a, it, "w1", c).unwrap();
    }
    let b = s.assign_batch("w1").unwrap();
    assert_ne!(b.batch_id, a.batch_id);
    for it in &b.items {
        let c = pick(&s, &it.item_id, true);
        vote(&mut s, &b, it, "w1", c).unwrap();
    }
    assert_eq!(s.assign_batch("w1").unwrap(), BatchView::empty());
}

#[test]
fn served_payload_has_no_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    s.gate_worker("w1", "Paris").unwrap();
    let view = serde_json::to_value(s.assign_batch("w1").unwrap()).unwrap();
    for item in view["items"].as_array().unwrap() {
        let mut keys: Vec<&str> = item.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["item_id", "option_1", "option_2", "snippet"]);
    }
    let raw = view.to_string();
    for marker in ["honeypot", "decoy", "truth", "system", "kind"] {
        assert!(!raw.contains(marker), "{marker} in {raw}");
    }
}

#[test]
fn vote_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    s.gate_worker("w1", "Paris").unwrap();
    s.gate_worker("w2", "Paris").unwrap();
    let b = s.assign_batch("w1").unwrap();
    let it = &b.items[0];
    let before = s.log_len();
    vote(&mut s, &b, it, "w1", Choice::Option1).unwrap();
    assert_eq!(s.log_len(), before + 1);
    assert!(matches!(vote(&mut s, &b, it, "w1", Choice::Option2), Err(ServiceError::Conflict(_))));
    assert_eq!(s.log_len(), before + 1);
    assert!(matches!(vote(&mut s, &b, it, "w2", Choice::Option1), Err(ServiceError::Unauthorized(_))));
    let wrong_batch = VoteRequest {
        batch_id: "nope".into(),
        item_id: it.item_id.clone(),
        worker_id: "w1".into(),
        choice: Choice::Option1,
    };
    assert!(matches!(s.record_vote(wrong_batch), Err(ServiceError::Validation(_))));
}

#[test]
fn honeypot_failures_count_and_exclude() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    s.gate_worker("w1", "Paris").unwrap();
    let b = s.assign_batch("w1").unwrap();
    for it in &b.items {
        let c = match s.state().item(&it.item_id).unwrap().truth {
            ItemTruth::Honeypot { decoy_option, .. } => decoy_option,
            _ => Choice::Option1,
        };
        // votes after the exclusion are refused
        let _ = vote(&mut s, &b, it, "w1", c);
    }
    let w = &s.state().workers["w1"];
    assert_eq!((w.honeypots_seen, w.honeypots_failed, w.excluded), (1, 1, true));
    assert!(matches!(s.assign_batch("w1"), Err(ServiceError::Unauthorized(_))));
}

#[test]
fn majority_exclusion_requeue_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    for w in ["a", "b", "bad", "c"] {
        s.gate_worker(w, "Paris").unwrap();
    }
    // a and b favour the model; bad fails the honeypot; c favours humans
    for (w, prefer_model, fail) in [("a", true, false), ("b", true, false), ("bad", true, true)] {
        let batch = s.assign_batch(w).unwrap();
        for it in &batch.items {
            let mut c = pick(&s, &it.item_id, prefer_model);
            if fail && s.state().item(&it.item_id).unwrap().is_honeypot() {
                c = c.other();
            }
            let _ = vote(&mut s, &batch, it, w, c);
        }
    }
    assert!(s.state().is_excluded("bad"));
    let partial = s.aggregate("c1").unwrap();
    assert!(partial.summary.partial);
    assert_eq!(partial.summary.complete_items, 0);

    let batch = s.assign_batch("c").unwrap();
    assert!(batch.batch_id.is_some(), "excluded slot is re-queued");
    for it in &batch.items {
        let c = pick(&s, &it.item_id, false);
        vote(&mut s, &batch, it, "c", c).unwrap();
    }
    let r = s.aggregate("c1").unwrap();
    assert!(!r.summary.partial);
    assert_eq!(r.items.len(), 9);
    for item in &r.items {
        assert_eq!((item.model_votes, item.human_votes, item.winner), (2, 1, Some(Winner::Model)));
    }
    assert_eq!(r.summary.model_win_fraction, Some(1.0));
    assert_eq!(r.summary.excluded_workers, vec!["bad".to_string()]);

    let reopened = EvalService::open(dir.path().join("events.jsonl"), question()).unwrap();
    assert_eq!(reopened.state(), s.state());
    assert_eq!(reopened.aggregate("c1").unwrap(), r);
}

#[test]
fn duplicate_campaign_and_unknown_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = service(&dir, 9);
    assert!(matches!(
        s.create_campaign("c1", &inputs(9), "en", &pool(), 1),
        Err(ServiceError::Conflict(_))
    ));
    assert!(matches!(s.aggregate("zz"), Err(ServiceError::NotFound(_))));
}
