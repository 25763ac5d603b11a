use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use shortdesc_eval::{
    serve, CampaignInput, CampaignResults, Choice, EntryQuestion, EvalService, ItemTruth, PoolEntry, Shared, Winner,
};

use crate::Outcome;

const ITEMS: usize = 90;

fn question() -> EntryQuestion {
    EntryQuestion {
        language: "en".into(),
        prompt: "Which of these is a river?".into(),
        options: vec!["Danube".into(), "Everest".into(), "Sahara".into()],
        answer: "Danube".into(),
    }
}

/// Hand-assigned ground truth: the model description is better unless the index is a multiple of 3.
fn model_better(entity: &str) -> bool {
    entity[1..].parse::<usize>().expect("numeric id") % 3 != 0
}

#[derive(Clone, Copy)]
enum Script {
    /// Picks the better side of every real item and passes honeypots.
    Careful,
    /// Picks the worse side of every real item and passes honeypots.
    Contrarian,
    /// Picks the worse side and fails honeypots from the 8th on.
    Bad,
}

struct Client {
    http: reqwest::Client,
    base: String,
    service: Shared,
}

impl Client {
    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.expect("request");
        (r.status().as_u16(), r.json().await.expect("json body"))
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.expect("request");
        (r.status().as_u16(), r.json().await.expect("json body"))
    }

    /// Option the scripted worker picks; the truth is read from the server
    /// state because the payload deliberately hides it.
    fn pick(&self, item_id: &str, script: Script, honeypots_seen: &mut usize) -> Choice {
        let s = self.service.lock().expect("lock");
        let item = s.state().item(item_id).expect("served item");
        match item.truth {
            ItemTruth::Real { model_option, .. } => {
                let good = if model_better(&item.entity_id) { model_option } else { model_option.other() };
                match script {
                    Script::Careful => good,
                    Script::Contrarian | Script::Bad => good.other(),
                }
            }
            ItemTruth::Honeypot { decoy_option, .. } => {
                *honeypots_seen += 1;
                match script {
                    Script::Bad if *honeypots_seen >= 8 => decoy_option,
                    _ => decoy_option.other(),
                }
            }
        }
    }

    /// Take and complete one batch. `None` when nothing is left or the worker is refused.
    /// Otherwise returns (votes accepted, votes refused).
    async fn work_one(&self, worker: &str, script: Script, honeypots: &mut usize) -> Result<Option<(usize, usize)>, String> {
        let (status, batch) = self.get(&format!("/batch?worker_id={worker}")).await;
        if status == 403 {
            return Ok(None);
        }
        check!(status == 200, "{worker}: batch request returned {status}");
        let Some(batch_id) = batch["batch_id"].as_str().map(str::to_string) else { return Ok(None) };
        let (mut accepted, mut refused) = (0, 0);
        for item in batch["items"].as_array().ok_or("items missing")? {
            let mut keys: Vec<&str> = item.as_object().ok_or("item not an object")?.keys().map(|k| k.as_str()).collect();
            keys.sort();
            check!(keys == ["item_id", "option_1", "option_2", "snippet"], "served keys {keys:?}");
            let item_id = item["item_id"].as_str().ok_or("item id")?;
            let choice = self.pick(item_id, script, honeypots);
            let body = json!({"batch_id": batch_id, "item_id": item_id, "worker_id": worker, "choice": choice});
            match self.post("/vote", body).await {
                (200, _) => accepted += 1,
                (403, _) => refused += 1,
                (s, v) => return Err(format!("{worker}: vote returned {s} {v}")),
            }
        }
        Ok(Some((accepted, refused)))
    }
}

pub fn service_protocol() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(scenario())
}

async fn scenario() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("events.jsonl");
    let mut svc = EvalService::open(&log, question()).map_err(|e| e.to_string())?;
    let inputs: Vec<CampaignInput> = (0..ITEMS)
        .map(|i| CampaignInput {
            entity_id: format!("Q{i}"),
            snippet: format!("Entity {i} is described here."),
            model_description: format!("generated description {i}"),
            human_description: format!("written description {i}"),
            moverscore: Some(i as f64 / ITEMS as f64),
        })
        .collect();
    let pool: Vec<PoolEntry> = (0..5)
        .map(|i| PoolEntry {
            entity_id: format!("P{i}"),
            snippet: format!("Pool entity {i}."),
            description: format!("pool description {i}"),
        })
        .collect();
    svc.create_campaign("acceptance", &inputs, "en", &pool, 17).map_err(|e| e.to_string())?;
    check!(svc.state().campaigns["acceptance"].batches.len() == 10, "expected 10 batches");

    let service: Shared = Arc::new(Mutex::new(svc));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, service.clone(), async {
        let _ = stopped.await;
    }));
    let client = Client { http: reqwest::Client::new(), base, service: service.clone() };

    let workers = [
        ("bad", Script::Bad),
        ("w1", Script::Careful),
        ("w2", Script::Careful),
        ("w3", Script::Careful),
        ("w4", Script::Contrarian),
    ];
    for (w, _) in workers {
        let (status, body) = client.post("/gate", json!({"worker_id": w, "answer": "Danube"})).await;
        check!(status == 200 && body["admitted"] == true, "{w} not admitted: {status} {body}");
    }
    let (_, refused_gate) = client.post("/gate", json!({"worker_id": "guess", "answer": "Sahara"})).await;
    check!(refused_gate["admitted"] == false, "wrong entry answer admitted");

    let (mut bad_batches, mut bad_accepted, mut bad_refused, mut seen) = (0, 0, 0, 0);
    while let Some((a, r)) = client.work_one("bad", Script::Bad, &mut seen).await? {
        bad_batches += 1;
        bad_accepted += a;
        bad_refused += r;
    }
    let bad_record = service.lock().expect("lock").state().workers["bad"].clone();
    check!(bad_record.excluded, "bad worker not excluded: {bad_record:?}");
    check!(
        (bad_record.honeypots_seen, bad_record.honeypots_failed) == (9, 2),
        "bad worker counters {:?}",
        (bad_record.honeypots_seen, bad_record.honeypots_failed)
    );
    let interim: CampaignResults = client.get("/results?campaign_id=acceptance").await.1.try_into_results()?;
    check!(interim.summary.complete_items == 0, "items complete before the good workers voted");

    // good workers take one batch at a time in turn
    let mut taken: BTreeMap<&str, usize> = BTreeMap::new();
    let mut honeypots: BTreeMap<&str, usize> = BTreeMap::new();
    loop {
        let mut progressed = false;
        for (w, script) in &workers[1..] {
            if client.work_one(w, *script, honeypots.entry(*w).or_default()).await?.is_some() {
                *taken.entry(*w).or_default() += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    check!(taken.get("w4").copied().unwrap_or(0) > 0, "the contrarian worker never voted: {taken:?}");
    let (status, results) = client.get("/results?campaign_id=acceptance").await;
    check!(status == 200, "results returned {status}");
    let results = results.try_into_results()?;

    // any three of the four good workers hold a 2-1 majority for the better side
    let expected_model_wins = (0..ITEMS).filter(|i| i % 3 != 0).count();
    check!(!results.summary.partial && results.summary.complete_items == ITEMS, "summary {:?}", results.summary);
    check!(results.items.len() == ITEMS, "{} real items aggregated", results.items.len());
    for item in &results.items {
        let want = if model_better(&item.entity_id) { Winner::Model } else { Winner::Human };
        check!(item.winner == Some(want), "{}: winner {:?}, expected {want:?}", item.entity_id, item.winner);
        check!(item.model_votes + item.human_votes == 3, "{}: {} counted votes", item.entity_id, item.model_votes + item.human_votes);
    }
    check!(results.summary.model_wins == expected_model_wins, "model wins {}", results.summary.model_wins);
    check!(results.summary.excluded_workers == ["bad"], "excluded {:?}", results.summary.excluded_workers);
    {
        let s = service.lock().expect("lock");
        let state = s.state();
        for batch in &state.campaigns["acceptance"].batches {
            for item in &batch.items {
                check!(
                    state.counted_votes(&item.item_id).iter().all(|v| v.worker_id != "bad"),
                    "a vote of the excluded worker is counted on {}",
                    item.item_id
                );
            }
        }
    }

    let live = service.lock().expect("lock").state().clone();
    let _ = stop.send(());
    server.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let replayed = EvalService::open(&log, question()).map_err(|e| e.to_string())?;
    check!(replayed.state() == &live, "replayed state differs from the live state");
    check!(
        replayed.aggregate("acceptance").map_err(|e| e.to_string())? == results,
        "replayed aggregate differs"
    );
    Ok(format!(
        "bad worker scripted to fail honeypots 8-10, excluded at 2/9 after {bad_accepted} accepted and {bad_refused} refused votes; \
         its {bad_batches} batches re-queued; good workers took {taken:?}; {expected_model_wins}/{ITEMS} model wins as hand-computed; replay identical"
    ))
}

trait IntoResults {
    fn try_into_results(self) -> Result<CampaignResults, String>;
}

impl IntoResults for Value {
    fn try_into_results(self) -> Result<CampaignResults, String> {
        serde_json::from_value(self).map_err(|e| e.to_string())
    }
}
