use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde_json::Value;
use shortdesc::generator::SystemKind;
use shortdesc_cli::{run_command, Command, Context, ExperimentConfig};

use crate::Outcome;

const STAGES: [Command; 10] = [
    Command::Synth,
    Command::Stats,
    Command::Split,
    Command::Train,
    Command::Generate,
    Command::Score,
    Command::Aggregate,
    Command::Propensity,
    Command::SampleEval,
    Command::Report,
];

fn config(systems: Vec<SystemKind>, type_critical: bool) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig { seed: 11, ..Default::default() };
    cfg.synthetic.n_entities = 500;
    cfg.synthetic.type_critical = type_critical;
    cfg.synthetic.single_description = type_critical;
    cfg.experiment.systems = systems;
    cfg.experiment.train.epochs = 25;
    cfg.experiment.train.batch_size = 16;
    cfg.experiment.train.optimizer.lr = 2e-3;
    // the full system leaves almost nothing after exact matches are removed
    cfg.sample_eval.system = "prefix".into();
    cfg.sample_eval.bins = 2;
    cfg.sample_eval.coding_sample = 8;
    cfg.resolve(None, &[]).map_err(|e| e.to_string())
}

/// Runs every stage; returns the seconds spent training the full system,
/// which is trained on its own before the others.
fn pipeline(cfg: ExperimentConfig, out: &Path, stages: &[Command]) -> Result<f64, String> {
    let mut full_secs = 0.0;
    for &stage in stages {
        let mut runs = vec![cfg.clone()];
        if matches!(stage, Command::Train) {
            let (mut full, mut rest) = (cfg.clone(), cfg.clone());
            full.experiment.systems = vec![SystemKind::Full];
            rest.experiment.systems.retain(|k| *k != SystemKind::Full);
            runs = vec![full, rest];
        }
        for (i, run) in runs.into_iter().enumerate() {
            if run.experiment.systems.is_empty() {
                continue;
            }
            let mut ctx = Context::new(run, out.to_path_buf());
            let start = Instant::now();
            run_command(&mut ctx, stage).map_err(|e| format!("{}: {e}", stage.name()))?;
            if matches!(stage, Command::Train) && i == 0 {
                full_secs = start.elapsed().as_secs_f64();
            }
        }
    }
    Ok(full_secs)
}

fn read_json(path: &Path) -> Result<Value, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&raw).map_err(|e| e.to_string())
}

fn bt_scores(bt: &Value) -> BTreeMap<String, f64> {
    let names = bt["bt"]["systems"].as_array().cloned().unwrap_or_default();
    let scores = bt["bt"]["scores"].as_array().cloned().unwrap_or_default();
    names
        .iter()
        .zip(&scores)
        .filter_map(|(n, s)| Some((n.as_str()?.to_string(), s.as_f64()?)))
        .collect()
}

pub fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let main = dir.path().join("all");
    let train_secs = pipeline(config(SystemKind::ALL.to_vec(), false)?, &main, &STAGES)?;
    check!(train_secs <= 900.0, "training the full system took {train_secs:.0}s");

    let exact = read_json(&main.join("exact_match.json"))?;
    let full_exact = exact["full"].as_f64().ok_or("no exact match for full")?;
    check!(full_exact >= 0.95, "full exact match {full_exact:.3}");

    let mut rows = csv::Reader::from_path(main.join("sign_tests.csv")).map_err(|e| e.to_string())?;
    let headers = rows.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("sign_tests.csv lacks {name}"));
    let (a, b, wa, wb, p) = (col("system_a")?, col("system_b")?, col("wins_a")?, col("wins_b")?, col("sign_test_p")?);
    let mut versus_prefix = None;
    for r in rows.records() {
        let r = r.map_err(|e| e.to_string())?;
        if &r[a] == "full" && &r[b] == "prefix" {
            let num = |i: usize| r[i].parse::<f64>().map_err(|e| e.to_string());
            versus_prefix = Some((num(wa)?, num(wb)?, num(p)?));
        }
    }
    let (wins, losses, p_prefix) = versus_prefix.ok_or("no full vs prefix row")?;
    check!(wins > losses && p_prefix < 0.05, "full vs prefix {wins}-{losses}, p {p_prefix:.2e}");

    let report = std::fs::read_to_string(main.join("report.md")).map_err(|e| e.to_string())?;
    let results = std::fs::read_to_string(main.join("results.csv")).map_err(|e| e.to_string())?;
    for kind in SystemKind::ALL {
        check!(results.contains(kind.name()), "results.csv lacks {kind}");
        check!(report.contains(kind.name()), "report.md lacks {kind}");
    }

    let critical = dir.path().join("types");
    let stages = &STAGES[..7];
    pipeline(config(vec![SystemKind::Full, SystemKind::NoTypes], true)?, &critical, stages)?;
    let bt = bt_scores(&read_json(&critical.join("bt.json"))?);
    let (full, no_types) = (bt.get("full").copied(), bt.get("no-types").copied());
    check!(
        matches!((full, no_types), (Some(f), Some(n)) if f > n),
        "type-critical strengths {bt:?}"
    );
    Ok(format!(
        "full trained in {train_secs:.0}s; full exact match {full_exact:.3}; full vs prefix {wins}-{losses} p {p_prefix:.1e}; \
         type-critical BT full {:.3} > no-types {:.3}",
        full.unwrap_or(f64::NAN),
        no_types.unwrap_or(f64::NAN)
    ))
}
