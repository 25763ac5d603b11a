use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shortdesc::analysis::{
    kmeanspp_sample, propensity_weight, stratified_sample_by_metric, stratify, train_propensity, weighted_mean,
    write_pairwise_csv, Binning, PropensityRecord, Stratum,
};
use shortdesc::autograd::Mat;
use shortdesc::baselines::{load_dictionaries, save_dictionaries, translation_description, PrefixBaseline, ToyTranslator};
use shortdesc::corpus::{
    build_splits, compute_language_stats, dedup_exact_matches, generate_synthetic_corpus, language_coverage_distribution,
    load_corpus, Corpus, DedupOutcome, LanguageCode, LanguageSet, SplitSpec, TokenDictionary,
};
use shortdesc::encoding::TypeEmbeddingTable;
use shortdesc::experiment::{
    exact_match_rate, generate_all, resource_ranking, score_records, train_system, PairwiseReport, ResultsTable,
    PREFIX, TRANSLATION,
};
use shortdesc::generator::{DescriptionModel, GenerationRecord};
use shortdesc::metric::{compute_idf, read_scores, write_scores, Embedder, ScoreRecord, SimilarityConfig, Weighting};
use shortdesc::text;
use shortdesc_eval::{CampaignInput, EvalService, PoolEntry};

use crate::config::ExperimentConfig;
use crate::manifest::{digests, Manifest};
use crate::CliError;

/// Per-invocation state: resolved config, output root and the files read
/// and written, which end up in the manifest.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut body = String::new();
    for r in rows {
        body.push_str(&serde_json::to_string(r).expect("serializable"));
        body.push('\n');
    }
    write(path, body)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Runtime(format!("{} line {}: {e}", path.display(), i + 1))))
        .collect()
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Self {
        Context {
            cfg,
            out,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Mark `path` as an input, failing with the command that produces it.
    fn require(&mut self, path: PathBuf, producer: &str) -> Result<PathBuf, CliError> {
        if !path.exists() {
            return Err(CliError::MissingInput {
                path,
                command: producer.to_string(),
            });
        }
        if !self.inputs.contains(&path) {
            self.inputs.push(path.clone());
        }
        Ok(path)
    }

    /// Record `path` as an output and create its parent directory.
    fn produced(&mut self, path: PathBuf) -> PathBuf {
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        self.outputs.push(path.clone());
        path
    }

    pub fn manifest(&self, command: &str) -> Result<Manifest, CliError> {
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            systems: self.system_names(),
            inputs: digests(&self.out, &self.inputs)?,
            outputs: digests(&self.out, &self.outputs)?,
        })
    }

    fn languages(&self) -> Result<LanguageSet, CliError> {
        Ok(LanguageSet::new(self.cfg.languages.clone())?)
    }

    fn system_names(&self) -> Vec<String> {
        self.cfg.experiment.systems.iter().map(|k| k.name().to_string()).collect()
    }

    fn corpus(&mut self) -> Result<Corpus, CliError> {
        let path = match self.cfg.corpus.clone() {
            Some(p) => self.require(p, "synth")?,
            None => self.require(self.path("corpus.jsonl"), "synth")?,
        };
        let loaded = load_corpus(&path, &self.languages()?)?;
        for d in &loaded.diagnostics {
            log::warn!("{}: line {}: {}", path.display(), d.line, d.message);
        }
        Ok(loaded.corpus)
    }

    fn split(&mut self) -> Result<SplitSpec, CliError> {
        let p = self.require(self.path("split.json"), "split")?;
        Ok(SplitSpec::load(p)?)
    }

    fn types(&mut self, corpus: &Corpus) -> Result<TypeEmbeddingTable, CliError> {
        if let Some(p) = self.cfg.types.clone() {
            let p = self.require(p, "synth")?;
            return Ok(TypeEmbeddingTable::load_tsv(p)?);
        }
        let local = self.path("types.tsv");
        if local.exists() {
            let p = self.require(local, "synth")?;
            return Ok(TypeEmbeddingTable::load_tsv(p)?);
        }
        let ids: BTreeSet<String> = corpus.iter().flat_map(|e| e.type_ids.iter().cloned()).collect();
        Ok(TypeEmbeddingTable::random(
            ids.into_iter().collect(),
            self.cfg.experiment.model.d_type,
            self.cfg.seed,
        )?)
    }

    fn dictionaries(&mut self) -> Result<Vec<TokenDictionary>, CliError> {
        let path = match self.cfg.dictionaries.clone() {
            Some(p) => p,
            None => self.path("dictionaries.jsonl"),
        };
        if !path.exists() {
            return Ok(Vec::new());
        }
        let p = self.require(path, "synth")?;
        Ok(load_dictionaries(p)?)
    }

    fn model(&mut self, name: &str) -> Result<DescriptionModel, CliError> {
        let dir = self.require(self.path(&format!("models/{name}")), "train")?;
        Ok(DescriptionModel::load(dir)?)
    }

    fn test_corpus(&mut self) -> Result<(Corpus, SplitSpec), CliError> {
        let corpus = self.corpus()?;
        let split = self.split()?;
        Ok((corpus.subset(&split.test_ids), split))
    }

    /// Generation files for model systems, then baselines that were produced.
    fn generation_files(&mut self) -> Result<Vec<(String, PathBuf)>, CliError> {
        let mut out = Vec::new();
        for name in self.system_names() {
            let p = self.require(self.path(&format!("generations/{name}.jsonl")), "generate")?;
            out.push((name, p));
        }
        if self.cfg.experiment.baselines {
            for name in [PREFIX, TRANSLATION] {
                let p = self.path(&format!("generations/{name}.jsonl"));
                if p.exists() {
                    out.push((name.to_string(), self.require(p, "generate")?));
                }
            }
        }
        Ok(out)
    }

    fn scores(&mut self) -> Result<Vec<ScoreRecord>, CliError> {
        let p = self.require(self.path("scores.jsonl"), "score")?;
        Ok(read_scores(p)?)
    }
}

pub fn synth(ctx: &mut Context) -> Result<(), CliError> {
    if ctx.cfg.corpus.is_some() {
        return Err(CliError::Validation("config names an external corpus; synth is for synthetic runs".into()));
    }
    let spec = ctx.cfg.synthetic.to_spec(ctx.cfg.languages.clone(), ctx.cfg.seed);
    let s = generate_synthetic_corpus(&spec)?;
    let corpus = ctx.produced(ctx.path("corpus.jsonl"));
    s.corpus.write_jsonl(&corpus)?;
    let langs = ctx.produced(ctx.path("languages.json"));
    write(&langs, json(&s.languages))?;
    let dicts = ctx.produced(ctx.path("dictionaries.jsonl"));
    save_dictionaries(&s.dictionaries, &dicts)?;
    let types = ctx.produced(ctx.path("types.tsv"));
    TypeEmbeddingTable::random(s.type_ids.clone(), ctx.cfg.experiment.model.d_type, ctx.cfg.seed)?.save_tsv(&types)?;
    log::info!("synthesized {} entities", s.corpus.len());
    Ok(())
}

pub fn stats(ctx: &mut Context) -> Result<(), CliError> {
    let corpus = ctx.corpus()?;
    let langs = ctx.languages()?;
    let mut csv = String::from("language,unit,articles,missing_descriptions,missing_percent,avg_description_length\n");
    for (s, l) in compute_language_stats(&corpus, &langs).iter().zip(langs.iter()) {
        let avg = s.avg_description_length.map_or(String::new(), |v| format!("{v:.2}"));
        let unit = serde_json::to_value(l.length_unit).expect("unit serializes");
        csv.push_str(&format!(
            "{},{},{},{},{:.2},{avg}\n",
            s.language,
            unit.as_str().unwrap_or_default(),
            s.article_count,
            s.missing_description_count,
            s.missing_percent()
        ));
    }
    let p = ctx.produced(ctx.path("stats.csv"));
    write(&p, csv)?;
    let p = ctx.produced(ctx.path("coverage.json"));
    write(&p, json(&language_coverage_distribution(&corpus)))?;
    Ok(())
}

pub fn split(ctx: &mut Context) -> Result<(), CliError> {
    let corpus = ctx.corpus()?;
    let spec = build_splits(&corpus, ctx.cfg.split, ctx.cfg.seed)?;
    let p = ctx.produced(ctx.path("split.json"));
    spec.save(&p)?;
    Ok(())
}

pub fn train(ctx: &mut Context) -> Result<(), CliError> {
    let corpus = ctx.corpus()?;
    let split = ctx.split()?;
    let types = ctx.types(&corpus)?;
    let langs = ctx.languages()?;
    let train = corpus.subset(&split.train_ids);
    let valid = corpus.subset(&split.valid_ids);
    for kind in ctx.cfg.experiment.systems.clone() {
        let model = train_system(&ctx.cfg.experiment, kind, &langs, &types, &train, Some(&valid))?;
        let dir = ctx.path(&format!("models/{}", kind.name()));
        model.save(&dir)?;
        ctx.produced(dir);
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct Applicability {
    instances: usize,
    answered: BTreeMap<String, usize>,
    fraction: BTreeMap<String, f64>,
}

pub fn generate(ctx: &mut Context) -> Result<(), CliError> {
    let (test, split) = ctx.test_corpus()?;
    for name in ctx.system_names() {
        let model = ctx.model(&name)?;
        let recs = generate_all(&model, &name, &test, ctx.cfg.experiment.decode)?;
        let p = ctx.produced(ctx.path(&format!("generations/{name}.jsonl")));
        GenerationRecord::write_jsonl(&recs, &p)?;
    }
    if !ctx.cfg.experiment.baselines {
        return Ok(());
    }
    let corpus = ctx.corpus()?;
    let train = corpus.subset(&split.train_ids);
    let langs = ctx.languages()?;
    let dicts = ctx.dictionaries()?;
    let prefix = PrefixBaseline::from_stats(&compute_language_stats(&train, &langs), langs.clone());
    let translator = (!dicts.is_empty()).then(|| ToyTranslator::new(dicts, langs.clone()));
    let ranking = resource_ranking(&train);
    let instances = shortdesc::experiment::test_instances(&test);
    let mut by_system: BTreeMap<&str, Vec<GenerationRecord>> = BTreeMap::new();
    for (id, lang) in &instances {
        let entity = test.get(id).expect("test instance");
        let mut outputs = vec![(PREFIX, prefix.describe(entity, lang))];
        if let Some(t) = &translator {
            outputs.push((TRANSLATION, translation_description(entity, lang, t, &ranking)?));
        }
        for (name, out) in outputs {
            let list = by_system.entry(name).or_default();
            if let Some(text) = out.text() {
                list.push(GenerationRecord {
                    id: id.clone(),
                    lang: lang.clone(),
                    system: name.to_string(),
                    text: text.to_string(),
                    terminated: true,
                    logprob: 0.0,
                });
            }
        }
    }
    let n = instances.len();
    let mut app = Applicability {
        instances: n,
        answered: BTreeMap::new(),
        fraction: BTreeMap::new(),
    };
    for (name, recs) in &by_system {
        let p = ctx.produced(ctx.path(&format!("generations/{name}.jsonl")));
        GenerationRecord::write_jsonl(recs, &p)?;
        app.answered.insert(name.to_string(), recs.len());
        app.fraction.insert(name.to_string(), recs.len() as f64 / n.max(1) as f64);
    }
    let p = ctx.produced(ctx.path("generations/applicability.json"));
    write(&p, json(&app))?;
    Ok(())
}

fn similarity_config(ctx: &Context, train: &Corpus, langs: &LanguageSet) -> Result<SimilarityConfig, CliError> {
    let idf = match ctx.cfg.metric.weighting {
        Weighting::Uniform => None,
        Weighting::Idf => {
            let docs: Vec<Vec<String>> = train
                .iter()
                .flat_map(|e| e.descriptions.iter().map(|(l, d)| text::tokenize(&d.text, langs.unit(l))))
                .collect();
            Some(compute_idf(&docs)?)
        }
    };
    Ok(SimilarityConfig {
        weighting: ctx.cfg.metric.weighting,
        idf,
        solver: ctx.cfg.metric.solver(),
    })
}

pub fn score(ctx: &mut Context) -> Result<(), CliError> {
    let files = ctx.generation_files()?;
    let scorer = ctx.model(ctx.cfg.experiment.scorer.name())?;
    let corpus = ctx.corpus()?;
    let split = ctx.split()?;
    let test = corpus.subset(&split.test_ids);
    let langs = ctx.languages()?;
    let sim = similarity_config(ctx, &corpus.subset(&split.train_ids), &langs)?;
    let mut all = Vec::new();
    for (_, path) in files {
        let recs = GenerationRecord::read_jsonl(&path)?;
        all.extend(score_records(&recs, &test, &scorer, &sim)?);
    }
    let p = ctx.produced(ctx.path("scores.jsonl"));
    write_scores(&all, &p)?;
    Ok(())
}

fn scored_systems(ctx: &Context, scores: &[ScoreRecord]) -> Vec<String> {
    let mut names = ctx.system_names();
    for b in [PREFIX, TRANSLATION] {
        if scores.iter().any(|s| s.system == b) {
            names.push(b.to_string());
        }
    }
    names
}

pub fn aggregate(ctx: &mut Context) -> Result<(), CliError> {
    let scores = ctx.scores()?;
    let files = ctx.generation_files()?;
    let (test, _) = ctx.test_corpus()?;
    let systems = scored_systems(ctx, &scores);
    let langs: Vec<LanguageCode> = ctx.languages()?.codes().cloned().collect();
    let results = ResultsTable::build(&scores, &systems, &langs);
    let pairwise = PairwiseReport::build(&scores, &systems, ctx.cfg.alpha)?;
    let mut exact = BTreeMap::new();
    for (name, path) in files {
        let recs = GenerationRecord::read_jsonl(&path)?;
        if !recs.is_empty() {
            exact.insert(name, exact_match_rate(&recs, &test));
        }
    }
    let p = ctx.produced(ctx.path("results.csv"));
    write(&p, results.to_csv())?;
    let p = ctx.produced(ctx.path("pairwise.csv"));
    write(&p, pairwise.matrix_csv())?;
    let p = ctx.produced(ctx.path("sign_tests.csv"));
    write_pairwise_csv(&pairwise.rows, &p)?;
    let p = ctx.produced(ctx.path("bt.json"));
    write(&p, json(&serde_json::json!({ "outcomes": pairwise.outcomes, "bt": pairwise.bt, "dropped": pairwise.dropped })))?;
    let p = ctx.produced(ctx.path("exact_match.json"));
    write(&p, json(&exact))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub system: String,
    pub instances: usize,
    pub prior: f64,
    pub unweighted_mean: f64,
    pub weighted_mean: f64,
    pub strata: Vec<Stratum>,
}

fn article_for<'a>(entity: &'a shortdesc::corpus::Entity, lang: &LanguageCode) -> Option<&'a str> {
    entity
        .articles
        .get(lang)
        .or_else(|| entity.articles.values().next())
        .map(|a| a.first_paragraph.as_str())
}

pub fn propensity(ctx: &mut Context) -> Result<(), CliError> {
    let scores = ctx.scores()?;
    let corpus = ctx.corpus()?;
    let examples: Vec<(String, bool)> = corpus
        .iter()
        .flat_map(|e| {
            e.articles
                .iter()
                .map(|(l, a)| (a.first_paragraph.clone(), e.descriptions.contains_key(l)))
        })
        .collect();
    let prior = examples.iter().filter(|x| x.1).count() as f64 / examples.len().max(1) as f64;
    let mut pcfg = ctx.cfg.propensity.model;
    pcfg.seed = ctx.cfg.seed;
    let model = train_propensity(&examples, &pcfg)?;
    let system = ctx.cfg.propensity.system.clone();
    let mine: Vec<&ScoreRecord> = scores.iter().filter(|s| s.system == system).collect();
    if mine.is_empty() {
        return Err(CliError::Validation(format!("no scores for system {system}")));
    }
    let mut records = Vec::new();
    let mut pairs = Vec::new();
    for s in &mine {
        let entity = corpus
            .get(&s.id)
            .ok_or_else(|| CliError::Runtime(format!("scored entity {} not in corpus", s.id)))?;
        let text = article_for(entity, &s.lang).unwrap_or_default();
        let rec = PropensityRecord::new(format!("{}:{}", s.id, s.lang), model.predict(text));
        pairs.push((rec.p, s.score));
        records.push(rec);
    }
    let values: Vec<f64> = mine.iter().map(|s| s.score).collect();
    let weights: Vec<f64> = records.iter().map(|r| propensity_weight(r.p)).collect();
    let summary = PropensitySummary {
        system,
        instances: mine.len(),
        prior,
        unweighted_mean: values.iter().sum::<f64>() / values.len() as f64,
        weighted_mean: weighted_mean(&values, &weights)?,
        strata: stratify(&pairs, ctx.cfg.propensity.bins, Binning::Quantile)?,
    };
    let p = ctx.produced(ctx.path("propensity.json"));
    write(&p, json(&summary))?;
    let p = ctx.produced(ctx.path("propensity_weights.jsonl"));
    write_jsonl(&p, &records)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingReport {
    pub system: String,
    pub language: LanguageCode,
    pub candidates: usize,
    pub dedup: DedupOutcome,
    pub truncated_dropped: usize,
    pub sampled: Vec<String>,
    /// Diverse subset for error coding, chosen by k-means++ seeding.
    pub coding_sample: Vec<String>,
}

fn mean_embedding(model: &DescriptionModel, text: &str, lang: &LanguageCode) -> Result<Vec<f64>, CliError> {
    let (_, m) = model.embed(text, lang)?;
    let n = m.nrows() as f64;
    Ok((0..m.ncols()).map(|j| m.column(j).sum() / n).collect())
}

pub fn sample_eval(ctx: &mut Context) -> Result<(), CliError> {
    let scores = ctx.scores()?;
    let sc = ctx.cfg.sample_eval.clone();
    let gen_path = ctx.require(ctx.path(&format!("generations/{}.jsonl", sc.system)), "generate")?;
    let generations = GenerationRecord::read_jsonl(&gen_path)?;
    let (test, _) = ctx.test_corpus()?;
    let embedder = ctx.model(ctx.cfg.experiment.scorer.name())?;

    let in_lang: BTreeMap<String, &GenerationRecord> = generations
        .iter()
        .filter(|g| g.lang == sc.language)
        .map(|g| (g.id.clone(), g))
        .collect();
    let generated: BTreeMap<String, String> = in_lang.iter().map(|(k, g)| (k.clone(), g.text.clone())).collect();
    let gold: BTreeMap<String, String> = in_lang
        .keys()
        .filter_map(|id| test.get(id)?.descriptions.get(&sc.language).map(|d| (id.clone(), d.text.clone())))
        .collect();
    let dedup = dedup_exact_matches(&generated, &gold);
    let kept: Vec<&String> = dedup.surviving.iter().filter(|id| in_lang[*id].terminated).collect();
    let truncated_dropped = dedup.surviving.len() - kept.len();
    let score_of: BTreeMap<&str, f64> = scores
        .iter()
        .filter(|s| s.system == sc.system && s.lang == sc.language)
        .map(|s| (s.id.as_str(), s.score))
        .collect();
    let candidates: Vec<(String, f64)> = kept
        .iter()
        .filter_map(|id| score_of.get(id.as_str()).map(|s| ((*id).clone(), *s)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let sampled = stratified_sample_by_metric(&candidates, sc.per_bin, sc.bins, &mut rng)?;

    let k = sc.coding_sample.min(sampled.len());
    let rows: Vec<Vec<f64>> = sampled
        .iter()
        .map(|id| mean_embedding(&embedder, &generated[id], &sc.language))
        .collect::<Result<_, _>>()?;
    let dim = rows.first().map_or(0, |r| r.len());
    let points = Mat::from_shape_vec((rows.len(), dim), rows.concat()).expect("rectangular");
    let coding: Vec<String> = kmeanspp_sample(&points, k, &mut rng)?
        .into_iter()
        .map(|i| sampled[i].clone())
        .collect();

    let snippet = |id: &str| -> String {
        let e = test.get(id).expect("test entity");
        article_for(e, &sc.language).unwrap_or_default().chars().take(sc.snippet_chars).collect()
    };
    let inputs: Vec<CampaignInput> = sampled
        .iter()
        .map(|id| CampaignInput {
            entity_id: id.clone(),
            snippet: snippet(id),
            model_description: generated[id].clone(),
            human_description: gold[id].clone(),
            moverscore: score_of.get(id.as_str()).copied(),
        })
        .collect();
    let pool: Vec<PoolEntry> = test
        .iter()
        .filter_map(|e| {
            let d = e.descriptions.get(&sc.language)?;
            Some(PoolEntry {
                entity_id: e.id.clone(),
                snippet: snippet(&e.id),
                description: d.text.clone(),
            })
        })
        .collect();
    let report = SamplingReport {
        system: sc.system.clone(),
        language: sc.language.clone(),
        candidates: in_lang.len(),
        dedup,
        truncated_dropped,
        sampled,
        coding_sample: coding,
    };
    let p = ctx.produced(ctx.path("eval/campaign_inputs.jsonl"));
    write_jsonl(&p, &inputs)?;
    let p = ctx.produced(ctx.path("eval/pool.jsonl"));
    write_jsonl(&p, &pool)?;
    let p = ctx.produced(ctx.path("eval/sampling.json"));
    write(&p, json(&report))?;
    Ok(())
}

/// Open the event log, create the campaign on first start and return the service.
pub fn prepare_service(ctx: &mut Context) -> Result<EvalService, CliError> {
    let inputs_path = ctx.require(ctx.path("eval/campaign_inputs.jsonl"), "sample-eval")?;
    let pool_path = ctx.require(ctx.path("eval/pool.jsonl"), "sample-eval")?;
    let inputs: Vec<CampaignInput> = read_jsonl(&inputs_path)?;
    let pool: Vec<PoolEntry> = read_jsonl(&pool_path)?;
    let log = ctx.path("eval/events.jsonl");
    let mut svc = EvalService::open(&log, ctx.cfg.serve.question.clone())?;
    let sc = &ctx.cfg.sample_eval;
    if !svc.state().campaigns.contains_key(&sc.campaign_id) {
        svc.create_campaign(&sc.campaign_id, &inputs, sc.language.as_str(), &pool, ctx.cfg.seed)?;
    }
    Ok(svc)
}

pub async fn serve_until(
    svc: EvalService,
    address: &str,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(address)
        .await
        .map_err(|e| CliError::Runtime(format!("bind {address}: {e}")))?;
    shortdesc_eval::serve(listener, Arc::new(Mutex::new(svc)), shutdown)
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn serve(ctx: &mut Context) -> Result<(), CliError> {
    let svc = prepare_service(ctx)?;
    ctx.manifest("serve")?.write(&ctx.out)?;
    let address = ctx.cfg.serve.address.clone();
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(serve_until(svc, &address, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}

pub fn report(ctx: &mut Context) -> Result<(), CliError> {
    let results = ctx.require(ctx.path("results.csv"), "aggregate")?;
    let pairwise = ctx.require(ctx.path("pairwise.csv"), "aggregate")?;
    let signs = ctx.require(ctx.path("sign_tests.csv"), "aggregate")?;
    let exact = ctx.require(ctx.path("exact_match.json"), "aggregate")?;
    let mut md = String::from("# Experiment report\n\n");
    md.push_str(&format!("Seed {}, configuration hash `{}`.\n\n", ctx.cfg.seed, ctx.cfg.hash()));
    md.push_str("## Similarity to reference descriptions\n\n");
    md.push_str(&crate::report::csv_to_markdown(&read_text(&results)?));
    md.push_str("\n## Pairwise comparison\n\nEntry: probability that the row system beats the column system; `*` marks sign-test significance.\n\n");
    md.push_str(&crate::report::csv_to_markdown(&read_text(&pairwise)?));
    md.push_str("\n### Sign tests\n\n");
    md.push_str(&crate::report::csv_to_markdown(&read_text(&signs)?));
    let exact: BTreeMap<String, f64> = read_json(&exact)?;
    md.push_str("\n## Exact match with the reference\n\n| system | exact match |\n|---|---|\n");
    for (s, v) in &exact {
        md.push_str(&format!("| {s} | {v:.4} |\n"));
    }
    let app = ctx.path("generations/applicability.json");
    if app.exists() {
        let app: Applicability = read_json(&ctx.require(app, "generate")?)?;
        md.push_str("\n## Baseline applicability\n\n| baseline | answered | fraction |\n|---|---|---|\n");
        for (s, n) in &app.answered {
            md.push_str(&format!("| {s} | {n}/{} | {:.4} |\n", app.instances, app.fraction[s]));
        }
    }
    let prop = ctx.path("propensity.json");
    if prop.exists() {
        let p: PropensitySummary = read_json(&ctx.require(prop, "propensity")?)?;
        md.push_str(&format!(
            "\n## Propensity weighting ({})\n\nUnweighted mean {:.4}, weighted mean {:.4} over {} instances (description prior {:.3}).\n\n| bin | propensity range | count | mean score |\n|---|---|---|---|\n",
            p.system, p.unweighted_mean, p.weighted_mean, p.instances, p.prior
        ));
        for s in &p.strata {
            let mean = s.mean_score.map_or("-".to_string(), |m| format!("{m:.4}"));
            md.push_str(&format!("| {} | {:.3}–{:.3} | {} | {mean} |\n", s.bin, s.lower, s.upper, s.count));
        }
    }
    let sampling = ctx.path("eval/sampling.json");
    if sampling.exists() {
        let s: SamplingReport = read_json(&ctx.require(sampling, "sample-eval")?)?;
        md.push_str(&format!(
            "\n## Human evaluation sample ({}, {})\n\n{} candidates, {} identical to the reference removed ({:.1}%), {} truncated removed, {} sampled, {} selected for error coding.\n",
            s.system,
            s.language,
            s.candidates,
            s.dedup.eliminated.len(),
            100.0 * s.dedup.eliminated_fraction,
            s.truncated_dropped,
            s.sampled.len(),
            s.coding_sample.len()
        ));
    }
    let events = ctx.path("eval/events.jsonl");
    if events.exists() {
        let events_path = ctx.require(events, "serve")?;
        let state = shortdesc_eval::ServiceState::replay(&shortdesc_eval::log::read_events(&events_path)?);
        for id in state.campaigns.keys() {
            let r = shortdesc_eval::aggregate_results(&state, id)?;
            md.push_str(&crate::report::human_section(&r));
        }
    }
    let p = ctx.produced(ctx.path("report.md"));
    write(&p, md)?;
    Ok(())
}

fn read_text(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))
}

pub fn finish(ctx: &Context, command: &str) -> Result<(), CliError> {
    ctx.manifest(command)?.write(&ctx.out)?;
    Ok(())
}
