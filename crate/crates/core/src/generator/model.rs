use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::decode::{decode, DecodeStrategy, StepScorer};
use super::train::TrainingLog;
use crate::autograd::{Graph, Mat, Var};
use crate::corpus::{Entity, LanguageCode, LanguageSet};
use crate::encoding::{
    pool_descriptions_graph, select_query_language, type_representation, EncoderConfig, QueryMode, TextEncoder,
    TypeEmbeddingTable, Vocabulary, BOS, EOS,
};
use crate::error::{Error, Result};
use crate::fusion::{ContextAssembler, ContextSlot, FusionBlock};
use crate::nn::{sinusoidal_positions, DecoderLayer, LayerNorm};
use crate::params::{Checkpoint, ParamId, ParamStore};

#[derive(Debug, Clone)]
struct Layout {
    token_embedding: ParamId,
    article_encoder: TextEncoder,
    desc_encoder: TextEncoder,
    fusion: FusionBlock,
    assembler: ContextAssembler,
    decoder: Vec<DecoderLayer>,
    decoder_norm: LayerNorm,
    positions: Mat,
}

/// A description generator together with everything needed to run it.
#[derive(Debug, Clone)]
pub struct DescriptionModel {
    pub config: ModelConfig,
    pub languages: LanguageSet,
    pub vocab: Vocabulary,
    pub types: TypeEmbeddingTable,
    pub store: ParamStore,
    pub log: TrainingLog,
    layout: Layout,
}

/// One generated description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub target_language: LanguageCode,
    pub tokens: Vec<String>,
    pub text: String,
    pub terminated: bool,
    pub log_prob: f64,
}

/// JSONL row for generated output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub lang: LanguageCode,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub system: String,
    pub text: String,
    pub terminated: bool,
    pub logprob: f64,
}

impl GenerationRecord {
    pub fn new(entity_id: &str, system: &str, result: &GenerationResult) -> Self {
        GenerationRecord {
            id: entity_id.to_string(),
            lang: result.target_language.clone(),
            system: system.to_string(),
            text: result.text.clone(),
            terminated: result.terminated,
            logprob: result.log_prob,
        }
    }

    pub fn write_jsonl(records: &[GenerationRecord], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        raw.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for &b in *p {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl DescriptionModel {
    /// Fresh model with parameters drawn from `config.seed`.
    pub fn new(
        config: ModelConfig,
        languages: LanguageSet,
        vocab: Vocabulary,
        types: TypeEmbeddingTable,
    ) -> Result<Self> {
        config.validate()?;
        if types.dim() != config.d_type {
            return Err(Error::Shape(format!(
                "type table has width {}, config expects {}",
                types.dim(),
                config.d_type
            )));
        }
        for l in languages.codes() {
            if vocab.language_id(l).is_none() {
                return Err(Error::Validation(format!("vocabulary lacks a token for language {l}")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.d_model;
        let token_embedding = store.add_normal("embedding", (vocab.len(), d), 1.0 / (d as f64).sqrt(), &mut rng);
        let article_encoder = TextEncoder::new(
            &mut store,
            "article",
            token_embedding,
            EncoderConfig {
                d_model: d,
                layers: config.layers,
                heads: config.heads,
                max_positions: config.max_positions,
            },
            &mut rng,
        );
        let desc_embedding = store.add_normal(
            "desc.embedding",
            (vocab.len(), config.d_desc),
            1.0 / (config.d_desc as f64).sqrt(),
            &mut rng,
        );
        let desc_encoder = TextEncoder::new(
            &mut store,
            "desc",
            desc_embedding,
            EncoderConfig {
                d_model: config.d_desc,
                layers: config.desc_layers,
                heads: config.desc_heads,
                max_positions: config.max_positions,
            },
            &mut rng,
        );
        let fusion = FusionBlock::new(&mut store, "fusion", d, d, &mut rng);
        let assembler = ContextAssembler::new(&mut store, "context", config.d_type, config.d_desc, d, &mut rng);
        let decoder = (0..config.layers)
            .map(|i| DecoderLayer::new(&mut store, &format!("decoder.layer{i}"), d, config.heads, &mut rng))
            .collect();
        let decoder_norm = LayerNorm::new(&mut store, "decoder.norm", d);
        let layout = Layout {
            token_embedding,
            article_encoder,
            desc_encoder,
            fusion,
            assembler,
            decoder,
            decoder_norm,
            positions: sinusoidal_positions(config.max_positions, d),
        };
        Ok(DescriptionModel {
            config,
            languages,
            vocab,
            types,
            store,
            log: TrainingLog::default(),
            layout,
        })
    }

    /// Encoder over description text; also the embedder behind the similarity metric.
    pub fn description_encoder(&self) -> &TextEncoder {
        &self.layout.desc_encoder
    }

    /// Query language used at inference time. The fallback draw is seeded
    /// from the entity id and target so repeated calls agree.
    pub fn inference_query(&self, entity: &Entity, target: &LanguageCode) -> Result<LanguageCode> {
        let seed = fnv1a(&[
            &self.config.seed.to_le_bytes(),
            entity.id.as_bytes(),
            target.as_str().as_bytes(),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        select_query_language(entity, target, QueryMode::Infer, &mut rng)
    }

    /// Decoder context `[lang; T'; D'; A]` as a graph node, with its slot layout.
    pub fn context(
        &self,
        g: &mut Graph,
        entity: &Entity,
        target: &LanguageCode,
        query: &LanguageCode,
    ) -> Result<(Var, Vec<ContextSlot>)> {
        let lay = &self.layout;
        if !self.languages.contains(target) {
            return Err(Error::Validation(format!("unknown target language {target}")));
        }
        let max = self.config.max_positions;
        let mut encoded = Vec::new();
        for (lang, article) in &entity.articles {
            if self.config.monolingual && lang != query {
                continue;
            }
            let ids = self.vocab.encode(&article.first_paragraph, self.languages.unit(lang), max);
            if ids.is_empty() {
                continue;
            }
            encoded.push((lang.clone(), lay.article_encoder.forward(g, &ids)));
        }
        let fused = lay.fusion.forward(g, &encoded, query)?;
        let description = if self.config.use_desc {
            pool_descriptions_graph(g, &lay.desc_encoder, &self.vocab, &self.languages, entity, target).map(|(v, _)| v)
        } else {
            None
        };
        let types = self
            .config
            .use_types
            .then(|| g.input(type_representation(entity, &self.types)));
        let lang_id = self.vocab.language_id(target).expect("checked at construction");
        let lang = g.embed(lay.token_embedding, &[lang_id]);
        Ok(lay
            .assembler
            .forward(g, lang, fused, description, types, self.config.ablation()))
    }

    /// Next-token logits for every position of `inputs` (BOS first), `len × vocab`.
    pub fn decoder_logits(&self, g: &mut Graph, context: Var, inputs: &[usize]) -> Var {
        let lay = &self.layout;
        let d = self.config.d_model;
        let e = g.embed(lay.token_embedding, inputs);
        let e = g.scale(e, (d as f64).sqrt());
        let pos = lay.positions.slice(ndarray::s![..inputs.len(), ..]).to_owned();
        let mut x = g.add_const(e, &pos);
        for layer in &lay.decoder {
            x = layer.forward(g, x, context);
        }
        let x = lay.decoder_norm.forward(g, x);
        let table = g.param(lay.token_embedding);
        g.matmul_t(x, table)
    }

    /// Target ids for a description, capped so the decoder input fits.
    pub fn target_ids(&self, text: &str, language: &LanguageCode) -> Vec<usize> {
        let cap = self.config.max_positions - 1;
        self.vocab.encode(text, self.languages.unit(language), cap)
    }

    /// Summed token NLL of the gold description under teacher forcing.
    pub fn loss_graph(
        &self,
        g: &mut Graph,
        entity: &Entity,
        target: &LanguageCode,
        query: &LanguageCode,
    ) -> Result<Var> {
        let gold = entity
            .descriptions
            .get(target)
            .ok_or_else(|| Error::Insufficient(format!("entity {} has no {target} description", entity.id)))?;
        let y = self.target_ids(&gold.text, target);
        let (ctx, _) = self.context(g, entity, target, query)?;
        let mut inputs = vec![BOS];
        inputs.extend(&y);
        let mut targets = y;
        targets.push(EOS);
        let logits = self.decoder_logits(g, ctx, &inputs);
        Ok(g.cross_entropy(logits, &targets))
    }

    /// Teacher-forced NLL with the inference-time query policy.
    pub fn training_loss(&self, entity: &Entity, target: &LanguageCode) -> Result<f64> {
        let query = self.inference_query(entity, target)?;
        let mut g = Graph::new(&self.store);
        let loss = self.loss_graph(&mut g, entity, target, &query)?;
        Ok(g.scalar(loss))
    }

    /// Decode a description of `entity` in `target`.
    pub fn generate(
        &self,
        entity: &Entity,
        target: &LanguageCode,
        strategy: DecodeStrategy,
    ) -> Result<GenerationResult> {
        let query = self.inference_query(entity, target)?;
        let context = {
            let mut g = Graph::new(&self.store);
            let (ctx, _) = self.context(&mut g, entity, target, &query)?;
            g.value(ctx).clone()
        };
        let scorer = ModelScorer { model: self, context };
        let out = decode(&scorer, self.config.max_output_tokens, strategy);
        let unit = self.languages.unit(target);
        let tokens: Vec<String> = out.tokens.iter().map(|&t| self.vocab.token(t).to_string()).collect();
        Ok(GenerationResult {
            target_language: target.clone(),
            text: self.vocab.decode(&out.tokens, unit),
            tokens,
            terminated: out.terminated,
            log_prob: out.log_prob,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write_json = |name: &str, value: String| {
            let p = dir.join(name);
            std::fs::write(&p, value).map_err(|e| Error::io(&p, e))
        };
        write_json("config.json", serde_json::to_string_pretty(&self.config)?)?;
        write_json("languages.json", serde_json::to_string_pretty(&self.languages)?)?;
        write_json("training_log.json", serde_json::to_string_pretty(&self.log)?)?;
        self.vocab.save(dir.join("vocab.json"))?;
        self.types.save_tsv(dir.join("types.tsv"))?;
        self.store.to_checkpoint().save(dir.join("checkpoint.json"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let config: ModelConfig = serde_json::from_str(&read("config.json")?)?;
        let languages: LanguageSet = serde_json::from_str(&read("languages.json")?)?;
        let vocab = Vocabulary::load(dir.join("vocab.json"))?;
        let types = TypeEmbeddingTable::load_tsv(dir.join("types.tsv"))?;
        let mut model = DescriptionModel::new(config, languages, vocab, types)?;
        model.store.load_checkpoint(&Checkpoint::load(dir.join("checkpoint.json"))?)?;
        model.log = serde_json::from_str(&read("training_log.json")?)?;
        Ok(model)
    }
}

struct ModelScorer<'m> {
    model: &'m DescriptionModel,
    context: Mat,
}

impl StepScorer for ModelScorer<'_> {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let m = self.model;
        let mut inputs = vec![BOS];
        inputs.extend_from_slice(prefix);
        inputs.truncate(m.config.max_positions);
        let mut g = Graph::new(&m.store);
        let ctx = g.input(self.context.clone());
        let logits = m.decoder_logits(&mut g, ctx, &inputs);
        let last = g.value(logits).row(inputs.len() - 1).to_owned();
        let allowed = |t: usize| t == EOS || !m.vocab.is_special(t);
        let max = (0..last.len())
            .filter(|&t| allowed(t))
            .map(|t| last[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + (0..last.len())
                .filter(|&t| allowed(t))
                .map(|t| (last[t] - max).exp())
                .sum::<f64>()
                .ln();
        (0..last.len())
            .map(|t| if allowed(t) { last[t] - lse } else { f64::NEG_INFINITY })
            .collect()
    }
}
