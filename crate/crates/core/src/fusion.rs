//! Cross-language article fusion and decoder-context assembly.
//!
//! For a query language `q` and articles `A_1..A_n` (including `A_q`), the
//! fused representation of query token `i` is
//!
//! ```text
//! A_i = 1/n Σ_l FF(LayerNorm(Q_i + softmax(Q_i K_lᵀ / √d_k) V_l))
//! Q = A_q W_Q,  K_l = A_l W_K,  V_l = A_l W_V
//! ```
//!
//! with single-head attention and the projected query as the skip input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Mat, Var};
use crate::corpus::LanguageCode;
use crate::encoding::{EncodedArticle, PooledDescription};
use crate::error::{Error, Result};
use crate::nn::{FeedForward, LayerNorm, Linear};
use crate::params::{ParamId, ParamStore};

/// Plain-matrix form of the fusion weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParameters {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    pub ln_gain: Mat,
    pub ln_bias: Mat,
    pub ff_w1: Mat,
    pub ff_b1: Mat,
    pub ff_w2: Mat,
    pub ff_b2: Mat,
}

impl FusionParameters {
    pub fn d_model(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn d_k(&self) -> usize {
        self.w_q.ncols()
    }

    fn validate(&self) -> Result<()> {
        let (dm, dk) = (self.d_model(), self.d_k());
        let dff = self.ff_w1.ncols();
        let expect = [
            ("w_k", &self.w_k, (dm, dk)),
            ("w_v", &self.w_v, (dm, dk)),
            ("ln_gain", &self.ln_gain, (1, dk)),
            ("ln_bias", &self.ln_bias, (1, dk)),
            ("ff_w1", &self.ff_w1, (dk, dff)),
            ("ff_b1", &self.ff_b1, (1, dff)),
            ("ff_w2", &self.ff_w2, (dff, dk)),
            ("ff_b2", &self.ff_b2, (1, dk)),
        ];
        for (name, m, shape) in expect {
            if m.dim() != shape {
                return Err(Error::Shape(format!("{name}: {:?}, expected {shape:?}", m.dim())));
            }
        }
        Ok(())
    }
}

/// Fusion weights registered in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct FusionBlock {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub norm: LayerNorm,
    pub ff: FeedForward,
    pub d_model: usize,
    pub d_k: usize,
}

impl FusionBlock {
    /// Random initialization; the feed-forward width is `4 · d_k`.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d_model: usize, d_k: usize, rng: &mut R) -> Self {
        let std = 1.0 / (d_model as f64).sqrt();
        FusionBlock {
            w_q: store.add_normal(format!("{name}.w_q"), (d_model, d_k), std, rng),
            w_k: store.add_normal(format!("{name}.w_k"), (d_model, d_k), std, rng),
            w_v: store.add_normal(format!("{name}.w_v"), (d_model, d_k), std, rng),
            norm: LayerNorm::new(store, &format!("{name}.norm"), d_k),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_k, 4 * d_k, rng),
            d_model,
            d_k,
        }
    }

    /// Register explicit weights.
    pub fn install(store: &mut ParamStore, name: &str, p: &FusionParameters) -> Result<Self> {
        p.validate()?;
        let ff = FeedForward {
            up: Linear {
                weight: store.add(format!("{name}.ff.up.weight"), p.ff_w1.clone()),
                bias: Some(store.add(format!("{name}.ff.up.bias"), p.ff_b1.clone())),
            },
            down: Linear {
                weight: store.add(format!("{name}.ff.down.weight"), p.ff_w2.clone()),
                bias: Some(store.add(format!("{name}.ff.down.bias"), p.ff_b2.clone())),
            },
        };
        Ok(FusionBlock {
            w_q: store.add(format!("{name}.w_q"), p.w_q.clone()),
            w_k: store.add(format!("{name}.w_k"), p.w_k.clone()),
            w_v: store.add(format!("{name}.w_v"), p.w_v.clone()),
            norm: LayerNorm {
                gain: store.add(format!("{name}.norm.gain"), p.ln_gain.clone()),
                bias: store.add(format!("{name}.norm.bias"), p.ln_bias.clone()),
            },
            ff,
            d_model: p.d_model(),
            d_k: p.d_k(),
        })
    }

    pub fn parameters(&self, store: &ParamStore) -> FusionParameters {
        let get = |id: ParamId| store.get(id).clone();
        FusionParameters {
            w_q: get(self.w_q),
            w_k: get(self.w_k),
            w_v: get(self.w_v),
            ln_gain: get(self.norm.gain),
            ln_bias: get(self.norm.bias),
            ff_w1: get(self.ff.up.weight),
            ff_b1: get(self.ff.up.bias.unwrap()),
            ff_w2: get(self.ff.down.weight),
            ff_b2: get(self.ff.down.bias.unwrap()),
        }
    }

    /// Fuse `encoded` around the article of `query`. Output has one row per query token.
    pub fn forward(&self, g: &mut Graph, encoded: &[(LanguageCode, Var)], query: &LanguageCode) -> Result<Var> {
        for (lang, v) in encoded {
            let cols = g.value(*v).ncols();
            if cols != self.d_model {
                return Err(Error::Shape(format!(
                    "article {lang} has width {cols}, fusion expects {}",
                    self.d_model
                )));
            }
        }
        let a_q = encoded
            .iter()
            .find(|(l, _)| l == query)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Validation(format!("query language {query} not among encoded articles")))?;

        let w_q = g.param(self.w_q);
        let w_k = g.param(self.w_k);
        let w_v = g.param(self.w_v);
        let q = g.matmul(a_q, w_q);
        let scale = 1.0 / (self.d_k as f64).sqrt();

        let branches: Vec<Var> = encoded
            .iter()
            .map(|(_, a_l)| {
                let k = g.matmul(*a_l, w_k);
                let v = g.matmul(*a_l, w_v);
                let s = g.matmul_t(q, k);
                let s = g.scale(s, scale);
                let attn = g.softmax(s);
                let mixed = g.matmul(attn, v);
                let skip = g.add(q, mixed);
                let h = self.norm.forward(g, skip);
                self.ff.forward(g, h)
            })
            .collect();
        Ok(if branches.len() == 1 { branches[0] } else { g.mean_of(&branches) })
    }
}

/// Fused article representation, one row per query-article token.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedArticle {
    pub matrix: Mat,
}

/// Evaluate the fusion formula on already-encoded articles.
pub fn fuse_articles(encoded: &[EncodedArticle], query: &LanguageCode, params: &FusionParameters) -> Result<FusedArticle> {
    if encoded.is_empty() {
        return Err(Error::Insufficient("no encoded articles to fuse".into()));
    }
    let mut store = ParamStore::new();
    let block = FusionBlock::install(&mut store, "fusion", params)?;
    let mut g = Graph::new(&store);
    let inputs: Vec<(LanguageCode, Var)> = encoded
        .iter()
        .map(|e| (e.language.clone(), g.input(e.matrix.clone())))
        .collect();
    let out = block.forward(&mut g, &inputs, query)?;
    Ok(FusedArticle {
        matrix: g.value(out).clone(),
    })
}

/// Which modalities join the decoder context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub use_desc: bool,
    pub use_types: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation { use_desc: true, use_types: true };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextSlot {
    Language,
    Type,
    Description,
    Article(usize),
}

/// Learned maps that turn the type and description vectors into context tokens.
#[derive(Debug, Clone)]
pub struct ContextAssembler {
    pub type_proj: Linear,
    pub desc_proj: Linear,
}

impl ContextAssembler {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_type: usize,
        d_desc: usize,
        d_model: usize,
        rng: &mut R,
    ) -> Self {
        ContextAssembler {
            type_proj: Linear::with_std(store, &format!("{name}.type_proj"), d_type, d_model, true, 0.02, rng),
            desc_proj: Linear::with_std(store, &format!("{name}.desc_proj"), d_desc, d_model, true, 0.02, rng),
        }
    }

    /// `[language; T'; D'; A]`, omitting disabled or absent modalities.
    pub fn forward(
        &self,
        g: &mut Graph,
        language: Var,
        fused: Var,
        description: Option<Var>,
        types: Option<Var>,
        ablation: Ablation,
    ) -> (Var, Vec<ContextSlot>) {
        let mut parts = vec![language];
        let mut slots = vec![ContextSlot::Language];
        if let (true, Some(t)) = (ablation.use_types, types) {
            parts.push(self.type_proj.forward(g, t));
            slots.push(ContextSlot::Type);
        }
        if let (true, Some(d)) = (ablation.use_desc, description) {
            parts.push(self.desc_proj.forward(g, d));
            slots.push(ContextSlot::Description);
        }
        parts.push(fused);
        slots.extend((0..g.value(fused).nrows()).map(ContextSlot::Article));
        (g.concat_rows(&parts), slots)
    }
}

/// The sequence the decoder cross-attends to.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderContext {
    pub rows: Mat,
    pub slots: Vec<ContextSlot>,
}

impl DecoderContext {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Assemble a context from plain values. A null pooled description is
/// treated as disabled for this instance.
pub fn assemble_decoder_context(
    assembler: &ContextAssembler,
    store: &ParamStore,
    language_embedding: &Mat,
    fused: &FusedArticle,
    description: &PooledDescription,
    type_vector: &Mat,
    ablation: Ablation,
) -> DecoderContext {
    let mut g = Graph::new(store);
    let lang = g.input(language_embedding.clone());
    let a = g.input(fused.matrix.clone());
    let d = (!description.is_null()).then(|| g.input(description.vector.clone()));
    let t = g.input(type_vector.clone());
    let (ctx, slots) = assembler.forward(&mut g, lang, a, d, Some(t), ablation);
    DecoderContext {
        rows: g.value(ctx).clone(),
        slots,
    }
}
