use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Vocabulary;
use crate::autograd::{Graph, Mat, Var};
use crate::corpus::{ArticleText, LanguageCode, LanguageSet};
use crate::error::{Error, Result};
use crate::nn::{sinusoidal_positions, EncoderLayer, LayerNorm};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_positions: usize,
}

/// Token embedding + sinusoidal positions + a stack of pre-norm encoder layers.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub embedding: ParamId,
    pub layers: Vec<EncoderLayer>,
    pub norm: LayerNorm,
    pub config: EncoderConfig,
    positions: Mat,
}

impl TextEncoder {
    /// Builds the layers under `name`; `embedding` may be shared with other components.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        embedding: ParamId,
        config: EncoderConfig,
        rng: &mut R,
    ) -> Self {
        assert_eq!(store.get(embedding).ncols(), config.d_model, "embedding width");
        let layers = (0..config.layers)
            .map(|i| EncoderLayer::new(store, &format!("{name}.layer{i}"), config.d_model, config.heads, rng))
            .collect();
        TextEncoder {
            embedding,
            layers,
            norm: LayerNorm::new(store, &format!("{name}.norm"), config.d_model),
            positions: sinusoidal_positions(config.max_positions, config.d_model),
            config,
        }
    }

    /// Embedded and position-tagged tokens, before any layer.
    pub fn embed(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let e = g.embed(self.embedding, ids);
        let e = g.scale(e, (self.config.d_model as f64).sqrt());
        let pos = self.positions.slice(ndarray::s![..ids.len(), ..]).to_owned();
        g.add_const(e, &pos)
    }

    /// Contextual token vectors, `ids.len() × d_model`. `ids` must be nonempty
    /// and no longer than `max_positions`.
    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        assert!(!ids.is_empty() && ids.len() <= self.config.max_positions);
        let mut x = self.embed(g, ids);
        for layer in &self.layers {
            x = layer.forward(g, x);
        }
        self.norm.forward(g, x)
    }
}

/// One article's token-by-dimension representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedArticle {
    pub language: LanguageCode,
    pub matrix: Mat,
}

impl EncodedArticle {
    pub fn tokens(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Encode the first paragraph of `article`, truncated to the encoder's position limit.
pub fn encode_article(
    encoder: &TextEncoder,
    store: &ParamStore,
    vocab: &Vocabulary,
    languages: &LanguageSet,
    article: &ArticleText,
) -> Result<EncodedArticle> {
    let ids = vocab.encode(
        &article.first_paragraph,
        languages.unit(&article.language),
        encoder.config.max_positions,
    );
    if ids.is_empty() {
        return Err(Error::Validation(format!(
            "article in {} has no tokens",
            article.language
        )));
    }
    let mut g = Graph::new(store);
    let out = encoder.forward(&mut g, &ids);
    Ok(EncodedArticle {
        language: article.language.clone(),
        matrix: g.value(out).clone(),
    })
}
