use super::{TextEncoder, Vocabulary};
use crate::autograd::{Graph, Mat, Var};
use crate::corpus::{DescriptionText, Entity, LanguageCode, LanguageSet};
use crate::params::ParamStore;

/// Language-independent summary of the descriptions an entity already has.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDescription {
    /// `1 × d_desc`; all zeros when `n_sources == 0`.
    pub vector: Mat,
    pub n_sources: usize,
}

impl PooledDescription {
    pub fn null(d_desc: usize) -> Self {
        PooledDescription {
            vector: Mat::zeros((1, d_desc)),
            n_sources: 0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.n_sources == 0
    }
}

/// Descriptions usable when generating in `target`: every language except the target.
pub fn description_sources<'e>(entity: &'e Entity, target: &LanguageCode) -> Vec<&'e DescriptionText> {
    entity
        .descriptions
        .iter()
        .filter(|(l, _)| *l != target)
        .map(|(_, d)| d)
        .collect()
}

/// Mean over languages of the mean contextual token vector; `None` when
/// no other-language description has any token.
pub fn pool_descriptions_graph(
    g: &mut Graph,
    encoder: &TextEncoder,
    vocab: &Vocabulary,
    languages: &LanguageSet,
    entity: &Entity,
    target: &LanguageCode,
) -> Option<(Var, usize)> {
    let per_language: Vec<Var> = description_sources(entity, target)
        .into_iter()
        .filter_map(|d| {
            let ids = vocab.encode(&d.text, languages.unit(&d.language), encoder.config.max_positions);
            (!ids.is_empty()).then(|| {
                let tokens = encoder.forward(g, &ids);
                g.mean_rows(tokens)
            })
        })
        .collect();
    match per_language.len() {
        0 => None,
        1 => Some((per_language[0], 1)),
        n => Some((g.mean_of(&per_language), n)),
    }
}

pub fn pool_descriptions(
    encoder: &TextEncoder,
    store: &ParamStore,
    vocab: &Vocabulary,
    languages: &LanguageSet,
    entity: &Entity,
    target: &LanguageCode,
) -> PooledDescription {
    let mut g = Graph::new(store);
    match pool_descriptions_graph(&mut g, encoder, vocab, languages, entity, target) {
        Some((v, n)) => PooledDescription {
            vector: g.value(v).clone(),
            n_sources: n,
        },
        None => PooledDescription::null(encoder.config.d_model),
    }
}
