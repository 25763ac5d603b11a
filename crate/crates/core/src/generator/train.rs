use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::model::DescriptionModel;
use crate::autograd::Graph;
use crate::corpus::{sample_training_instance, Corpus, Entity, LanguageSet};
use crate::encoding::{build_vocab, select_query_language, QueryMode, TypeEmbeddingTable};
use crate::error::{Error, Result};
use crate::params::{Adam, Grads};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-token NLL over the epoch's training instances.
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

fn trainable(e: &Entity) -> bool {
    !e.articles.is_empty() && !e.descriptions.is_empty()
}

/// Mean per-token NLL over valid (entity, language) pairs, inference query policy.
pub fn validation_loss(model: &DescriptionModel, valid: &Corpus, max_instances: usize) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    let pairs = valid
        .iter()
        .filter(|e| trainable(e))
        .flat_map(|e| e.descriptions.keys().map(move |l| (e, l)))
        .take(max_instances);
    for (e, lang) in pairs {
        total += model.training_loss(e, lang)?;
        tokens += model.target_ids(&e.descriptions[lang].text, lang).len() + 1;
    }
    Ok((tokens > 0).then(|| total / tokens as f64))
}

/// Build a vocabulary from `train`, initialise a model and fit it.
pub fn fit(
    config: ModelConfig,
    languages: LanguageSet,
    types: TypeEmbeddingTable,
    train_set: &Corpus,
    valid_set: Option<&Corpus>,
    hyper: &TrainConfig,
) -> Result<DescriptionModel> {
    let vocab = build_vocab(train_set, &languages, config.vocab_size);
    let model = DescriptionModel::new(config, languages, vocab, types)?;
    train(model, train_set, valid_set, hyper)
}

/// Mini-batch Adam on teacher-forced NLL. Each epoch visits every trainable
/// entity once with a uniformly drawn target language and query language.
pub fn train(
    mut model: DescriptionModel,
    train_set: &Corpus,
    valid_set: Option<&Corpus>,
    hyper: &TrainConfig,
) -> Result<DescriptionModel> {
    if hyper.batch_size == 0 {
        return Err(Error::Validation("batch_size must be positive".into()));
    }
    let entities: Vec<&Entity> = train_set.iter().filter(|e| trainable(e)).collect();
    if entities.is_empty() {
        return Err(Error::Insufficient("no entity has both an article and a description".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed);
    let mut adam = Adam::new(&model.store, hyper.optimizer);
    let query_mode = if model.config.monolingual { QueryMode::Infer } else { QueryMode::Train };

    for epoch in 0..hyper.epochs {
        let mut order = entities.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(hyper.batch_size) {
            let mut grads = Grads::zeros_like(&model.store);
            for entity in batch {
                let inst = sample_training_instance(entity, &mut rng)?;
                let target = inst.target_language;
                let query = select_query_language(entity, &target, query_mode, &mut rng)?;
                let mut g = Graph::new(&model.store);
                let loss = model.loss_graph(&mut g, entity, &target, &query)?;
                let value = g.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("loss at epoch {epoch} on {}", entity.id)));
                }
                epoch_loss += value;
                epoch_tokens += model.target_ids(&entity.descriptions[&target].text, &target).len() + 1;
                grads.merge(&g.backward(loss).params);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.store, &grads);
            if !model.store.all_finite() {
                return Err(Error::NonFinite(format!("parameters after step {}", adam.steps())));
            }
        }
        let valid_loss = match valid_set {
            Some(v) => validation_loss(&model, v, hyper.max_valid_instances)?,
            None => None,
        };
        let log = EpochLog {
            epoch,
            train_loss: epoch_loss / epoch_tokens.max(1) as f64,
            valid_loss,
            steps: adam.steps(),
        };
        info!(
            "epoch {} train {:.4} valid {}",
            epoch,
            log.train_loss,
            valid_loss.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
        model.log.epochs.push(log);
    }
    Ok(model)
}
