//! From raw text to model inputs: vocabulary, article and description
//! encoders, semantic-type vectors and the query-language policy.

mod encoder;
mod pooling;
mod query;
mod types;
mod vocab;

pub use encoder::{encode_article, EncodedArticle, EncoderConfig, TextEncoder};
pub use pooling::{description_sources, pool_descriptions, pool_descriptions_graph, PooledDescription};
pub use query::{select_query_language, QueryMode};
pub use types::{type_representation, TypeEmbeddingTable};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, UNK};
