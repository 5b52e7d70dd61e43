//! Node2Vec-style node embeddings and their downstream helpers.

pub mod features;
pub mod io;
pub mod pca;
pub mod skipgram;
pub mod walks;

pub use features::{edge_features, Combiner};
pub use io::{read_embedding_binary, read_embedding_text, write_embedding_binary, write_embedding_text};
pub use pca::{pca_project, Pca};
pub use skipgram::{skipgram_train, EmbeddingMatrix, SkipGramParams, TrainingMeta};
pub use walks::{random_walks, transition_probabilities, WalkCorpus, WalkParams};
