//! The recurrent detector: embeddings, stacked LSTM layers in one or both
//! directions, feature splice and fusion, softmax head.

mod config;
mod engine;
mod ops;
mod params;

pub use config::{ModelConfig, DEFAULT_DROPOUT, DEFAULT_EMBEDDING_DIM, DEFAULT_FUSED_DIM, DEFAULT_THRESHOLD};
pub use engine::{content_len, ForwardTrace, Mode};
pub use ops::{
    classify, decide, embed_sequence, extract_sentence_feature, fuse_features, lstm_step, predict_one, rnn_forward,
    sentence_features, Direction, EmbeddedSequence, GateCache,
};
pub use params::{LstmLayerParams, ModelParams, TensorKind};
