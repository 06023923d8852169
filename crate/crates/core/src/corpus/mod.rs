//! Tokenization, vocabularies, labeled datasets, splits and batching.

mod batch;
mod dataset;
mod manifest;
mod split;
mod tokenize;
mod vocab;

pub use batch::{batches, Batch, DEFAULT_BATCH_SIZE};
pub use dataset::{
    prepare, LabeledCorpus, PrepareOptions, Sample, Task, TextCorpus, TextSample, MAX_BPW, MAX_SENTENCE_LEN,
};
pub use manifest::{load_tsteg_layout, IngestReport, Manifest, ManifestRule};
pub use split::{stratified_split, Split, SplitRatios};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, DEFAULT_MIN_FREQ, DEFAULT_VOCAB_CAP, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
