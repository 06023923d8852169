//! Synthetic cover and stego text from an n-gram language model.
//!
//! Stego words are chosen by fixed-length block coding: at every step the
//! `2^bpw` most likely next words form a pool and the next `bpw` payload
//! bits, read big-endian, index into it.

mod bits;
mod coder;
mod ngram;
mod synth;

pub use bits::BitStream;
pub use coder::{decode, generate, COVER_TEMPERATURE};
pub use ngram::{train_lm, NgramLm, DEFAULT_ORDER, END_TOKEN, START_TOKEN};
pub use synth::{
    file_name, synthesize_dataset, write_dataset, SyntheticCorpus, SyntheticSentence, MANIFEST_FILE, SYNTH_FORMAT,
    SYNTH_MAX_LEN, SYNTH_MIN_LEN,
};
