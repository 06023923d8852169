#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle;

use std::path::PathBuf;
use std::sync::OnceLock;

use stegodetect::stegogen::{train_lm, NgramLm, DEFAULT_ORDER};

/// Root of the repository checkout.
pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Trigram model over the bundled public-domain speech corpus.
pub fn speech_lm() -> &'static NgramLm {
    static LM: OnceLock<NgramLm> = OnceLock::new();
    LM.get_or_init(|| {
        let text = std::fs::read_to_string(repo_root().join("data/sotu-sentences.txt")).expect("bundled corpus");
        train_lm(text.lines(), DEFAULT_ORDER).expect("language model")
    })
}
