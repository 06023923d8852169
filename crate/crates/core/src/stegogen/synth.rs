use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::bits::BitStream;
use super::coder::generate;
use super::ngram::NgramLm;
use crate::corpus::{Manifest, TextCorpus, TextSample, MAX_BPW};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Shortest synthesized sentence, in words.
pub const SYNTH_MIN_LEN: usize = 8;
/// Longest synthesized sentence, in words.
pub const SYNTH_MAX_LEN: usize = 40;

/// Format tag written into generated manifests.
pub const SYNTH_FORMAT: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSentence {
    pub tokens: Vec<String>,
    pub bpw: u8,
    /// Bits embedded in the sentence; empty for cover text.
    pub payload: BitStream,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub sentences: Vec<SyntheticSentence>,
}

impl SyntheticCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn histogram(&self) -> BTreeMap<u8, usize> {
        let mut h = BTreeMap::new();
        for s in &self.sentences {
            *h.entry(s.bpw).or_default() += 1;
        }
        h
    }

    pub fn by_bpw(&self, bpw: u8) -> impl Iterator<Item = &SyntheticSentence> {
        self.sentences.iter().filter(move |s| s.bpw == bpw)
    }

    pub fn to_text_corpus(&self) -> TextCorpus {
        TextCorpus {
            samples: self
                .sentences
                .iter()
                .map(|s| TextSample {
                    tokens: s.tokens.clone(),
                    bpw: s.bpw,
                    source: format!("{SYNTH_FORMAT}:{}", file_name(s.bpw)),
                })
                .collect(),
        }
    }
}

/// File a class is written to: `cover.txt` or `bpw{n}.txt`.
pub fn file_name(bpw: u8) -> String {
    if bpw == 0 {
        "cover.txt".to_string()
    } else {
        format!("bpw{bpw}.txt")
    }
}

/// Generates `per_class` sentences at every rate in `bpw_set` (0 = cover).
///
/// Sentence `j` of rate `b` draws its length (uniform in
/// `SYNTH_MIN_LEN..=SYNTH_MAX_LEN`), its payload and any cover sampling
/// from its own substream of `seed`, so the corpus depends only on the
/// arguments.
pub fn synthesize_dataset(lm: &NgramLm, per_class: usize, bpw_set: &[u8], seed: u64) -> Result<SyntheticCorpus> {
    if per_class == 0 {
        return Err(Error::usage("per-class count must be at least 1"));
    }
    if bpw_set.is_empty() {
        return Err(Error::usage("no bpw classes requested"));
    }
    let mut seen = [false; MAX_BPW as usize + 1];
    for &b in bpw_set {
        if b > MAX_BPW {
            return Err(Error::usage(format!("bpw {b} exceeds {MAX_BPW}")));
        }
        if std::mem::replace(&mut seen[b as usize], true) {
            return Err(Error::usage(format!("bpw {b} requested twice")));
        }
    }
    let root = Rng::new(seed);
    let mut sentences = Vec::with_capacity(per_class * bpw_set.len());
    for &bpw in bpw_set {
        for j in 0..per_class {
            let mut rng = root.substream(((bpw as u64) << 32) | j as u64);
            let len = rng.range_inclusive(SYNTH_MIN_LEN, SYNTH_MAX_LEN);
            let payload = BitStream::random(bpw as usize * len, &mut rng);
            let tokens = generate(lm, bpw, &mut payload.clone(), len, &mut rng)?;
            sentences.push(SyntheticSentence { tokens, bpw, payload });
        }
    }
    Ok(SyntheticCorpus { sentences })
}

/// Writes one file per class plus `manifest.tsv` into `dir`, creating it if
/// needed. Returns the data files in bpw order.
pub fn write_dataset(corpus: &SyntheticCorpus, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("# glob\tformat\tbpw\n");
    let mut written = Vec::new();
    for bpw in corpus.histogram().into_keys() {
        let mut text = String::new();
        for s in corpus.by_bpw(bpw) {
            text.push_str(&s.tokens.join(" "));
            text.push('\n');
        }
        let path = dir.join(file_name(bpw));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("{}\t{SYNTH_FORMAT}\t{bpw}\n", file_name(bpw)));
        written.push(path);
    }
    Manifest::parse(&manifest)?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}

/// Name of the manifest [`write_dataset`] produces.
pub const MANIFEST_FILE: &str = "manifest.tsv";
