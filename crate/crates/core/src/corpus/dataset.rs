use std::collections::BTreeMap;
use std::fmt;

use super::split::{stratified_split, Split, SplitRatios};
use super::tokenize::tokenize;
use super::vocab::{Vocabulary, DEFAULT_MIN_FREQ, DEFAULT_VOCAB_CAP};
use crate::error::{Error, Result};

/// Longest sentence kept, in tokens; longer ones are truncated.
pub const MAX_SENTENCE_LEN: usize = 64;

/// Highest embedding rate handled.
pub const MAX_BPW: u8 = 5;

/// A tokenized sentence with its embedding rate (0 = cover).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextSample {
    pub tokens: Vec<String>,
    pub bpw: u8,
    pub source: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TextCorpus {
    pub samples: Vec<TextSample>,
}

impl TextCorpus {
    /// Tokenizes and appends a line; returns false for lines with no tokens.
    pub fn push_line(&mut self, line: &str, bpw: u8, source: &str) -> bool {
        let mut tokens = tokenize(line);
        if tokens.is_empty() {
            return false;
        }
        tokens.truncate(MAX_SENTENCE_LEN);
        self.samples.push(TextSample {
            tokens,
            bpw,
            source: source.to_string(),
        });
        true
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per bpw.
    pub fn histogram(&self) -> BTreeMap<u8, usize> {
        let mut h = BTreeMap::new();
        for s in &self.samples {
            *h.entry(s.bpw).or_default() += 1;
        }
        h
    }
}

/// What a detector is asked to predict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Cover (bpw 0) against stego at one rate.
    Binary { bpw: u8 },
    /// Six-way embedding-rate estimation, bpw 0..=5.
    Rate,
}

impl Task {
    pub fn num_classes(self) -> usize {
        match self {
            Task::Binary { .. } => 2,
            Task::Rate => MAX_BPW as usize + 1,
        }
    }

    /// Class of a sample with the given bpw, or `None` if the task ignores it.
    pub fn label_for(self, bpw: u8) -> Option<usize> {
        match self {
            Task::Binary { bpw: target } => match bpw {
                0 => Some(0),
                b if b == target => Some(1),
                _ => None,
            },
            Task::Rate if bpw <= MAX_BPW => Some(bpw as usize),
            Task::Rate => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Binary { bpw } => write!(f, "binary (cover vs bpw {bpw})"),
            Task::Rate => write!(f, "rate (bpw 0-5)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub ids: Vec<u32>,
    pub label: usize,
    pub bpw: u8,
    pub source: String,
}

/// Encoded sentences with labels and a split assignment per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCorpus {
    pub task: Task,
    pub samples: Vec<Sample>,
    pub splits: Vec<Split>,
}

impl LabeledCorpus {
    /// Encodes the samples `task` cares about. Every sample starts in the
    /// training split.
    pub fn encode(text: &TextCorpus, vocab: &Vocabulary, task: Task) -> Result<Self> {
        let samples: Vec<Sample> = text
            .samples
            .iter()
            .filter_map(|s| {
                task.label_for(s.bpw).map(|label| Sample {
                    ids: vocab.encode(&s.tokens),
                    label,
                    bpw: s.bpw,
                    source: s.source.clone(),
                })
            })
            .collect();
        if samples.is_empty() {
            return Err(Error::data(format!("no samples for task {task}")));
        }
        if let Some(i) = samples.iter().position(|s| s.ids.is_empty()) {
            return Err(Error::data(format!("sample {i} has no tokens")));
        }
        let splits = vec![Split::Train; samples.len()];
        Ok(LabeledCorpus { task, samples, splits })
    }

    pub fn num_classes(&self) -> usize {
        self.task.num_classes()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn assign_splits(&mut self, ratios: SplitRatios, seed: u64) -> Result<()> {
        self.splits = stratified_split(&self.labels(), self.num_classes(), ratios, seed)?;
        Ok(())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Options for turning raw labeled text into a training-ready corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareOptions {
    pub ratios: SplitRatios,
    pub split_seed: u64,
    pub vocab_cap: usize,
    pub min_freq: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            ratios: SplitRatios::default(),
            split_seed: 0,
            vocab_cap: DEFAULT_VOCAB_CAP,
            min_freq: DEFAULT_MIN_FREQ,
        }
    }
}

/// Splits the task's samples, builds the vocabulary on the training split
/// only, and encodes everything with it.
pub fn prepare(text: &TextCorpus, task: Task, opts: &PrepareOptions) -> Result<(Vocabulary, LabeledCorpus)> {
    let selected: Vec<&TextSample> = text
        .samples
        .iter()
        .filter(|s| task.label_for(s.bpw).is_some())
        .collect();
    if selected.is_empty() {
        return Err(Error::data(format!("no samples for task {task}")));
    }
    let labels: Vec<usize> = selected.iter().map(|s| task.label_for(s.bpw).unwrap()).collect();
    let splits = stratified_split(&labels, task.num_classes(), opts.ratios, opts.split_seed)?;
    let train_tokens = selected
        .iter()
        .zip(&splits)
        .filter(|(_, &sp)| sp == Split::Train)
        .map(|(s, _)| s.tokens.as_slice());
    let vocab = Vocabulary::build(train_tokens, opts.vocab_cap, opts.min_freq)?;
    let subset = TextCorpus {
        samples: selected.into_iter().cloned().collect(),
    };
    let mut corpus = LabeledCorpus::encode(&subset, &vocab, task)?;
    corpus.splits = splits;
    Ok((vocab, corpus))
}
