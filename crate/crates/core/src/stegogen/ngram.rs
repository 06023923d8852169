use std::collections::HashMap;

use crate::corpus::tokenize;
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";

pub(crate) const START: u32 = 0;
pub(crate) const END: u32 = 1;

/// Counts following one context. `entries` is sorted by count descending,
/// then by word.
#[derive(Clone, Debug)]
struct ContextTable {
    total: u64,
    entries: Vec<(u32, u64)>,
}

/// Word n-gram counts of every order up to `order`, with sentence start and
/// end markers.
///
/// Word ids follow lexicographic order of the words, so comparing ids
/// compares words. Ids 0 and 1 are the start and end markers.
#[derive(Clone, Debug)]
pub struct NgramLm {
    order: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    /// `levels[k]` maps contexts of length `k` to their tables.
    levels: Vec<HashMap<Vec<u32>, ContextTable>>,
}

/// Counts n-grams over the tokenized lines. Lines that tokenize to nothing
/// are skipped.
pub fn train_lm<I, S>(lines: I, order: usize) -> Result<NgramLm>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if order == 0 {
        return Err(Error::usage("n-gram order must be at least 1"));
    }
    let sentences: Vec<Vec<String>> = lines
        .into_iter()
        .map(|l| tokenize(l.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::usage("language model corpus has no nonempty lines"));
    }
    let mut vocab: Vec<&str> = sentences.iter().flatten().map(String::as_str).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let mut words = vec![START_TOKEN.to_string(), END_TOKEN.to_string()];
    words.extend(vocab.iter().map(|w| w.to_string()));
    let index: HashMap<String, u32> = words
        .iter()
        .enumerate()
        .skip(2)
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();

    let mut raw: Vec<HashMap<Vec<u32>, HashMap<u32, u64>>> = vec![HashMap::new(); order];
    for s in &sentences {
        let mut padded = vec![START; order - 1];
        padded.extend(s.iter().map(|w| index[w]));
        padded.push(END);
        for i in order - 1..padded.len() {
            for (k, level) in raw.iter_mut().enumerate() {
                *level
                    .entry(padded[i - k..i].to_vec())
                    .or_default()
                    .entry(padded[i])
                    .or_default() += 1;
            }
        }
    }
    let levels = raw
        .into_iter()
        .map(|level| {
            level
                .into_iter()
                .map(|(ctx, counts)| {
                    let total = counts.values().sum();
                    let mut entries: Vec<(u32, u64)> = counts.into_iter().collect();
                    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                    (ctx, ContextTable { total, entries })
                })
                .collect()
        })
        .collect();
    Ok(NgramLm {
        order,
        words,
        index,
        levels,
    })
}

impl NgramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Distinct words seen in training, markers excluded.
    pub fn num_words(&self) -> usize {
        self.words.len() - 2
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    fn ids(&self, context: &[&str]) -> Option<Vec<u32>> {
        context
            .iter()
            .map(|&w| match w {
                START_TOKEN => Some(START),
                END_TOKEN => Some(END),
                w => self.id(w),
            })
            .collect()
    }

    /// Raw count of `word` after `context` (markers allowed). The context
    /// length must be below the order.
    pub fn count(&self, context: &[&str], word: &str) -> u64 {
        let (Some(ctx), Some(w)) = (self.ids(context), self.ids(&[word])) else {
            return 0;
        };
        self.levels
            .get(ctx.len())
            .and_then(|l| l.get(&ctx))
            .and_then(|t| t.entries.iter().find(|e| e.0 == w[0]))
            .map_or(0, |e| e.1)
    }

    /// Total count of `context`, summed over every following word.
    pub fn context_count(&self, context: &[&str]) -> u64 {
        self.ids(context)
            .and_then(|ctx| self.levels.get(ctx.len()).and_then(|l| l.get(&ctx)))
            .map_or(0, |t| t.total)
    }

    /// Maximum-likelihood `P(word | context)` at the exact context length.
    pub fn probability(&self, context: &[&str], word: &str) -> f64 {
        match self.context_count(context) {
            0 => 0.0,
            total => self.count(context, word) as f64 / total as f64,
        }
    }

    /// Tables from the longest observed suffix of `history` down to the
    /// unigram table.
    fn backoff<'a>(&'a self, history: &'a [u32]) -> impl Iterator<Item = &'a ContextTable> + 'a {
        (0..self.order).rev().filter_map(move |k| {
            let start = history.len().saturating_sub(k);
            let ctx = &history[start..];
            if ctx.len() < k {
                return None;
            }
            self.levels[k].get(ctx)
        })
    }

    /// The `n` best next words after `history`, ranked by count within the
    /// longest observed context, then filled from shorter contexts and
    /// finally from the unigram ranking. The end marker is never a
    /// candidate.
    pub(crate) fn ranked_candidates(&self, history: &[u32], n: usize) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::with_capacity(n);
        for table in self.backoff(history) {
            for &(w, _) in &table.entries {
                if out.len() == n {
                    return out;
                }
                if w != END && !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Candidates and counts from the longest observed context that offers
    /// any word besides the end marker.
    pub(crate) fn sampling_table(&self, history: &[u32]) -> Vec<(u32, u64)> {
        self.backoff(history)
            .map(|t| t.entries.iter().copied().filter(|&(w, _)| w != END).collect::<Vec<_>>())
            .find(|e| !e.is_empty())
            .unwrap_or_default()
    }

    pub(crate) fn start_history(&self) -> Vec<u32> {
        vec![START; self.order - 1]
    }

    /// Add-one smoothed `ln P(word | history)` at the longest observed
    /// context.
    pub(crate) fn smoothed_log_prob(&self, history: &[u32], word: u32) -> f64 {
        let table = self.backoff(history).next().expect("unigram table always exists");
        let count = table.entries.iter().find(|e| e.0 == word).map_or(0, |e| e.1);
        let outcomes = (self.words.len() - 1) as f64;
        ((count as f64 + 1.0) / (table.total as f64 + outcomes)).ln()
    }

    /// Mean per-word add-one smoothed log-probability of a sentence.
    /// Unknown words count as unseen.
    pub fn mean_log_prob<S: AsRef<str>>(&self, sentence: &[S]) -> f64 {
        if sentence.is_empty() {
            return 0.0;
        }
        let mut history = self.start_history();
        let mut total = 0.0;
        for w in sentence {
            let id = self.id(w.as_ref()).unwrap_or(u32::MAX);
            total += self.smoothed_log_prob(&history, id);
            advance(&mut history, id);
        }
        total / sentence.len() as f64
    }
}

/// Slides the history window by one word.
pub(crate) fn advance(history: &mut [u32], word: u32) {
    let n = history.len();
    if n > 0 {
        history.copy_within(1.., 0);
        history[n - 1] = word;
    }
}
