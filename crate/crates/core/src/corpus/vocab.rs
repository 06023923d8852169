use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_VOCAB_CAP: usize = 10_000;
pub const DEFAULT_MIN_FREQ: usize = 1;

/// Word ↔ id map. Ids 0 and 1 are reserved for padding and unknown words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
}

impl Vocabulary {
    /// Ranks words by frequency (ties lexicographic) and keeps those with at
    /// least `min_freq` occurrences, up to `max_size` ids including the two
    /// reserved ones.
    pub fn build<'a, I, S>(streams: I, max_size: usize, min_freq: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if max_size < 3 {
            return Err(Error::usage(format!(
                "vocabulary cap {max_size} leaves no room for words"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for stream in streams {
            for w in stream {
                *counts.entry(w.as_ref()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::usage("cannot build a vocabulary from an empty stream"));
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(w, c)| c >= min_freq.max(1) && w != PAD_TOKEN && w != UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - 2);
        Ok(Self::from_words(ranked.into_iter().map(|(w, _)| w.to_string())))
    }

    /// Vocabulary with the reserved ids followed by `words` in order.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut id_to_word = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        id_to_word.extend(words);
        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { word_to_id, id_to_word }
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.len() <= 2
    }

    pub fn id(&self, word: &str) -> u32 {
        self.word_to_id.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_to_id.contains_key(word)
    }

    /// The word behind an id; `None` for the reserved ids and out-of-range ids.
    pub fn word(&self, id: u32) -> Option<&str> {
        if id == PAD_ID || id == UNK_ID {
            return None;
        }
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Non-reserved words in id order.
    pub fn words(&self) -> &[String] {
        &self.id_to_word[2..]
    }
}
