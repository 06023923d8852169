use super::bits::BitStream;
use super::ngram::{advance, NgramLm};
use crate::corpus::MAX_BPW;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Sharpening applied to the smoothed counts when sampling cover text.
pub const COVER_TEMPERATURE: f64 = 0.2;

fn check_bpw(lm: &NgramLm, bpw: u8) -> Result<()> {
    if bpw > MAX_BPW {
        return Err(Error::usage(format!("bpw {bpw} exceeds {MAX_BPW}")));
    }
    if bpw > 0 && lm.num_words() < 1 << bpw {
        return Err(Error::usage(format!(
            "language model knows {} words, fewer than the {} candidates bpw {bpw} needs",
            lm.num_words(),
            1 << bpw
        )));
    }
    Ok(())
}

fn sample_cover(lm: &NgramLm, history: &[u32], rng: &mut Rng) -> u32 {
    let table = lm.sampling_table(history);
    let weights: Vec<f64> = table
        .iter()
        .map(|&(_, c)| (c as f64 + 1.0).powf(1.0 / COVER_TEMPERATURE))
        .collect();
    table[rng.weighted_index(&weights)].0
}

/// Generates `max_len` words.
///
/// With `bpw = 0` each word is sampled from the add-one smoothed counts of
/// the longest observed context, sharpened by [`COVER_TEMPERATURE`]. With
/// `bpw ≥ 1` each word is the entry of the ranked top-`2^bpw` candidate pool
/// indexed by the next `bpw` bits of `bits`, so exactly `bpw × max_len` bits
/// are consumed. The end marker is never emitted.
pub fn generate(lm: &NgramLm, bpw: u8, bits: &mut BitStream, max_len: usize, rng: &mut Rng) -> Result<Vec<String>> {
    check_bpw(lm, bpw)?;
    if max_len == 0 {
        return Err(Error::usage("max_len must be at least 1"));
    }
    let pool_size = 1usize << bpw;
    let mut history = lm.start_history();
    let mut out = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let word = if bpw == 0 {
            sample_cover(lm, &history, rng)
        } else {
            let pool = lm.ranked_candidates(&history, pool_size);
            pool[bits.read(bpw as usize) as usize]
        };
        out.push(lm.word(word).to_string());
        advance(&mut history, word);
    }
    Ok(out)
}

/// Recovers the payload of a sentence produced by [`generate`] at `bpw`.
pub fn decode<S: AsRef<str>>(lm: &NgramLm, sentence: &[S], bpw: u8) -> Result<BitStream> {
    check_bpw(lm, bpw)?;
    let mut bits = BitStream::new();
    if bpw == 0 {
        return Ok(bits);
    }
    let pool_size = 1usize << bpw;
    let mut history = lm.start_history();
    for (position, w) in sentence.iter().enumerate() {
        let w = w.as_ref();
        let id = lm.id(w).ok_or_else(|| Error::Decode {
            position,
            reason: format!("{w:?} is not in the language model"),
        })?;
        let pool = lm.ranked_candidates(&history, pool_size);
        let index = pool.iter().position(|&c| c == id).ok_or_else(|| Error::Decode {
            position,
            reason: format!("{w:?} is not among the top {pool_size} candidates"),
        })?;
        bits.push(index as u32, bpw as usize);
        advance(&mut history, id);
    }
    Ok(bits)
}
