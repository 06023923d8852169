use super::dataset::LabeledCorpus;
use super::vocab::PAD_ID;
use crate::numerics::Rng;

pub const DEFAULT_BATCH_SIZE: usize = 128;

/// Right-padded id matrix for a group of samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// Row-major `len() × max_len`.
    pub ids: Vec<u32>,
    pub max_len: usize,
    pub valid_len: Vec<usize>,
    pub labels: Vec<usize>,
    /// Corpus index of every row.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn from_indices(corpus: &LabeledCorpus, indices: &[usize]) -> Batch {
        let max_len = indices.iter().map(|&i| corpus.samples[i].ids.len()).max().unwrap_or(0);
        let mut ids = vec![PAD_ID; indices.len() * max_len];
        let mut valid_len = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            let s = &corpus.samples[i];
            ids[row * max_len..row * max_len + s.ids.len()].copy_from_slice(&s.ids);
            valid_len.push(s.ids.len());
            labels.push(s.label);
        }
        Batch {
            ids,
            max_len,
            valid_len,
            labels,
            indices: indices.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.max_len..(r + 1) * self.max_len]
    }

    /// Padded rows, ready for the network's forward pass.
    pub fn rows(&self) -> Vec<&[u32]> {
        (0..self.len()).map(|r| self.row(r)).collect()
    }
}

/// Cuts `indices` into batches, shuffled with `shuffle_seed` when given.
/// The final partial batch is kept.
pub fn batches(corpus: &LabeledCorpus, indices: &[usize], batch_size: usize, shuffle_seed: Option<u64>) -> Vec<Batch> {
    let mut order = indices.to_vec();
    if let Some(seed) = shuffle_seed {
        Rng::new(seed).shuffle(&mut order);
    }
    order
        .chunks(batch_size.max(1))
        .map(|chunk| Batch::from_indices(corpus, chunk))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sample, Split, Task};

    fn corpus(n: usize) -> LabeledCorpus {
        LabeledCorpus {
            task: Task::Binary { bpw: 1 },
            samples: (0..n)
                .map(|i| Sample {
                    ids: vec![2 + (i % 7) as u32; 1 + i % 5],
                    label: i % 2,
                    bpw: (i % 2) as u8,
                    source: String::new(),
                })
                .collect(),
            splits: vec![Split::Train; n],
        }
    }

    #[test]
    fn sizes_and_padding() {
        let c = corpus(130);
        let idx: Vec<usize> = (0..130).collect();
        let bs = batches(&c, &idx, 128, Some(3));
        assert_eq!(bs.iter().map(Batch::len).collect::<Vec<_>>(), vec![128, 2]);
        for b in &bs {
            for r in 0..b.len() {
                let row = b.row(r);
                assert!(b.valid_len[r] <= b.max_len);
                assert!(row[b.valid_len[r]..].iter().all(|&t| t == PAD_ID));
                assert_eq!(&row[..b.valid_len[r]], c.samples[b.indices[r]].ids.as_slice());
            }
        }
    }

    #[test]
    fn shuffle_is_seeded_and_covers_split_once() {
        let c = corpus(50);
        let idx: Vec<usize> = (0..50).collect();
        let a = batches(&c, &idx, 8, Some(9));
        assert_eq!(a, batches(&c, &idx, 8, Some(9)));
        let mut seen: Vec<usize> = a.iter().flat_map(|b| b.indices.clone()).collect();
        assert_ne!(seen, idx);
        seen.sort();
        assert_eq!(seen, idx);
    }
}
