use crate::numerics::Rng;

/// A bit sequence with a read cursor. Reads past the end yield zeros and
/// mark the stream as padded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
    cursor: usize,
    padded: bool,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitStream {
            bits,
            cursor: 0,
            padded: false,
        }
    }

    /// Most significant bit of each byte first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::from_bits(
            bytes
                .iter()
                .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
                .collect(),
        )
    }

    /// Parses a string of `0` and `1` characters; anything else is rejected.
    pub fn parse(text: &str) -> Option<Self> {
        text.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::from_bits)
    }

    pub fn random(len: usize, rng: &mut Rng) -> Self {
        Self::from_bits((0..len).map(|_| rng.bit()).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    /// True once any read ran past the end.
    pub fn padded(&self) -> bool {
        self.padded
    }

    /// Reads `n ≤ 32` bits as a big-endian integer.
    pub fn read(&mut self, n: usize) -> u32 {
        debug_assert!(n <= 32);
        let mut value = 0u32;
        for _ in 0..n {
            let bit = match self.bits.get(self.cursor) {
                Some(&b) => {
                    self.cursor += 1;
                    b
                }
                None => {
                    self.padded = true;
                    false
                }
            };
            value = (value << 1) | u32::from(bit);
        }
        value
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn push(&mut self, value: u32, n: usize) {
        for i in (0..n).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitStream) {
        self.bits.extend_from_slice(&other.bits);
    }
}

impl std::fmt::Display for BitStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
