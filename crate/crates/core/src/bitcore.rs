//! Bit-packed bipolar vectors and the exact XNOR+popcount reference.
//!
//! `+1` is stored as a set bit and `-1` as a cleared bit. Bit index 0 is the
//! lowest-order bit of a word and maps to the leftmost array column; every
//! file format and array mapping in this crate uses the same convention.

use crate::error::{Error, Result};

/// Number of columns in one array row, and the width of a full word.
pub const WORD_BITS: u32 = 64;

/// Up to 64 packed bits with an explicit valid width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitWord {
    bits: u64,
    width: u32,
}

#[inline]
fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > WORD_BITS {
        return Err(Error::InvalidWidth(width));
    }
    Ok(())
}

impl BitWord {
    /// Rejects bits set beyond `width`.
    pub fn new(bits: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        if bits & !mask(width) != 0 {
            return Err(Error::BitsBeyondWidth { bits, width });
        }
        Ok(Self { bits, width })
    }

    /// Like [`BitWord::new`] but silently drops bits beyond `width`.
    pub fn truncate(bits: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            bits: bits & mask(width),
            width,
        })
    }

    pub fn full(bits: u64) -> Self {
        Self { bits, width: 64 }
    }

    pub fn zeros(width: u32) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn ones(width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            bits: mask(width),
            width,
        })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.width && (self.bits >> i) & 1 == 1
    }

    fn same_width(&self, other: &BitWord) -> Result<()> {
        if self.width != other.width {
            return Err(Error::WidthMismatch {
                left: self.width as usize,
                right: other.width as usize,
            });
        }
        Ok(())
    }

    pub fn not(&self) -> BitWord {
        BitWord {
            bits: !self.bits & mask(self.width),
            width: self.width,
        }
    }

    pub fn xnor(&self, other: &BitWord) -> Result<BitWord> {
        self.same_width(other)?;
        Ok(BitWord {
            bits: !(self.bits ^ other.bits) & mask(self.width),
            width: self.width,
        })
    }

    pub fn xor(&self, other: &BitWord) -> Result<BitWord> {
        self.same_width(other)?;
        Ok(BitWord {
            bits: self.bits ^ other.bits,
            width: self.width,
        })
    }

    pub fn and(&self, other: &BitWord) -> Result<BitWord> {
        self.same_width(other)?;
        Ok(BitWord {
            bits: self.bits & other.bits,
            width: self.width,
        })
    }

    pub fn or(&self, other: &BitWord) -> Result<BitWord> {
        self.same_width(other)?;
        Ok(BitWord {
            bits: self.bits | other.bits,
            width: self.width,
        })
    }

    pub fn nor(&self, other: &BitWord) -> Result<BitWord> {
        Ok(self.or(other)?.not())
    }

    pub fn popcount(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Splits into the low and high halves (columns `0..w/2` and `w/2..w`).
    pub fn split_halves(&self) -> Result<(BitWord, BitWord)> {
        if !self.width.is_multiple_of(2) {
            return Err(Error::InvalidWidth(self.width));
        }
        let half = self.width / 2;
        Ok((
            BitWord::truncate(self.bits, half)?,
            BitWord::truncate(self.bits >> half, half)?,
        ))
    }
}

/// A bipolar vector of arbitrary length, packed into 64-bit words with a
/// narrower trailing word when the length is not a multiple of 64.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryVector {
    words: Vec<BitWord>,
    len: usize,
}

impl BinaryVector {
    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Empty("binary vector"));
        }
        let words = bits
            .chunks(WORD_BITS as usize)
            .map(|chunk| {
                let packed = chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
                BitWord {
                    bits: packed,
                    width: chunk.len() as u32,
                }
            })
            .collect();
        Ok(Self {
            words,
            len: bits.len(),
        })
    }

    /// Builds from raw little-endian words; bits past `len` are dropped.
    pub fn from_raw_words(raw: &[u64], len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("binary vector"));
        }
        let needed = len.div_ceil(WORD_BITS as usize);
        if raw.len() < needed {
            return Err(Error::WidthMismatch {
                left: raw.len() * WORD_BITS as usize,
                right: len,
            });
        }
        let words = (0..needed)
            .map(|w| {
                let width = (len - w * WORD_BITS as usize).min(WORD_BITS as usize) as u32;
                BitWord::truncate(raw[w], width)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[BitWord] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64].bit((i % 64) as u32)
    }

    pub fn not(&self) -> BinaryVector {
        BinaryVector {
            words: self.words.iter().map(BitWord::not).collect(),
            len: self.len,
        }
    }

    pub fn unpack_bipolar(&self) -> Vec<i8> {
        (0..self.len)
            .map(|i| if self.bit(i) { 1 } else { -1 })
            .collect()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// Sub-vector of bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<BinaryVector> {
        if start >= end || end > self.len {
            return Err(Error::OutOfRange {
                value: end as i64,
                max: self.len as i64,
            });
        }
        let bits: Vec<bool> = (start..end).map(|i| self.bit(i)).collect();
        BinaryVector::from_bools(&bits)
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(BitWord::popcount).sum()
    }
}

/// Packs a `±1` sequence; `+1` becomes a set bit.
pub fn pack_bipolar<T>(values: &[T]) -> Result<BinaryVector>
where
    T: Copy + Into<i64>,
{
    if values.is_empty() {
        return Err(Error::Empty("bipolar sequence"));
    }
    let bits = values
        .iter()
        .map(|&v| match v.into() {
            1 => Ok(true),
            -1 => Ok(false),
            other => Err(Error::NotBipolar(other)),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryVector::from_bools(&bits)
}

pub fn xnor(a: &BitWord, b: &BitWord) -> Result<BitWord> {
    a.xnor(b)
}

pub fn popcount(w: &BitWord) -> u32 {
    w.popcount()
}

fn same_len(a: &BinaryVector, b: &BinaryVector) -> Result<()> {
    if a.len != b.len {
        return Err(Error::WidthMismatch {
            left: a.len,
            right: b.len,
        });
    }
    Ok(())
}

/// Reference XNOR+popcount: every engine is checked against this.
pub fn xnor_popcount_oracle(a: &BinaryVector, b: &BinaryVector) -> Result<u32> {
    same_len(a, b)?;
    a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| x.xnor(y).map(|w| w.popcount()))
        .sum()
}

/// `±1` dot product via `2 * popcount(a XNOR b) - len`.
pub fn bipolar_dot(a: &BinaryVector, b: &BinaryVector) -> Result<i64> {
    let matches = xnor_popcount_oracle(a, b)? as i64;
    Ok(2 * matches - a.len as i64)
}
