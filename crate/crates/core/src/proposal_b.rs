//! Exact digital convolution: two wordlines enabled together, asymmetric
//! sense amplifiers resolving AND and NOR, and a bit-tree adder.
//!
//! With both rows on, each column's RBL/RBLB pair discharges as follows:
//!
//! | a k | RBL        | RBLB       | SA_NAND out (AND) | SA_NOR out (NOR) |
//! |-----|------------|------------|-------------------|------------------|
//! | 0 0 | precharged | discharged | 0                 | 1                |
//! | 0 1 | discharged | discharged | 0                 | 0                |
//! | 1 0 | discharged | discharged | 0                 | 0                |
//! | 1 1 | discharged | precharged | 1                 | 0                |
//!
//! XNOR is the OR of the two amplifier outputs.

use crate::bitcore::{BitWord, WORD_BITS};
use crate::error::{Error, Result};

/// Per-column bitline state pair (RBL, RBLB) after a dual-wordline read;
/// `true` means still precharged.
fn bitlines(a: bool, k: bool) -> (bool, bool) {
    match (a, k) {
        (false, false) => (true, false),
        (true, true) => (false, true),
        _ => (false, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaOutputs {
    pub and_bits: BitWord,
    pub nor_bits: BitWord,
    pub xnor_bits: BitWord,
}

/// Resolves both sense amplifiers column by column from the bitline table.
pub fn dual_rwl_sense(a: &BitWord, k: &BitWord) -> Result<SaOutputs> {
    if a.width() != k.width() {
        return Err(Error::WidthMismatch {
            left: a.width() as usize,
            right: k.width() as usize,
        });
    }
    let (mut and, mut nor) = (0u64, 0u64);
    for i in 0..a.width() {
        let (rbl, rblb) = bitlines(a.bit(i), k.bit(i));
        // SA_NAND resolves high only when RBLB holds; SA_NOR only when RBL holds.
        if rblb {
            and |= 1 << i;
        }
        if rbl {
            nor |= 1 << i;
        }
    }
    let and_bits = BitWord::new(and, a.width())?;
    let nor_bits = BitWord::new(nor, a.width())?;
    Ok(SaOutputs {
        and_bits,
        nor_bits,
        xnor_bits: and_bits.or(&nor_bits)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdderLayer {
    pub operands_in: u32,
    pub operand_bits_in: u32,
    pub operands_out: u32,
    pub operand_bits_out: u32,
}

/// Structural pairwise reduction tree. Layer `l` (1-based) adds pairs of
/// `l`-bit operands into `(l + 1)`-bit sums, so `N` inputs need `log2(N)`
/// layers and produce a `log2(N) + 1`-bit popcount.
///
/// A first layer of 3:2 full-adder compressors, as drawn in some adder-tree
/// layouts, would change the layer count but not the result. Layers only
/// feed latency bookkeeping, which uses a single critical-path constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderTree {
    input_width: u32,
    layers: Vec<AdderLayer>,
}

impl AdderTree {
    pub fn new(input_width: u32) -> Result<Self> {
        if !(2..=WORD_BITS).contains(&input_width) || !input_width.is_power_of_two() {
            return Err(Error::InvalidWidth(input_width));
        }
        let depth = input_width.trailing_zeros();
        let layers = (1..=depth)
            .map(|l| AdderLayer {
                operands_in: input_width >> (l - 1),
                operand_bits_in: l,
                operands_out: input_width >> l,
                operand_bits_out: l + 1,
            })
            .collect();
        Ok(Self {
            input_width,
            layers,
        })
    }

    pub fn input_width(&self) -> u32 {
        self.input_width
    }

    pub fn layers(&self) -> &[AdderLayer] {
        &self.layers
    }

    pub fn output_width(&self) -> u32 {
        self.layers.last().map_or(1, |l| l.operand_bits_out)
    }

    /// Sums the bits of `x` layer by layer.
    pub fn popcount(&self, x: &BitWord) -> Result<u32> {
        if x.width() != self.input_width {
            return Err(Error::WidthMismatch {
                left: x.width() as usize,
                right: self.input_width as usize,
            });
        }
        let mut operands = [0u32; WORD_BITS as usize];
        for (i, op) in operands.iter_mut().take(x.width() as usize).enumerate() {
            *op = x.bit(i as u32) as u32;
        }
        for layer in &self.layers {
            for j in 0..layer.operands_out as usize {
                let sum = operands[2 * j] + operands[2 * j + 1];
                debug_assert!(sum < 1 << layer.operand_bits_out);
                operands[j] = sum;
            }
        }
        Ok(operands[0])
    }
}

pub fn bit_tree_popcount(tree: &AdderTree, x: &BitWord) -> Result<u32> {
    tree.popcount(x)
}

/// The whole Proposal-B row operation; always exact.
pub fn convolve64_exact(tree: &AdderTree, a: &BitWord, k: &BitWord) -> Result<u32> {
    let sa = dual_rwl_sense(a, k)?;
    tree.popcount(&sa.xnor_bits)
}
