//! Lowering of one output element onto 64-bit row operations.
//!
//! A receptive field of `N = k * k * I` bits is ordered `((ky * k + kx) * I
//! + c)` and split into `ceil(N / 64)` tiles. The trailing partial tile is
//! zero-padded on both operands, so each padding column XNORs to 1; the
//! constant `64 * tiles - N` is subtracted from the summed popcounts.

use crate::bitcore::{BinaryVector, BitWord, WORD_BITS};
use crate::bnn::feature::{BinaryMap, BitSink};
use crate::bnn::network::LayerSpec;
use crate::error::{Error, Result};

/// Tile count, live columns per tile and padding correction for `n` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileLayout {
    pub kernel_size: usize,
    pub live_bits: Vec<u32>,
    pub correction: u32,
}

impl TileLayout {
    pub fn new(kernel_size: usize) -> Result<Self> {
        if kernel_size == 0 {
            return Err(Error::Empty("kernel"));
        }
        let w = WORD_BITS as usize;
        let tiles = kernel_size.div_ceil(w);
        let live_bits = (0..tiles)
            .map(|t| (kernel_size - t * w).min(w) as u32)
            .collect();
        Ok(Self {
            kernel_size,
            live_bits,
            correction: (tiles * w - kernel_size) as u32,
        })
    }

    pub fn tiles(&self) -> usize {
        self.live_bits.len()
    }

    /// Half-row conversions per output element under dual readout:
    /// `ceil(N / 32)`.
    pub fn half_counts(&self) -> usize {
        self.kernel_size.div_ceil(WORD_BITS as usize / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePlan {
    pub layout: TileLayout,
    pub activation: Vec<BitWord>,
    pub kernel: Vec<BitWord>,
}

impl TilePlan {
    /// Summed tile popcounts with the padding correction removed.
    pub fn corrected(&self, tile_popcounts: &[u32]) -> Result<u32> {
        if tile_popcounts.len() != self.layout.tiles() {
            return Err(Error::LayerMismatch(format!(
                "{} partial popcounts for {} tiles",
                tile_popcounts.len(),
                self.layout.tiles()
            )));
        }
        let sum: u32 = tile_popcounts.iter().sum();
        sum.checked_sub(self.layout.correction)
            .ok_or(Error::OutOfRange {
                value: sum as i64,
                max: self.layout.kernel_size as i64,
            })
    }
}

/// Splits a vector into zero-padded 64-bit tiles.
pub fn tile_vector(v: &BinaryVector) -> Vec<BitWord> {
    v.words().iter().map(|w| BitWord::full(w.bits())).collect()
}

pub fn lower_output_element(
    layer: &LayerSpec,
    receptive_field: &BinaryVector,
    kernel: &BinaryVector,
) -> Result<TilePlan> {
    let n = layer.kernel_size();
    if receptive_field.len() != n || kernel.len() != n {
        return Err(Error::WidthMismatch {
            left: receptive_field.len(),
            right: kernel.len(),
        });
    }
    Ok(TilePlan {
        layout: TileLayout::new(n)?,
        activation: tile_vector(receptive_field),
        kernel: tile_vector(kernel),
    })
}

/// Receptive field of output pixel `(oy, ox)` as padded tiles. Out-of-bounds
/// taps read as -1 (bit 0).
pub fn receptive_field_tiles(
    input: &BinaryMap,
    layer: &LayerSpec,
    oy: u32,
    ox: u32,
) -> Vec<BitWord> {
    let s = input.shape();
    let c = s.channels as usize;
    let mut sink = BitSink::with_capacity(layer.kernel_size());
    for ky in 0..layer.k {
        for kx in 0..layer.k {
            let iy = (oy * layer.stride + ky) as i64 - layer.padding as i64;
            let ix = (ox * layer.stride + kx) as i64 - layer.padding as i64;
            if iy < 0 || ix < 0 || iy >= s.height as i64 || ix >= s.width as i64 {
                sink.push_zeros(c);
            } else {
                input.copy_bits(s.index(0, iy as u32, ix as u32), c, &mut sink);
            }
        }
    }
    debug_assert_eq!(sink.len(), layer.kernel_size());
    sink.into_tiles()
}

/// Receptive field of `(oy, ox)` as an unpadded vector.
pub fn receptive_field(input: &BinaryMap, layer: &LayerSpec, oy: u32, ox: u32) -> BinaryVector {
    let tiles = receptive_field_tiles(input, layer, oy, ox);
    let raw: Vec<u64> = tiles.iter().map(|w| w.bits()).collect();
    BinaryVector::from_raw_words(&raw, layer.kernel_size()).expect("tiles carry no stray bits")
}
