//! Feature maps. Elements are stored position-major with channels innermost
//! (see [`Shape::index`]), so a pixel's channel vector is contiguous and a
//! flattened map is the input vector of a fully connected layer.

use crate::bitcore::{BinaryVector, BitWord, WORD_BITS};
use crate::bnn::network::Shape;
use crate::error::{Error, Result};
use crate::tensor::{Tensor, TensorData};

/// Bit-packed ±1 map; bit 1 is +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    shape: Shape,
    words: Vec<u64>,
}

impl BinaryMap {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            words: vec![0; shape.len().div_ceil(WORD_BITS as usize)],
        }
    }

    /// From bits in storage order.
    pub fn from_bits(shape: Shape, bits: &[bool]) -> Result<Self> {
        if bits.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} bits for a {shape} map",
                bits.len()
            )));
        }
        let mut m = Self::zeros(shape);
        for (i, &b) in bits.iter().enumerate() {
            m.set_flat(i, b);
        }
        Ok(m)
    }

    pub fn from_vector(shape: Shape, v: &BinaryVector) -> Result<Self> {
        Self::from_bits(shape, &v.to_bools())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn get(&self, c: u32, y: u32, x: u32) -> bool {
        self.get_flat(self.shape.index(c, y, x))
    }

    pub fn set(&mut self, c: u32, y: u32, x: u32, v: bool) {
        self.set_flat(self.shape.index(c, y, x), v);
    }

    pub fn get_flat(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set_flat(&mut self, i: usize, v: bool) {
        let (w, b) = (i / 64, i % 64);
        if v {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.shape.len()).map(|i| self.get_flat(i)).collect()
    }

    /// The whole map as one vector in storage order.
    pub fn flatten(&self) -> BinaryVector {
        BinaryVector::from_raw_words(&self.words, self.shape.len())
            .expect("map words match its shape")
    }

    /// Number of 64-bit words spanned by one pixel's channel vector.
    pub fn channel_words(&self) -> usize {
        (self.shape.channels as usize).div_ceil(WORD_BITS as usize)
    }

    /// Bits `start..start + len` packed LSB-first.
    pub(crate) fn copy_bits(&self, start: usize, len: usize, out: &mut BitSink) {
        let mut i = start;
        let end = start + len;
        while i < end {
            let (w, b) = (i / 64, i % 64);
            let take = (64 - b).min(end - i);
            let chunk = self.words[w] >> b;
            out.push(chunk, take as u32);
            i += take;
        }
    }
}

/// Accumulates bits into 64-bit words.
pub(crate) struct BitSink {
    words: Vec<u64>,
    len: usize,
}

impl BitSink {
    pub(crate) fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    /// Appends the low `n` bits of `bits`.
    pub(crate) fn push(&mut self, bits: u64, n: u32) {
        if n == 0 {
            return;
        }
        let bits = if n == 64 { bits } else { bits & ((1 << n) - 1) };
        let off = (self.len % 64) as u32;
        if off == 0 {
            self.words.push(bits);
        } else {
            *self.words.last_mut().unwrap() |= bits << off;
            if off + n > 64 {
                self.words.push(bits >> (64 - off));
            }
        }
        self.len += n as usize;
    }

    pub(crate) fn push_zeros(&mut self, mut n: usize) {
        while n > 0 {
            let take = n.min(64);
            self.push(0, take as u32);
            n -= take;
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Words padded with zeros to full 64-bit tiles.
    pub(crate) fn into_tiles(self) -> Vec<BitWord> {
        self.words.into_iter().map(BitWord::full).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMap {
    shape: Shape,
    values: Vec<i32>,
}

impl IntMap {
    /// From values in storage order.
    pub fn new(shape: Shape, values: Vec<i32>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for a {shape} map",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    /// From values in channel-major `[C][H][W]` order.
    pub fn from_chw(shape: Shape, chw: &[i32]) -> Result<Self> {
        if chw.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for a {shape} map",
                chw.len()
            )));
        }
        let mut values = vec![0; shape.len()];
        let hw = shape.positions();
        for c in 0..shape.channels {
            for p in 0..hw {
                let (y, x) = (p as u32 / shape.width, p as u32 % shape.width);
                values[shape.index(c, y, x)] = chw[c as usize * hw + p];
            }
        }
        Ok(Self { shape, values })
    }

    pub fn to_chw(&self) -> Vec<i32> {
        let s = self.shape;
        let mut out = Vec::with_capacity(s.len());
        for c in 0..s.channels {
            for y in 0..s.height {
                for x in 0..s.width {
                    out.push(self.get(c, y, x));
                }
            }
        }
        out
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn get(&self, c: u32, y: u32, x: u32) -> i32 {
        self.values[self.shape.index(c, y, x)]
    }

    /// Sign binarization: `v > 0` maps to +1.
    pub fn binarize(&self) -> BinaryMap {
        let bits: Vec<bool> = self.values.iter().map(|&v| v > 0).collect();
        BinaryMap::from_bits(self.shape, &bits).expect("same shape")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureMap {
    Binary(BinaryMap),
    Int(IntMap),
}

impl FeatureMap {
    pub fn shape(&self) -> Shape {
        match self {
            FeatureMap::Binary(m) => m.shape(),
            FeatureMap::Int(m) => m.shape(),
        }
    }

    /// Binary view; integer maps are sign-binarized.
    pub fn to_binary(&self) -> BinaryMap {
        match self {
            FeatureMap::Binary(m) => m.clone(),
            FeatureMap::Int(m) => m.binarize(),
        }
    }

    /// Integer view; binary maps become ±1.
    pub fn to_int(&self) -> IntMap {
        match self {
            FeatureMap::Int(m) => m.clone(),
            FeatureMap::Binary(m) => {
                let v = m
                    .to_bits()
                    .iter()
                    .map(|&b| if b { 1 } else { -1 })
                    .collect();
                IntMap::new(m.shape(), v).expect("same shape")
            }
        }
    }

    /// Reads an image tensor of dims `[C, H, W]`: `i32` values, or binary
    /// with one row of `H * W` bits per channel.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let shape = match t.dims() {
            &[c, h, w] => Shape::new(c, h, w),
            d => {
                return Err(Error::Shape(format!(
                    "image tensor must be [C, H, W], got {d:?}"
                )))
            }
        };
        match t.data() {
            TensorData::Int(v) => Ok(FeatureMap::Int(IntMap::from_chw(shape, v)?)),
            TensorData::Binary(rows) => {
                let mut m = BinaryMap::zeros(shape);
                for (c, row) in rows.iter().enumerate() {
                    for p in 0..shape.positions() {
                        let (y, x) = (p as u32 / shape.width, p as u32 % shape.width);
                        m.set(c as u32, y, x, row.bit(p));
                    }
                }
                Ok(FeatureMap::Binary(m))
            }
        }
    }

    /// Inverse of [`FeatureMap::from_tensor`].
    pub fn to_tensor(&self) -> Tensor {
        let s = self.shape();
        let dims = vec![s.channels, s.height, s.width];
        match self {
            FeatureMap::Int(m) => Tensor::int(dims, m.to_chw()).expect("consistent dims"),
            FeatureMap::Binary(m) => {
                let rows = (0..s.channels)
                    .map(|c| {
                        let bits: Vec<bool> = (0..s.positions())
                            .map(|p| m.get(c, p as u32 / s.width, p as u32 % s.width))
                            .collect();
                        BinaryVector::from_bools(&bits).expect("non-empty")
                    })
                    .collect();
                Tensor::binary(dims, rows).expect("consistent dims")
            }
        }
    }
}
