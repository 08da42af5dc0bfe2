//! `XRT1` tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"XRT1" | u32 rank | u32 dims[rank] | u8 dtype | payload
//! ```
//!
//! `dtype 0` is bit-packed binary. The tensor is viewed as `dims[0]` rows of
//! `dims[1] * ... * dims[rank-1]` bits (a rank-1 tensor is a single row of
//! `dims[0]` bits). Each row is packed LSB-first into `u64` words and padded
//! with zero bits to a 64-bit boundary. `dtype 1` is `i32` values in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::bitcore::BinaryVector;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"XRT1";
pub const DTYPE_BINARY: u8 = 0;
pub const DTYPE_I32: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorData {
    Binary(Vec<BinaryVector>),
    Int(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: TensorData,
}

fn row_shape(dims: &[u32]) -> (usize, usize) {
    match dims {
        [n] => (1, *n as usize),
        [rows, rest @ ..] => (*rows as usize, rest.iter().map(|&d| d as usize).product()),
        [] => (0, 0),
    }
}

impl Tensor {
    pub fn binary(dims: Vec<u32>, rows: Vec<BinaryVector>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Tensor(format!("invalid dims {dims:?}")));
        }
        let (n_rows, row_len) = row_shape(&dims);
        if rows.len() != n_rows || rows.iter().any(|r| r.len() != row_len) {
            return Err(Error::Tensor(format!(
                "dims {dims:?} need {n_rows} rows of {row_len} bits"
            )));
        }
        Ok(Self {
            dims,
            data: TensorData::Binary(rows),
        })
    }

    pub fn int(dims: Vec<u32>, values: Vec<i32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Tensor(format!("invalid dims {dims:?}")));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if values.len() != n {
            return Err(Error::Tensor(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            dims,
            data: TensorData::Int(values),
        })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::Binary(rows) => {
                out.push(DTYPE_BINARY);
                for row in rows {
                    for w in row.words() {
                        out.extend_from_slice(&w.bits().to_le_bytes());
                    }
                }
            }
            TensorData::Int(values) => {
                out.push(DTYPE_I32);
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Tensor("bad magic".into()));
        }
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Tensor(format!("unsupported rank {rank}")));
        }
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let dtype = r.take(1)?[0];
        let t = match dtype {
            DTYPE_BINARY => {
                let (n_rows, row_len) = row_shape(&dims);
                if row_len == 0 {
                    return Err(Error::Tensor(format!("invalid dims {dims:?}")));
                }
                let words = row_len.div_ceil(64);
                let rows = (0..n_rows)
                    .map(|_| {
                        let raw = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                        BinaryVector::from_raw_words(&raw, row_len)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Tensor::binary(dims, rows)?
            }
            DTYPE_I32 => {
                let n: usize = dims.iter().map(|&d| d as usize).product();
                let values = (0..n).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
                Tensor::int(dims, values)?
            }
            other => return Err(Error::Tensor(format!("unknown dtype tag {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Tensor(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Tensor(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Tensor("truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
