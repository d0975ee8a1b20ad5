//! Versioned binary tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "SKT1"
//! version u32      1
//! dtype   u8       1 = f32
//! rank    u8
//! dims    rank * u64
//! payload row-major little-endian elements
//! ```
//!
//! The format is deliberately minimal so that `read(write(b)) == b` holds
//! bit-for-bit, including dimension order.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const TENSOR_MAGIC: [u8; 4] = *b"SKT1";
pub const TENSOR_FORMAT_VERSION: u32 = 1;

/// Element type tag stored in the container header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 1,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, TensorError> {
        match code {
            1 => Ok(DType::F32),
            other => Err(TensorError::UnknownDtype(other)),
        }
    }
}

/// A dense row-major tensor with explicit dimension sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    pub dtype: DType,
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl TensorBlob {
    /// Builds an f32 blob, checking that the dims product matches the
    /// payload length.
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected = checked_element_count(&dims)?;
        if expected != data.len() as u64 {
            return Err(TensorError::ShapeMismatch { dims, expected, actual: data.len() });
        }
        Ok(Self { dtype: DType::F32, dims, data })
    }
}

fn checked_element_count(dims: &[u64]) -> Result<u64, TensorError> {
    let mut product: u64 = 1;
    for &d in dims {
        product = product
            .checked_mul(d)
            .ok_or_else(|| TensorError::DimsOverflow { dims: dims.to_vec() })?;
    }
    // The payload byte count must stay addressable too.
    product
        .checked_mul(4)
        .ok_or_else(|| TensorError::DimsOverflow { dims: dims.to_vec() })?;
    Ok(product)
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("bad magic {found:?}, expected {TENSOR_MAGIC:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported tensor format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("dimension product overflows for dims {dims:?}")]
    DimsOverflow { dims: Vec<u64> },
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("dims {dims:?} require {expected} elements, payload has {actual}")]
    ShapeMismatch { dims: Vec<u64>, expected: u64, actual: usize },
    #[error("rank {0} exceeds the container maximum of 255")]
    RankTooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serializes a blob into the container format.
pub fn write_tensor<W: Write>(blob: &TensorBlob, mut sink: W) -> Result<(), TensorError> {
    let expected = checked_element_count(&blob.dims)?;
    if expected != blob.data.len() as u64 {
        return Err(TensorError::ShapeMismatch {
            dims: blob.dims.clone(),
            expected,
            actual: blob.data.len(),
        });
    }
    if blob.dims.len() > u8::MAX as usize {
        return Err(TensorError::RankTooLarge(blob.dims.len()));
    }
    sink.write_all(&TENSOR_MAGIC)?;
    sink.write_all(&TENSOR_FORMAT_VERSION.to_le_bytes())?;
    sink.write_all(&[blob.dtype.code(), blob.dims.len() as u8])?;
    for &d in &blob.dims {
        sink.write_all(&d.to_le_bytes())?;
    }
    // Chunked conversion keeps the extra allocation small on big volumes.
    let mut buf = [0u8; 4 * 4096];
    for chunk in blob.data.chunks(4096) {
        for (i, v) in chunk.iter().enumerate() {
            buf[i * 4..i * 4 + 4].copy_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf[..chunk.len() * 4])?;
    }
    sink.flush()?;
    Ok(())
}

fn read_exact_counted<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<(), TensorError> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(TensorError::TruncatedPayload { expected: buf.len(), got: filled })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Deserializes a blob from the container format.
pub fn read_tensor<R: Read>(mut source: R) -> Result<TensorBlob, TensorError> {
    let mut magic = [0u8; 4];
    read_exact_counted(&mut source, &mut magic)?;
    if magic != TENSOR_MAGIC {
        return Err(TensorError::BadMagic { found: magic });
    }
    let mut word = [0u8; 4];
    read_exact_counted(&mut source, &mut word)?;
    let version = u32::from_le_bytes(word);
    if version != TENSOR_FORMAT_VERSION {
        return Err(TensorError::UnsupportedVersion(version));
    }
    let mut head = [0u8; 2];
    read_exact_counted(&mut source, &mut head)?;
    let dtype = DType::from_code(head[0])?;
    let rank = head[1] as usize;
    let mut dims = Vec::with_capacity(rank);
    let mut dim_bytes = [0u8; 8];
    for _ in 0..rank {
        read_exact_counted(&mut source, &mut dim_bytes)?;
        dims.push(u64::from_le_bytes(dim_bytes));
    }
    let element_count = checked_element_count(&dims)?;
    if element_count > usize::MAX as u64 / 4 {
        return Err(TensorError::DimsOverflow { dims });
    }
    let payload_len = element_count as usize * 4;
    let mut payload = Vec::with_capacity(payload_len.min(1 << 30));
    let got = source
        .by_ref()
        .take(payload_len as u64)
        .read_to_end(&mut payload)?;
    if got < payload_len {
        return Err(TensorError::TruncatedPayload { expected: payload_len, got });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(TensorBlob { dtype, dims, data })
}

pub fn write_tensor_file(blob: &TensorBlob, path: &Path) -> Result<(), TensorError> {
    write_tensor(blob, BufWriter::new(File::create(path)?))
}

pub fn read_tensor_file(path: &Path) -> Result<TensorBlob, TensorError> {
    read_tensor(BufReader::new(File::open(path)?))
}
