//! Binary sample files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RPUP"
//!      4     4  format version, u32 LE (= 1)
//!      8     4  element count, u32 LE
//!     12     4  block size M, u32 LE
//!     16   8·n  samples, f64 LE
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"RPUP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum SignalFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"RPUP\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: header claims {expected} samples, payload holds {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing bytes after {0} samples")]
    TrailingBytes(usize),
    #[error("block size 0 is not allowed")]
    ZeroBlockSize,
    #[error("too many samples for the format: {0}")]
    TooLarge(usize),
}

impl SignalFileError {
    /// Whether the failure came from the filesystem rather than the contents.
    pub fn is_io(&self) -> bool {
        matches!(self, SignalFileError::Io(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFile {
    pub block_size: usize,
    pub samples: Vec<f64>,
}

impl SignalFile {
    pub fn new(block_size: usize, samples: Vec<f64>) -> Self {
        Self { block_size, samples }
    }

    pub fn from_blocks(block_size: usize, blocks: &[Vec<f64>]) -> Self {
        Self::new(block_size, blocks.iter().flatten().copied().collect())
    }

    /// Samples split into `block_size` chunks; `None` if they do not divide evenly.
    pub fn blocks_of(&self, size: usize) -> Option<Vec<Vec<f64>>> {
        if size == 0 || !self.samples.len().is_multiple_of(size) {
            return None;
        }
        Some(self.samples.chunks(size).map(<[f64]>::to_vec).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), SignalFileError> {
        let count = u32::try_from(self.samples.len()).map_err(|_| SignalFileError::TooLarge(self.samples.len()))?;
        let block = u32::try_from(self.block_size).map_err(|_| SignalFileError::TooLarge(self.block_size))?;
        if block == 0 {
            return Err(SignalFileError::ZeroBlockSize);
        }
        let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * self.samples.len());
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&count.to_le_bytes());
        bytes.extend_from_slice(&block.to_le_bytes());
        for v in &self.samples {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, SignalFileError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SignalFileError> {
        if bytes.len() < HEADER_LEN {
            return Err(SignalFileError::Truncated {
                expected: 0,
                actual: 0,
            });
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(SignalFileError::BadMagic(magic));
        }
        let version = word(4);
        if version != VERSION {
            return Err(SignalFileError::UnsupportedVersion(version));
        }
        let count = word(8) as usize;
        let block_size = word(12) as usize;
        if block_size == 0 {
            return Err(SignalFileError::ZeroBlockSize);
        }
        let payload = &bytes[HEADER_LEN..];
        let available = payload.len() / 8;
        if available < count {
            return Err(SignalFileError::Truncated {
                expected: count,
                actual: available,
            });
        }
        if payload.len() != 8 * count {
            return Err(SignalFileError::TrailingBytes(count));
        }
        let samples = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { block_size, samples })
    }
}
