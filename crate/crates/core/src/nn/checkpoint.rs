//! Flat binary checkpoint format.
//!
//! All integers are little-endian; values are IEEE-754 `f64` little-endian.
//!
//! ```text
//! magic        8 bytes   "GENBOOT1"
//! n_meta       u32
//! n_meta times:
//!   key_len    u32, key bytes (UTF-8)
//!   val_len    u32, val bytes (UTF-8)
//! n_blocks     u32
//! n_blocks times:
//!   name_len   u32, name bytes (UTF-8)
//!   kind       u8        0 = weight, 1 = bias
//!   rank       u32
//!   dims       rank × u64
//!   data       product(dims) × f64, row-major
//! ```
//!
//! Metadata keys are sorted, so identical contents give identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use genboot_tensor::Tensor;

use crate::error::{Error, Result};
use crate::nn::{NetworkParams, ParamBlock, ParamKind};

pub const MAGIC: &[u8; 8] = b"GENBOOT1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub blocks: Vec<ParamBlock>,
}

impl Checkpoint {
    /// Appends the blocks of `params`, prefixing each name with `prefix`.
    pub fn push_network(&mut self, prefix: &str, params: &NetworkParams) {
        for b in params.blocks() {
            self.blocks.push(ParamBlock {
                name: format!("{prefix}{}", b.name),
                ..b.clone()
            });
        }
    }

    /// Blocks whose names start with `prefix`, with the prefix stripped.
    pub fn network(&self, prefix: &str) -> NetworkParams {
        NetworkParams::new(
            self.blocks
                .iter()
                .filter_map(|b| {
                    b.name.strip_prefix(prefix).map(|name| ParamBlock {
                        name: name.to_string(),
                        ..b.clone()
                    })
                })
                .collect(),
        )
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, self.metadata.len())?;
        for (k, v) in &self.metadata {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        write_u32(w, self.blocks.len())?;
        for b in &self.blocks {
            write_str(w, &b.name)?;
            w.write_all(&[match b.kind {
                ParamKind::Weight => 0,
                ParamKind::Bias => 1,
            }])?;
            write_u32(w, b.value.rank())?;
            for &d in b.value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &x in b.value.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..read_u32(r)? {
            let k = read_str(r)?;
            let v = read_str(r)?;
            metadata.insert(k, v);
        }
        let n_blocks = read_u32(r)?;
        let mut blocks = Vec::new();
        for _ in 0..n_blocks {
            let name = read_str(r)?;
            let mut kind = [0u8; 1];
            read_exact(r, &mut kind)?;
            let kind = match kind[0] {
                0 => ParamKind::Weight,
                1 => ParamKind::Bias,
                k => return Err(Error::Checkpoint(format!("block `{name}`: unknown kind {k}"))),
            };
            let rank = read_u32(r)?;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut buf = [0u8; 8];
                read_exact(r, &mut buf)?;
                shape.push(u64::from_le_bytes(buf) as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= 1 << 32)
                .ok_or_else(|| Error::Checkpoint(format!("block `{name}`: implausible shape {shape:?}")))?;
            let mut bytes = vec![0u8; n * 8];
            read_exact(r, &mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blocks.push(ParamBlock {
                name,
                kind,
                value: Tensor::new(shape, data)?,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after last block".into()));
        }
        Ok(Checkpoint { metadata, blocks })
    }
}

fn write_u32(w: &mut impl Write, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} exceeds u32")))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("unexpected end of file".into()),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<usize> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf) as usize)
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)?;
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
}
