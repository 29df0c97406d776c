//! Self-describing binary container used for checkpoints and taste spaces.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "AMPCFBIN"
//! version  u32      1
//! kind     u32 length + UTF-8
//! blocks   u32 count, then per block:
//!          u32 name length + UTF-8 name
//!          u8  tag (0 = f64, 1 = u64, 2 = UTF-8 text)
//!          u64 element count (bytes for text)
//!          payload
//! ```
//!
//! Floats are stored as their IEEE-754 bit patterns, so a round trip is exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AMPCFBIN";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    blocks: Vec<(String, Block)>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Container {
            kind: kind.to_string(),
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, block: Block) -> &mut Self {
        self.blocks.push((name.to_string(), block));
        self
    }

    pub fn get(&self, name: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b)
            .ok_or_else(|| Error::Checkpoint(format!("missing block `{name}`")))
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64]> {
        match self.get(name)? {
            Block::F64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("block `{name}` is not f64"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.get(name)? {
            Block::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("block `{name}` is not u64"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.get(name)? {
            Block::Text(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("block `{name}` is not text"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, block) in &self.blocks {
            put_str(&mut out, name);
            match block {
                Block::F64(v) => {
                    out.push(0);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes()));
                }
                Block::U64(v) => {
                    out.push(1);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                }
                Block::Text(s) => {
                    out.push(2);
                    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
                    out.extend_from_slice(s.as_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = r.string()?;
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string()?;
            let tag = r.take(1)?[0];
            let len = r.u64()? as usize;
            let block = match tag {
                0 => Block::F64(
                    (0..len)
                        .map(|_| r.u64().map(f64::from_bits))
                        .collect::<Result<_>>()?,
                ),
                1 => Block::U64((0..len).map(|_| r.u64()).collect::<Result<_>>()?),
                2 => Block::Text(
                    String::from_utf8(r.take(len)?.to_vec())
                        .map_err(|_| Error::Checkpoint(format!("block `{name}` is not UTF-8")))?,
                ),
                t => return Err(Error::Checkpoint(format!("unknown block tag {t}"))),
            };
            blocks.push((name, block));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Container { kind, blocks })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("bad UTF-8".into()))
    }
}
