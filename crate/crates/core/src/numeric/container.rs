//! Binary record container used for checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "ADYNCKPT"
//! version  u32
//! count    u32
//! record*  name_len u32 | name utf-8 | dtype u8 | ndim u32 | dims u64* |
//!          payload_len u64 | payload
//! ```
//!
//! dtype tags: 0 = f32, 1 = f64, 2 = u64, 3 = utf-8 text. Payloads are
//! row-major.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numeric::{Array, DType, Storable};

pub const MAGIC: &[u8; 8] = b"ADYNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U64(Vec<u64>),
    Text(String),
}

impl Payload {
    fn tag(&self) -> u8 {
        match self {
            Payload::F32(_) => DType::F32.tag(),
            Payload::F64(_) => DType::F64.tag(),
            Payload::U64(_) => 2,
            Payload::Text(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub payload: Payload,
}

impl Record {
    pub fn array<T: Storable>(name: &str, a: &Array<T>) -> Self {
        let payload = match T::DTYPE {
            DType::F32 => Payload::F32(a.data().iter().map(|x| x.as_f64() as f32).collect()),
            DType::F64 => Payload::F64(a.data().iter().map(|x| x.as_f64()).collect()),
        };
        Record {
            name: name.to_string(),
            shape: a.shape().to_vec(),
            payload,
        }
    }

    pub fn text(name: &str, s: impl Into<String>) -> Self {
        Record {
            name: name.to_string(),
            shape: vec![],
            payload: Payload::Text(s.into()),
        }
    }

    pub fn u64s(name: &str, v: Vec<u64>) -> Self {
        Record {
            name: name.to_string(),
            shape: vec![v.len()],
            payload: Payload::U64(v),
        }
    }

    pub fn to_array<T: Storable>(&self) -> Result<Array<T>> {
        let data: Vec<T> = match (&self.payload, T::DTYPE) {
            (Payload::F32(v), DType::F32) => v.iter().map(|&x| T::lit(x as f64)).collect(),
            (Payload::F64(v), DType::F64) => v.iter().map(|&x| T::lit(x)).collect(),
            _ => {
                return Err(Error::Checkpoint(format!(
                    "record {} has dtype tag {}, expected {}",
                    self.name,
                    self.payload.tag(),
                    T::DTYPE.name()
                )))
            }
        };
        Array::from_vec(&self.shape, data)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub records: Vec<Record>,
}

impl Container {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn get(&self, name: &str) -> Result<&Record> {
        self.records
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing record {name}")))
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match &self.get(name)?.payload {
            Payload::Text(s) => Ok(s),
            _ => Err(Error::Checkpoint(format!("record {name} is not text"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match &self.get(name)?.payload {
            Payload::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("record {name} is not u64"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.push(r.payload.tag());
            out.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
            for &d in &r.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            let mut body = Vec::new();
            match &r.payload {
                Payload::F32(v) => v.iter().for_each(|x| body.extend_from_slice(&x.to_le_bytes())),
                Payload::F64(v) => v.iter().for_each(|x| body.extend_from_slice(&x.to_le_bytes())),
                Payload::U64(v) => v.iter().for_each(|x| body.extend_from_slice(&x.to_le_bytes())),
                Payload::Text(s) => body.extend_from_slice(s.as_bytes()),
            }
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container version {version} (expected {VERSION})"
            )));
        }
        let count = cur.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("record name is not utf-8".into()))?;
            let tag = cur.take(1)?[0];
            let ndim = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(16));
            for _ in 0..ndim {
                shape.push(cur.u64()? as usize);
            }
            let len = cur.u64()? as usize;
            let body = cur.take(len)?;
            let payload = match tag {
                0 => Payload::F32(chunks(body, 4, &name)?.map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
                1 => Payload::F64(chunks(body, 8, &name)?.map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
                2 => Payload::U64(chunks(body, 8, &name)?.map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()),
                3 => Payload::Text(
                    String::from_utf8(body.to_vec())
                        .map_err(|_| Error::Checkpoint(format!("record {name} is not utf-8")))?,
                ),
                t => return Err(Error::Checkpoint(format!("record {name}: unknown dtype tag {t}"))),
            };
            let numel: usize = shape.iter().product();
            let n = match &payload {
                Payload::F32(v) => Some(v.len()),
                Payload::F64(v) => Some(v.len()),
                Payload::U64(v) => Some(v.len()),
                Payload::Text(_) => None,
            };
            if let Some(n) = n {
                if n != numel {
                    return Err(Error::Checkpoint(format!(
                        "record {name}: shape {shape:?} vs {n} values"
                    )));
                }
            }
            records.push(Record { name, shape, payload });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last record".into()));
        }
        Ok(Container { records })
    }
}

fn chunks<'a>(body: &'a [u8], width: usize, name: &str) -> Result<std::slice::ChunksExact<'a, u8>> {
    if body.len() % width != 0 {
        return Err(Error::Checkpoint(format!("record {name}: ragged payload")));
    }
    Ok(body.chunks_exact(width))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
