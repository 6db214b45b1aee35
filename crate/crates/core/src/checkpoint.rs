//! Flat binary checkpoint archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "SELDCKPT"
//! version      u32
//! variant      u32 length + UTF-8
//! ratio        u32
//! config       u32 length + UTF-8 (JSON model configuration)
//! feature_hash u64
//! count        u32
//! count x { name: u32 length + UTF-8, ndim: u32, dims: ndim x u64, data: numel x f64 }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SELDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A named array of doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub variant: String,
    pub ratio: u32,
    pub config_json: String,
    pub feature_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub entries: Vec<NamedArray>,
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let len = get_u32(r).map_err(truncated)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|e| Error::format("checkpoint", e.to_string()))
}

fn truncated(e: std::io::Error) -> Error {
    Error::format("checkpoint", format!("truncated archive ({e})"))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        put_str(w, &self.header.variant)?;
        w.write_all(&self.header.ratio.to_le_bytes())?;
        put_str(w, &self.header.config_json)?;
        w.write_all(&self.header.feature_hash.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            put_str(w, &e.name)?;
            w.write_all(&(e.shape.len() as u32).to_le_bytes())?;
            for &d in &e.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &e.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = get_u32(r).map_err(truncated)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let variant = get_str(r)?;
        let ratio = get_u32(r).map_err(truncated)?;
        let config_json = get_str(r)?;
        let feature_hash = get_u64(r).map_err(truncated)?;
        let count = get_u32(r).map_err(truncated)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name = get_str(r)?;
            let ndim = get_u32(r).map_err(truncated)? as usize;
            let shape = (0..ndim)
                .map(|_| get_u64(r).map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(truncated)?;
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw).map_err(truncated)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            entries.push(NamedArray { name, shape, data });
        }
        Ok(Self {
            header: CheckpointHeader {
                variant,
                ratio,
                config_json,
                feature_hash,
            },
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.entries.iter().find(|e| e.name == name)
    }
}
