//! Binary and JSON encodings of a sketch.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CSKT"
//! 4       4     version (u32) = 1
//! 8       8     n (u64)
//! 16      8     d (u64)
//! 24      8     w (u64)
//! 32      8     master seed (u64)
//! 40      8*d*w table, row-major f64
//! ```

use serde::{Deserialize, Serialize};

use super::{CountSketch, SketchConfig};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CSKT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

/// JSON debug dump; round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchDump {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub w: usize,
    pub seed: u64,
    pub tables: Vec<Vec<f64>>,
}

impl CountSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.tables.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [c.n as u64, c.d as u64, c.w as u64, c.master_seed] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.tables {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let to_usize =
            |v: u64| usize::try_from(v).map_err(|_| Error::Decode(format!("{v} overflows usize")));
        let config = SketchConfig {
            n: to_usize(word(8))?,
            d: to_usize(word(16))?,
            w: to_usize(word(24))?,
            master_seed: word(32),
        };
        config
            .validate()
            .map_err(|e| Error::Decode(e.to_string()))?;
        let cells = config
            .d
            .checked_mul(config.w)
            .ok_or_else(|| Error::Decode("table size overflows".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != cells * 8 {
            return Err(Error::Decode(format!(
                "payload is {} bytes, expected {}",
                payload.len(),
                cells * 8
            )));
        }
        let tables = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        CountSketch::from_parts(config, tables)
    }

    pub fn to_dump(&self) -> SketchDump {
        let c = &self.config;
        SketchDump {
            version: VERSION,
            n: c.n,
            d: c.d,
            w: c.w,
            seed: c.master_seed,
            tables: self.tables.chunks(c.w).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_dump(dump: &SketchDump) -> Result<Self> {
        if dump.version != VERSION {
            return Err(Error::Decode(format!(
                "unsupported version {}",
                dump.version
            )));
        }
        if dump.tables.len() != dump.d || dump.tables.iter().any(|r| r.len() != dump.w) {
            return Err(Error::Decode("table shape does not match d x w".into()));
        }
        let config = SketchConfig::new(dump.n, dump.d, dump.w, dump.seed)?;
        CountSketch::from_parts(config, dump.tables.concat())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_dump())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_dump(&serde_json::from_str(s)?)
    }
}
