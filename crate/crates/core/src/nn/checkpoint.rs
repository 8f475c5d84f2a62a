//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            4 bytes  "PMCK"
//! version          u32      = 1
//! input_channels   u32
//! seq_len          u32
//! num_categories   u32
//! pool_h, pool_w   u32, u32
//! conv_layers      u32      then per layer: filters u32, s u32, t u32
//! hidden_layers    u32      then per layer: width u32
//! param_count      u64      then param_count × f64
//! running_count    u64      then running_count × f64
//! ```

use std::fs;
use std::path::Path;

use super::model::{Architecture, ConvLayerSpec, ModelParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PMCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let a = params.architecture();
    let mut out = Vec::with_capacity(64 + 8 * (params.values.len() + params.running.len()));
    out.extend_from_slice(MAGIC);
    let mut u32s = vec![
        FORMAT_VERSION,
        a.input_channels as u32,
        a.seq_len as u32,
        a.num_categories as u32,
        a.pool.0 as u32,
        a.pool.1 as u32,
        a.conv.len() as u32,
    ];
    for c in &a.conv {
        u32s.extend([c.filters as u32, c.window.0 as u32, c.window.1 as u32]);
    }
    u32s.push(a.hidden.len() as u32);
    u32s.extend(a.hidden.iter().map(|&h| h as u32));
    for v in u32s {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for block in [&params.values, &params.running] {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.at
            )));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64_block(&mut self) -> Result<Vec<f64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::Checkpoint("block length overflow".into())
        })?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { buf, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_channels = r.u32()?;
    let seq_len = r.u32()?;
    let num_categories = r.u32()?;
    let pool = (r.u32()?, r.u32()?);
    let n_conv = r.u32()?;
    let mut conv = Vec::with_capacity(n_conv.min(16));
    for _ in 0..n_conv {
        conv.push(ConvLayerSpec {
            filters: r.u32()?,
            window: (r.u32()?, r.u32()?),
        });
    }
    let n_hidden = r.u32()?;
    let mut hidden = Vec::with_capacity(n_hidden.min(16));
    for _ in 0..n_hidden {
        hidden.push(r.u32()?);
    }
    let arch = Architecture {
        input_channels,
        seq_len,
        conv,
        pool,
        hidden,
        num_categories,
    };
    let values = r.f64_block()?;
    let running = r.f64_block()?;
    if r.at != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - r.at
        )));
    }
    ModelParams::from_parts(arch, values, running)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = ModelParams::init(Architecture::cnn(4, 200, 3), 7).unwrap();
        let q = decode(&encode(&p)).unwrap();
        assert_eq!(p, q);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p.values), bits(&q.values));
    }

    #[test]
    fn rejects_corruption() {
        let p = ModelParams::init(Architecture::mlp(2, 8, 2), 1).unwrap();
        let mut b = encode(&p);
        assert!(decode(&b[..b.len() - 3]).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
        let mut c = encode(&p);
        c.push(0);
        assert!(decode(&c).is_err());
    }
}
