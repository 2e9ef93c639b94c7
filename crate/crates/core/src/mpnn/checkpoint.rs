//! Binary checkpoints. Layout (all integers and floats little-endian):
//!
//! ```text
//! "CGNN" | version u32 | layers u32 | hidden u32 | input u32 | classes u32
//! | readout u8 (0 sum, 1 mean, 2 ugc) | w_diag u8 | seed u64 | ε f64 × layers
//! | per layer: w1, b1, w2, b2 (f64, row-major) | head_w, head_b
//! | bank size u32 | per rank ascending: rank u32, W_k f64 × (d² or d)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{readout_len, LayerParams, MpnnConfig, MpnnModel, Params, Readout};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CGNN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn encode(m: &MpnnModel) -> Vec<u8> {
    let c = &m.config;
    let p = &m.params;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.num_layers, c.hidden_dim, c.input_width, c.num_classes] {
        put_u32(&mut out, v);
    }
    out.push(match c.readout {
        Readout::Sum => 0,
        Readout::Mean => 1,
        Readout::UgcWeighted => 2,
    });
    out.push(u8::from(c.w_diag));
    out.extend_from_slice(&c.seed.to_le_bytes());
    put_f64s(&mut out, &c.epsilon);
    for l in &p.layers {
        put_f64s(&mut out, l.w1.iter());
        put_f64s(&mut out, l.b1.iter());
        put_f64s(&mut out, l.w2.iter());
        put_f64s(&mut out, l.b2.iter());
    }
    put_f64s(&mut out, p.head_w.iter());
    put_f64s(&mut out, p.head_b.iter());
    put_u32(&mut out, p.readout.len());
    for (k, w) in &p.readout {
        put_u32(&mut out, *k);
        put_f64s(&mut out, w.iter());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&mut self, r: usize, c: usize) -> Result<Array2<f64>> {
        Ok(Array2::from_shape_vec((r, c), self.f64s(r * c)?).expect("sized"))
    }

    fn vector(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(self.f64s(n)?))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<MpnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (layers, d, input, classes) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let readout = match r.u8()? {
        0 => Readout::Sum,
        1 => Readout::Mean,
        2 => Readout::UgcWeighted,
        x => return Err(Error::Checkpoint(format!("unknown readout code {x}"))),
    };
    let w_diag = match r.u8()? {
        0 => false,
        1 => true,
        x => return Err(Error::Checkpoint(format!("bad w_diag flag {x}"))),
    };
    let seed = r.u64()?;
    let config = MpnnConfig {
        num_layers: layers,
        hidden_dim: d,
        epsilon: r.f64s(layers)?,
        readout,
        input_width: input,
        num_classes: classes,
        seed,
        w_diag,
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut lps = Vec::new();
    for t in 0..layers {
        let fan_in = if t == 0 { input } else { d };
        lps.push(LayerParams {
            w1: r.matrix(d, fan_in)?,
            b1: r.vector(d)?,
            w2: r.matrix(d, d)?,
            b2: r.vector(d)?,
        });
    }
    let head_w = r.matrix(classes, d)?;
    let head_b = r.vector(classes)?;
    let bank = r.u32()?;
    let mut readout_bank = BTreeMap::new();
    for _ in 0..bank {
        let k = r.u32()?;
        let w = r.vector(readout_len(&config))?;
        if readout_bank.insert(k, w).is_some() {
            return Err(Error::Checkpoint(format!("readout rank {k} stored twice")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    MpnnModel::from_parts(
        config,
        Params {
            layers: lps,
            readout: readout_bank,
            head_w,
            head_b,
        },
    )
}

pub fn save_checkpoint(m: &MpnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(m))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MpnnModel> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> MpnnModel {
        let mut cfg = MpnnConfig::new(3, 2)
            .with_layers(2)
            .with_hidden_dim(4)
            .with_readout(Readout::UgcWeighted)
            .with_seed(77);
        cfg.epsilon = vec![0.25, -0.5];
        let mut m = MpnnModel::new(cfg).unwrap();
        m.ensure_readout_ranks([2, 5]);
        m
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"CGNN");
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = encode(&model());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Checkpoint(_))));
    }
}
