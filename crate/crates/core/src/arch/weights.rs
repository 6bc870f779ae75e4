//! ESNW weight files: magic `ESNW`, u32 version 1, u32 record count, then per
//! record a u32 name length, UTF-8 name, u32 rank, `rank` u32 dims, and the
//! f32 values, all little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::network::Network;

const MAGIC: &[u8; 4] = b"ESNW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn encode_records(records: &[WeightRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for rec in records {
        out.extend_from_slice(&(rec.name.len() as u32).to_le_bytes());
        out.extend_from_slice(rec.name.as_bytes());
        out.extend_from_slice(&(rec.dims.len() as u32).to_le_bytes());
        for &d in &rec.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &rec.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("ESNW truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<WeightRecord>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing ESNW magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported ESNW version {version}")));
    }
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("record name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = dims.iter().product::<usize>();
        let values = r
            .take(len.checked_mul(4).ok_or_else(|| Error::Format("record too large".into()))?)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        records.push(WeightRecord { name, dims, values });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after ESNW records", bytes.len() - r.pos)));
    }
    Ok(records)
}

fn bn_records(prefix: &str, unit: &crate::nn::ConvBn) -> Vec<WeightRecord> {
    let c = unit.bn.channels();
    [
        ("gamma", &unit.bn.gamma),
        ("beta", &unit.bn.beta),
        ("running_mean", &unit.bn.running_mean),
        ("running_var", &unit.bn.running_var),
    ]
    .into_iter()
    .map(|(field, v)| WeightRecord {
        name: format!("{prefix}.bn.{field}"),
        dims: vec![c],
        values: v.clone(),
    })
    .collect()
}

impl Network {
    /// Every stored tensor, in spec layer order.
    pub fn to_records(&self) -> Vec<WeightRecord> {
        let mut out = Vec::new();
        for (layer, unit) in self.conv_units() {
            let prefix = format!("layers.{layer}");
            out.push(WeightRecord {
                name: format!("{prefix}.conv.weight"),
                dims: unit.conv.weights.shape().to_vec(),
                values: unit.conv.weights.data().to_vec(),
            });
            out.extend(bn_records(&prefix, unit));
        }
        if let Some((layer, dense)) = self.dense() {
            out.push(WeightRecord {
                name: format!("layers.{layer}.dense.weight"),
                dims: dense.weights.shape().to_vec(),
                values: dense.weights.data().to_vec(),
            });
        }
        out
    }

    /// Overwrites parameters from records; names and dims must match exactly.
    pub fn load_records(&mut self, records: &[WeightRecord]) -> Result<()> {
        let expected = self.to_records();
        if expected.len() != records.len() {
            return Err(Error::Format(format!(
                "weight file has {} records, network {} needs {}",
                records.len(),
                self.spec().name,
                expected.len()
            )));
        }
        for (want, got) in expected.iter().zip(records) {
            if want.name != got.name || want.dims != got.dims {
                return Err(Error::Format(format!(
                    "record `{}` {:?} does not match expected `{}` {:?}",
                    got.name, got.dims, want.name, want.dims
                )));
            }
        }
        let mut it = records.iter();
        let mut next = || it.next().expect("counted").values.clone();
        for (_, unit) in self.conv_units_mut() {
            let w = next();
            unit.conv.weights.data_mut().copy_from_slice(&w);
            unit.bn.gamma = next();
            unit.bn.beta = next();
            unit.bn.running_mean = next();
            unit.bn.running_var = next();
        }
        if let Some((_, dense)) = self.dense_mut() {
            let w = next();
            dense.weights.data_mut().copy_from_slice(&w);
        }
        Ok(())
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, encode_records(&self.to_records())).map_err(|e| Error::io(path, e))
    }

    pub fn load_weights(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.load_records(&decode_records(&bytes)?)
    }
}
