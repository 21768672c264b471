//! Checkpoint container shared by every model kind.
//!
//! ```text
//! magic "CRECKPT\0" | version u32
//! kind str | config str (JSON) | config_hash str
//! tensors: n, n × (name str, rows, cols, rows·cols × f32)
//! table:   0 | 1, alpha f64, width, n, n × (m, m × (item, score f64)), popularity
//! ```
//!
//! Counts are varints; floats are little-endian.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cfgen::SimilarityTable;
use crate::codec::{Decoder, Encoder};
use crate::corpus::hex_digest;
use crate::error::{Error, Result};
use crate::numkit::{Matrix, ParamSet};

const MAGIC: &[u8; 8] = b"CRECKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: String,
    pub config_hash: String,
    pub tensors: Vec<(String, Matrix<f32>)>,
    pub table: Option<SimilarityTable>,
}

/// Canonical JSON of a config and its hash.
pub fn config_json<C: Serialize>(cfg: &C) -> (String, String) {
    let json = serde_json::to_string(cfg).expect("configs serialize");
    let hash = hex_digest(json.as_bytes());
    (json, hash)
}

impl Checkpoint {
    pub fn new<C: Serialize>(kind: &str, cfg: &C) -> Self {
        let (config, config_hash) = config_json(cfg);
        Self {
            kind: kind.to_string(),
            config,
            config_hash,
            tensors: Vec::new(),
            table: None,
        }
    }

    pub fn with_params<P: ParamSet<f32>>(mut self, params: &P) -> Self {
        self.tensors = params
            .tensors()
            .into_iter()
            .map(|(name, m)| (name.to_string(), m.clone()))
            .collect();
        self
    }

    pub fn tensor(&self, name: &str) -> Result<&Matrix<f32>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::UnsupportedFormat(format!("checkpoint: missing tensor `{name}`")))
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C> {
        serde_json::from_str(&self.config)
            .map_err(|e| Error::UnsupportedFormat(format!("checkpoint: bad {} config: {e}", self.kind)))
    }

    /// Fails unless the checkpoint was written with `expected` (a config hash),
    /// or `force` is set.
    pub fn check_config(&self, expected: &str, force: bool) -> Result<()> {
        if !force && self.config_hash != expected {
            return Err(Error::Config(format!(
                "checkpoint config hash {} does not match {} (use --force to override)",
                short(&self.config_hash),
                short(expected)
            )));
        }
        Ok(())
    }

    pub fn expect_kind(&self, kinds: &[&str]) -> Result<()> {
        if !kinds.contains(&self.kind.as_str()) {
            return Err(Error::UnsupportedFormat(format!(
                "checkpoint holds a `{}` model, expected one of {kinds:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Copies tensors into `params` by name; any missing, extra or
    /// differently shaped tensor is a format error naming it.
    pub fn load_into<P: ParamSet<f32>>(&self, params: &mut P) -> Result<()> {
        let mut wanted = 0;
        for (name, dst) in params.tensors_mut() {
            wanted += 1;
            let src = self.tensor(name)?;
            if src.shape() != dst.shape() {
                return Err(Error::UnsupportedFormat(format!(
                    "checkpoint: tensor `{name}` has shape {:?}, expected {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.as_mut_slice().copy_from_slice(src.as_slice());
        }
        if wanted != self.tensors.len() {
            let names: Vec<&str> = params.tensors().into_iter().map(|(n, _)| n).collect();
            let extra = self
                .tensors
                .iter()
                .find(|(n, _)| !names.contains(&n.as_str()))
                .map_or("?", |(n, _)| n.as_str());
            return Err(Error::UnsupportedFormat(format!(
                "checkpoint: unexpected tensor `{extra}`"
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, CHECKPOINT_VERSION);
        enc.str(&self.kind);
        enc.str(&self.config);
        enc.str(&self.config_hash);
        enc.varint(self.tensors.len() as u64);
        for (name, m) in &self.tensors {
            enc.str(name);
            enc.varint(m.rows() as u64);
            enc.varint(m.cols() as u64);
            for &x in m.as_slice() {
                enc.f32(x);
            }
        }
        match &self.table {
            None => enc.u8(0),
            Some(t) => {
                enc.u8(1);
                enc.f64(t.alpha);
                enc.varint(t.width as u64);
                enc.varint(t.neighbors.len() as u64);
                for row in &t.neighbors {
                    enc.varint(row.len() as u64);
                    for &(j, s) in row {
                        enc.varint(j as u64);
                        enc.f64(s);
                    }
                }
                enc.indices(&t.popularity);
            }
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, CHECKPOINT_VERSION, "checkpoint")?;
        let kind = dec.str()?;
        let config = dec.str()?;
        let config_hash = dec.str()?;
        let n = dec.len()?;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = dec.str()?;
            let rows = dec.len()?;
            let cols = dec.len()?;
            let len = rows
                .checked_mul(cols)
                .filter(|&l| l.saturating_mul(4) <= dec.remaining())
                .ok_or_else(|| {
                    Error::UnsupportedFormat(format!("checkpoint: tensor `{name}` is truncated"))
                })?;
            let data = (0..len).map(|_| dec.f32()).collect::<Result<Vec<_>>>()?;
            tensors.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        let table = match dec.u8()? {
            0 => None,
            1 => {
                let alpha = dec.f64()?;
                let width = dec.len()?;
                let n = dec.len()?;
                let mut neighbors = Vec::with_capacity(n);
                for _ in 0..n {
                    let m = dec.len()?;
                    let row = (0..m)
                        .map(|_| Ok((dec.u32()?, dec.f64()?)))
                        .collect::<Result<Vec<_>>>()?;
                    neighbors.push(row);
                }
                let popularity = dec.indices()?;
                let in_range = neighbors.iter().flatten().all(|&(j, _)| (j as usize) < n)
                    && popularity.iter().all(|&j| (j as usize) < n);
                if !in_range {
                    return Err(Error::UnsupportedFormat(
                        "checkpoint: similarity table index out of range".into(),
                    ));
                }
                Some(SimilarityTable {
                    alpha,
                    width,
                    neighbors,
                    popularity,
                })
            }
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "checkpoint: unknown table marker {other}"
                )))
            }
        };
        dec.finish()?;
        Ok(Self {
            kind,
            config,
            config_hash,
            tensors,
            table,
        })
    }

    pub fn fingerprint(&self) -> String {
        hex_digest(&self.encode())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(Error::io_at(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(Error::io_at(path))?)
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngSeed;
    use crate::stampgen::{StampConfig, StampParams};

    fn sample() -> (StampConfig, StampParams<f32>) {
        let cfg = StampConfig {
            d: 3,
            ..StampConfig::default()
        };
        let p = StampParams::init(7, &cfg, &mut RngSeed(5).rng()).unwrap();
        (cfg, p)
    }

    #[test]
    fn params_round_trip() {
        let (cfg, p) = sample();
        let ck = Checkpoint::new("stamp", &cfg).with_params(&p);
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(back, ck);
        let mut q = StampParams::<f32>::zeros(7, 3);
        back.load_into(&mut q).unwrap();
        assert_eq!(q, p);
        assert_eq!(back.config::<StampConfig>().unwrap(), cfg);
    }

    #[test]
    fn table_round_trip() {
        let table = SimilarityTable {
            alpha: 0.5,
            width: 2,
            neighbors: vec![vec![(1, 0.25), (2, 0.125)], vec![], vec![(0, 1.0)]],
            popularity: vec![2, 0, 1],
        };
        let mut ck = Checkpoint::new("i2i-cf", &());
        ck.table = Some(table);
        assert_eq!(Checkpoint::decode(&ck.encode()).unwrap(), ck);
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let (cfg, p) = sample();
        let ck = Checkpoint::new("stamp", &cfg).with_params(&p);
        let mut wrong = StampParams::<f32>::zeros(8, 3);
        let err = ck.load_into(&mut wrong).unwrap_err();
        assert_eq!(err.class(), "format");
        assert!(err.to_string().contains("item_emb"), "{err}");
    }

    #[test]
    fn config_hash_is_enforced_unless_forced() {
        let (cfg, p) = sample();
        let ck = Checkpoint::new("stamp", &cfg).with_params(&p);
        let other = StampConfig { d: 4, ..cfg.clone() };
        let (_, other_hash) = config_json(&other);
        assert!(ck.check_config(&ck.config_hash, false).is_ok());
        assert_eq!(ck.check_config(&other_hash, false).unwrap_err().class(), "config");
        assert!(ck.check_config(&other_hash, true).is_ok());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let (cfg, p) = sample();
        let bytes = Checkpoint::new("stamp", &cfg).with_params(&p).encode();
        for cut in [5, 20, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err());
        }
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(Checkpoint::decode(&v).unwrap_err().to_string().contains("version"));
    }
}
