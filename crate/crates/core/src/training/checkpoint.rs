//! Checkpoint container.
//!
//! Little-endian binary layout:
//!
//! ```text
//! magic        8 bytes  "SPUNETCK"
//! version      u32      1
//! step         u64      optimizer steps taken
//! config_len   u64      length of the JSON config snapshot
//! config       bytes    TrainConfig as JSON (includes the seed)
//! n_params     u64
//! per parameter, in registration order:
//!   name_len   u32
//!   name       bytes    UTF-8
//!   ndim       u32
//!   dims       u64 * ndim
//!   value      f64 * len   row-major
//!   adam_m     f64 * len
//!   adam_v     f64 * len
//! ```
//!
//! All random streams are keyed by `(seed, step, ...)`, so the seed and step
//! are the complete generator state.

use std::path::Path;

use super::{TrainConfig, Trainer};
use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::network::SpuNet;

const MAGIC: &[u8; 8] = b"SPUNETCK";
const VERSION: u32 = 1;

/// Decoded checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config: TrainConfig,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in self.params.iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
            for &d in p.value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for block in [p.value.data(), &p.adam_m, &p.adam_v] {
                for x in block {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let step = r.u64()?;
        let len = r.len()?;
        let config: TrainConfig = serde_json::from_slice(r.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("config snapshot: {e}")))?;
        let n = r.len()?;
        let mut params = ParamStore::new();
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let value = r.f64s(count)?;
            let adam_m = r.f64s(count)?;
            let adam_v = r.f64s(count)?;
            let id = params.register(name, Tensor::new(shape, value)?)?;
            let p = params.get_mut(id);
            p.adam_m = adam_m;
            p.adam_v = adam_v;
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last parameter".into()));
        }
        Ok(Self { step, config, params })
    }
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
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn save_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    let ck = Checkpoint {
        step: trainer.step,
        config: trainer.config.clone(),
        params: trainer.store.clone(),
    };
    write_atomic(path, &ck.encode())
}

/// Rebuild a trainer from a checkpoint. The stored parameters must match the
/// network implied by the stored config, name for name and shape for shape.
pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = Checkpoint::decode(&bytes)?;
    ck.config.validate()?;
    let (net, fresh) = SpuNet::new(ck.config.net.clone(), ck.config.seed)?;
    if fresh.len() != ck.params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, network expects {}",
            ck.params.len(),
            fresh.len()
        )));
    }
    for (want, have) in fresh.iter().zip(ck.params.iter()) {
        if want.name != have.name || want.value.shape() != have.value.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter {} {:?} does not match expected {} {:?}",
                have.name,
                have.value.shape(),
                want.name,
                want.value.shape()
            )));
        }
    }
    Ok(Trainer {
        config: ck.config,
        net,
        store: ck.params,
        step: ck.step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    fn small() -> Trainer {
        let cfg = TrainConfig {
            patch_size: 32,
            net: NetworkConfig {
                k: 4,
                d: 4,
                c: 8,
                c_prime: 4,
                head_hidden: 4,
                ..NetworkConfig::desk()
            },
            ..TrainConfig::desk()
        };
        Trainer::new(cfg).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut t = small();
        t.step = 17;
        t.store.iter_mut().for_each(|p| p.adam_v.iter_mut().for_each(|v| *v = 0.125));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&t, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.step, 17);
        assert_eq!(back.config, t.config);
        assert_eq!(back.store, t.store);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let t = small();
        let ck = Checkpoint {
            step: 0,
            config: t.config.clone(),
            params: t.store.clone(),
        };
        let bytes = ck.encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::decode(b"NOTACKPT").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::decode(&extra).is_err());
    }
}
