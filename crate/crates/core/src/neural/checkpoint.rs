//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header (names, shapes, optimizer scalars, free-form metadata), then every
//! tensor and optimizer moment as little-endian `f64` in header order.
//! Values round-trip bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FGCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSnapshot {
    pub config: AdamConfig,
    pub t: u64,
    pub names: Vec<String>,
    #[serde(skip)]
    pub m: Vec<Vec<f64>>,
    #[serde(skip)]
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub epoch: u64,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
    pub adam: Option<AdamSnapshot>,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    epoch: u64,
    meta: serde_json::Value,
    tensors: Vec<TensorHeader>,
    adam: Option<AdamSnapshot>,
}

impl AdamState {
    pub fn snapshot(&self, store: &ParamStore) -> AdamSnapshot {
        AdamSnapshot {
            config: self.config,
            t: self.t,
            names: self.ids.iter().map(|&id| store.name(id).to_string()).collect(),
            m: self.m.clone(),
            v: self.v.clone(),
        }
    }

    pub fn restore(store: &ParamStore, snap: &AdamSnapshot) -> Result<AdamState> {
        let mut ids = Vec::with_capacity(snap.names.len());
        for (i, name) in snap.names.iter().enumerate() {
            let id = store
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("optimizer references unknown parameter `{name}`")))?;
            let n = store.get(id).len();
            if snap.m[i].len() != n || snap.v[i].len() != n {
                return Err(Error::Checkpoint(format!("optimizer moment size mismatch for `{name}`")));
            }
            ids.push(id);
        }
        Ok(AdamState { config: snap.config, ids, m: snap.m.clone(), v: snap.v.clone(), t: snap.t })
    }
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            kind: self.kind.clone(),
            epoch: self.epoch,
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorHeader { name: name.clone(), rows: t.rows, cols: t.cols })
                .collect(),
            adam: self.adam.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let io = |e| Error::Checkpoint(format!("write failed: {e}"));
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION).map_err(io)?;
        w.write_u64::<LittleEndian>(json.len() as u64).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        let mut put = |xs: &[f64]| -> Result<()> {
            for &x in xs {
                w.write_f64::<LittleEndian>(x).map_err(io)?;
            }
            Ok(())
        };
        for (_, t) in &self.tensors {
            put(&t.data)?;
        }
        if let Some(adam) = &self.adam {
            for m in &adam.m {
                put(m)?;
            }
            for v in &adam.v {
                put(v)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Checkpoint> {
        let bad = |e: std::io::Error| Error::Checkpoint(format!("truncated or unreadable checkpoint: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(bad)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let len = r.read_u64::<LittleEndian>().map_err(bad)? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json).map_err(bad)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut v).map_err(bad)?;
            Ok(v)
        };
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for th in &header.tensors {
            let data = take(th.rows * th.cols)?;
            tensors.push((th.name.clone(), Tensor::from_vec(th.rows, th.cols, data)));
        }
        let adam = match header.adam {
            Some(mut snap) => {
                let sizes: Vec<usize> = snap
                    .names
                    .iter()
                    .map(|n| {
                        tensors
                            .iter()
                            .find(|(name, _)| name == n)
                            .map(|(_, t)| t.len())
                            .ok_or_else(|| Error::Checkpoint(format!("optimizer state for missing tensor `{n}`")))
                    })
                    .collect::<Result<_>>()?;
                snap.m = sizes.iter().map(|&n| take(n)).collect::<Result<_>>()?;
                snap.v = sizes.iter().map(|&n| take(n)).collect::<Result<_>>()?;
                Some(snap)
            }
            None => None,
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(bad)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after checkpoint payload".into()));
        }
        Ok(Checkpoint { kind: header.kind, epoch: header.epoch, meta: header.meta, tensors, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(BufReader::new(f))
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}
