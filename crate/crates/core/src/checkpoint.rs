//! Binary checkpoint format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes  "TSFGCKPT"
//! version   u32
//! config    u64 length + UTF-8 JSON
//! step      u64
//! epoch     u64
//! rng       32-byte seed, u64 stream, u128 word position
//! generator      parameter block
//! discriminator  parameter block
//! adam_g, adam_d u64 step count + tensor block (m) + tensor block (v)
//! ```
//!
//! A parameter block is a u32 count followed by, per entry, a u32-prefixed
//! name and a tensor. A tensor block is a u32 count of tensors. A tensor is
//! a u32 rank, one u64 per dimension, then its `f64` values.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::config::RunConfig;
use crate::error::{CheckpointError, Error, Result};
use crate::params::ModelParams;
use crate::tensor::Tensor;
use crate::training::AdamState;

pub const MAGIC: &[u8; 8] = b"TSFGCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Exact position of a ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub generator: ModelParams,
    pub discriminator: ModelParams,
    pub adam_g: AdamState,
    pub adam_d: AdamState,
    pub step: u64,
    pub epoch: u64,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        write_params(&mut out, &self.generator);
        write_params(&mut out, &self.discriminator);
        write_adam(&mut out, &self.adam_g);
        write_adam(&mut out, &self.adam_d);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic")? != MAGIC {
            return Err(CheckpointError::BadMagic.into());
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            }
            .into());
        }
        let len = r.len64("config length")?;
        let config_bytes = r.take(len, "config")?;
        let config: RunConfig = serde_json::from_slice(config_bytes)
            .map_err(|e| CheckpointError::Corrupt(format!("config: {e}")))?;
        let step = r.u64("step")?;
        let epoch = r.u64("epoch")?;
        let seed: [u8; 32] = r.take(32, "rng seed")?.try_into().expect("32 bytes");
        let stream = r.u64("rng stream")?;
        let word_pos = u128::from_le_bytes(r.take(16, "rng position")?.try_into().expect("16 bytes"));
        let generator = read_params(&mut r)?;
        let discriminator = read_params(&mut r)?;
        let adam_g = read_adam(&mut r)?;
        let adam_d = read_adam(&mut r)?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            ))
            .into());
        }
        if !adam_g.matches(&generator) || !adam_d.matches(&discriminator) {
            return Err(CheckpointError::Corrupt("optimizer state does not match parameters".into()).into());
        }
        Ok(Self {
            config,
            generator,
            discriminator,
            adam_g,
            adam_d,
            step,
            epoch,
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes)
}

fn write_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_params(out: &mut Vec<u8>, params: &ModelParams) {
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        write_tensor(out, t);
    }
}

fn write_adam(out: &mut Vec<u8>, state: &AdamState) {
    out.extend_from_slice(&state.t.to_le_bytes());
    for block in [&state.m, &state.v] {
        out.extend_from_slice(&(block.len() as u32).to_le_bytes());
        for t in block {
            write_tensor(out, t);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    /// A u64 length that must fit in the remaining input.
    fn len64(&mut self, what: &'static str) -> Result<usize> {
        let n = self.u64(what)?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.bytes.len() - self.pos)
            .ok_or_else(|| Error::from(CheckpointError::Truncated(what)))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32("tensor rank")? as usize;
        if rank > 8 {
            return Err(CheckpointError::Corrupt(format!("tensor rank {rank}")).into());
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = self.len64("tensor dimension")?;
            count = count
                .checked_mul(d)
                .filter(|&c| c <= (self.bytes.len() - self.pos) / 8)
                .ok_or(CheckpointError::Truncated("tensor data"))?;
            shape.push(d);
        }
        let raw = self.take(count * 8, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()).into())
    }

    fn tensors(&mut self) -> Result<Vec<Tensor>> {
        let n = self.u32("tensor count")?;
        (0..n).map(|_| self.tensor()).collect()
    }
}

fn read_params(r: &mut Reader<'_>) -> Result<ModelParams> {
    let n = r.u32("parameter count")?;
    let mut params = ModelParams::new();
    for _ in 0..n {
        let len = r.u32("parameter name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "parameter name")?)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not UTF-8".into()))?
            .to_string();
        params.push(name, r.tensor()?);
    }
    Ok(params)
}

fn read_adam(r: &mut Reader<'_>) -> Result<AdamState> {
    let t = r.u64("adam step")?;
    let m = r.tensors()?;
    let v = r.tensors()?;
    Ok(AdamState { m, v, t })
}
