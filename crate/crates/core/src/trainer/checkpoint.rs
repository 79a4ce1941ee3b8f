use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{Discriminator, Generator, Model};
use crate::numerics::{ParamStore, Tensor};

use super::config::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"V2IR";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 8;

/// Parameters of every model of a run plus the run's configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// `(role, store)` pairs in save order.
    pub models: Vec<(String, ParamStore<f32>)>,
}

impl Checkpoint {
    pub fn store(&self, role: &str) -> Result<&ParamStore<f32>> {
        self.models
            .iter()
            .find(|(r, _)| r == role)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Format(format!("checkpoint has no model `{role}`")))
    }

    /// Rebuilds a generator, checking every parameter against the
    /// architecture implied by the stored configuration.
    pub fn generator(&self, role: &str) -> Result<Generator> {
        let spec = self.config.generator_spec(role)?;
        let template: Generator = crate::models::build_generator(&spec, &crate::numerics::Rng::new(0, "template"))?;
        adopt(template, self.store(role)?)
    }

    pub fn discriminator(&self, role: &str) -> Result<Discriminator> {
        let spec = self.config.discriminator_spec(role)?;
        let template: Discriminator =
            crate::models::build_discriminator(&spec, &crate::numerics::Rng::new(0, "template"))?;
        adopt(template, self.store(role)?)
    }
}

fn adopt<S>(mut template: Model<S>, stored: &ParamStore<f32>) -> Result<Model<S>> {
    let same_layout = template.params.len() == stored.len()
        && template
            .params
            .iter()
            .zip(stored.iter())
            .all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape());
    if !same_layout {
        return Err(Error::Format("checkpoint parameters do not match the configured architecture".into()));
    }
    template.params = stored.clone();
    Ok(template)
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} does not fit the checkpoint format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serializes models as `role/param` entries.
///
/// Layout: magic `V2IR`, version u32, config text (u32 length + UTF-8),
/// then per parameter the name (u32 length + bytes), ndim u32, each dim
/// u32 and the f32 values, all little-endian. The last 8 bytes are the
/// leading bytes of the SHA-256 of everything before them.
pub fn encode_checkpoint(models: &[(&str, &ParamStore<f32>)], config: &TrainConfig) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let text = config.to_text();
    put_u32(&mut out, text.len())?;
    out.extend_from_slice(text.as_bytes());
    for (role, store) in models {
        if role.is_empty() || role.contains('/') {
            return Err(Error::InvalidArgument(format!("bad model role `{role}`")));
        }
        for (name, t) in store.iter() {
            let full = format!("{role}/{name}");
            put_u32(&mut out, full.len())?;
            out.extend_from_slice(full.as_bytes());
            put_u32(&mut out, t.shape().len())?;
            for &d in t.shape() {
                put_u32(&mut out, d)?;
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest[..DIGEST_LEN]);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn text(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| Error::Format("checkpoint text is not UTF-8".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    if bytes.len() < 8 + DIGEST_LEN {
        return Err(Error::Format("checkpoint is truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body)[..DIGEST_LEN] != *digest {
        return Err(Error::Digest);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let config = TrainConfig::parse(r.text()?)?;
    let mut models: Vec<(String, ParamStore<f32>)> = Vec::new();
    while r.pos < body.len() {
        let full = r.text()?;
        let (role, name) = full
            .split_once('/')
            .ok_or_else(|| Error::Format(format!("parameter `{full}` has no role prefix")))?;
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("parameter `{full}` is too large")))?;
        let raw = r.take(len.checked_mul(4).ok_or_else(|| Error::Format("parameter too large".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::Format(format!("parameter `{full}`: {e}")))?;
        if models.last().map(|(r, _)| r.as_str()) != Some(role) {
            if models.iter().any(|(r, _)| r == role) {
                return Err(Error::Format(format!("model `{role}` is split in the checkpoint")));
            }
            models.push((role.to_string(), ParamStore::new()));
        }
        let store = &mut models.last_mut().expect("pushed above").1;
        store
            .insert(name, t)
            .map_err(|_| Error::Format(format!("duplicate parameter `{full}`")))?;
    }
    Ok(Checkpoint { config, models })
}

pub fn save_checkpoint(models: &[(&str, &ParamStore<f32>)], config: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(models, config)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
