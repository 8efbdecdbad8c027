//! Versioned binary weight files.
//!
//! Layout (little-endian): magic `PPRW`, format version `u32`, environment
//! name (`u32` length + UTF-8), activation tag (`u32` length + UTF-8), layer
//! count `u32`, layer sizes `u32` each, parameter count `u64`, parameters as
//! `f64`, then a SHA-256 digest of everything before it.

use std::path::Path;

use pporpe::net::{Activation, Mlp};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"PPRW";
const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SavedPolicy {
    pub env: String,
    pub actor: Mlp,
}

pub fn encode(policy: &SavedPolicy) -> Vec<u8> {
    let net = &policy.actor;
    let mut out = Vec::with_capacity(64 + 8 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for text in [policy.env.as_str(), net.activation().tag()] {
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
    }
    out.extend_from_slice(&(net.layer_sizes().len() as u32).to_le_bytes());
    for &s in net.layer_sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.parameter_count() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated weight file")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8 in header".into())
    }
}

/// Verifies the checksum first, then parses the header and parameters.
pub fn decode(bytes: &[u8]) -> Result<SavedPolicy, String> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..4] != MAGIC {
        return Err("not a pporpe weight file".into());
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err("checksum mismatch (file is corrupted)".into());
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let env = r.text()?;
    let tag = r.text()?;
    let activation =
        Activation::from_tag(&tag).ok_or_else(|| format!("unknown activation `{tag}`"))?;
    let layers = r.u32()? as usize;
    let sizes = (0..layers)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let count = r.u64()? as usize;
    let raw = r.take(count.checked_mul(8).ok_or("parameter count overflows")?)?;
    if r.pos != body.len() {
        return Err("trailing bytes after parameters".into());
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let actor = Mlp::from_params(&sizes, activation, params).map_err(|e| e.to_string())?;
    Ok(SavedPolicy { env, actor })
}

pub fn save(path: &Path, policy: &SavedPolicy) -> Result<(), CliError> {
    std::fs::write(path, encode(policy)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<SavedPolicy, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|reason| CliError::Weights {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample() -> SavedPolicy {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        SavedPolicy {
            env: "cartpole".into(),
            actor: Mlp::new(&[4, 6, 2], Activation::Tanh, &mut rng).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        assert_eq!(decode(&encode(&p)).unwrap(), p);
    }

    #[test]
    fn any_flipped_byte_is_detected() {
        let bytes = encode(&sample());
        for i in [4, 20, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(decode(&bad).is_err(), "byte {i}");
        }
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"nope").is_err());
    }
}
