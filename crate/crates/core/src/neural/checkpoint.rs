use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::operator::{Arch, CorrectionOperator};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DLHIMCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    arch: Arch,
    param_count: usize,
}

/// Layout: magic, `u32` version, `u32` header length, JSON header,
/// little-endian `f64` parameters. Round trips are bit-exact.
pub fn checkpoint_save(op: &CorrectionOperator, path: &Path) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        arch: op.arch.clone(),
        param_count: op.params.len(),
    })
    .map_err(|e| Error::format(path, e.to_string()))?;
    let mut bytes = Vec::with_capacity(16 + header.len() + 8 * op.params.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header);
    for p in &op.params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<CorrectionOperator> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| Error::format(path, e.to_string()))?;
    if header.param_count != header.arch.param_count() {
        return Err(bad("parameter count disagrees with architecture"));
    }
    let payload = &bytes[16 + hlen..];
    if payload.len() != 8 * header.param_count {
        return Err(bad("truncated parameters"));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(CorrectionOperator {
        arch: header.arch,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{DeepOnetArch, SpectralArch};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for op in [
            CorrectionOperator::init(Arch::DeepOnet(DeepOnetArch::new(31)), 1),
            CorrectionOperator::init(Arch::Spectral(SpectralArch::new(31)), 2),
        ] {
            let path = dir.path().join("op.ckpt");
            checkpoint_save(&op, &path).unwrap();
            let back = checkpoint_load(&path).unwrap();
            assert_eq!(back.arch, op.arch);
            assert!(back
                .params
                .iter()
                .zip(&op.params)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn truncated_and_foreign_versions_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.ckpt");
        checkpoint_save(&CorrectionOperator::zero(15), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(checkpoint_load(&path), Err(Error::Format { .. })));
        let mut v2 = bytes.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, v2).unwrap();
        let err = checkpoint_load(&path).unwrap_err();
        assert!(err.to_string().contains("version 2"));
    }
}
