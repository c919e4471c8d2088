//! Raw signal files: little-endian `i16` samples in `<name>.sig` with a TOML
//! sidecar at `<name>.sig.toml`.

use std::path::{Path, PathBuf};

use ccl_core::stream::Normalizer;
use serde::{Deserialize, Serialize};

use crate::error::{read, read_string, write, IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalMeta {
    pub sample_rate_hz: u32,
    pub bit_depth: u32,
    pub samples: u64,
    pub normalizer: Normalizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl SignalMeta {
    pub fn new(samples: usize, normalizer: Normalizer) -> Self {
        Self {
            sample_rate_hz: ccl_core::SAMPLE_RATE_HZ,
            bit_depth: 16,
            samples: samples as u64,
            normalizer,
            description: None,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

pub fn store_signal(path: &Path, samples: &[i16], meta: &SignalMeta) -> Result<()> {
    if meta.samples != samples.len() as u64 {
        return Err(IoError::invalid(
            path,
            format!("metadata declares {} samples, writing {}", meta.samples, samples.len()),
        ));
    }
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    write(path, bytes)?;
    let side = sidecar_path(path);
    let text = toml::to_string(meta).map_err(|e| IoError::invalid(&side, e.to_string()))?;
    write(&side, text)
}

pub fn load_signal(path: &Path) -> Result<(Vec<i16>, SignalMeta)> {
    let side = sidecar_path(path);
    let meta: SignalMeta =
        toml::from_str(&read_string(&side)?).map_err(|e| IoError::invalid(&side, e.to_string()))?;
    if meta.sample_rate_hz != ccl_core::SAMPLE_RATE_HZ {
        return Err(IoError::invalid(
            &side,
            format!("sample_rate_hz must be {}, got {}", ccl_core::SAMPLE_RATE_HZ, meta.sample_rate_hz),
        ));
    }
    if meta.bit_depth != 16 {
        return Err(IoError::invalid(&side, format!("bit_depth must be 16, got {}", meta.bit_depth)));
    }
    Normalizer::new(meta.normalizer.offset, meta.normalizer.scale).map_err(|e| IoError::core(&side, e))?;
    let bytes = read(path)?;
    if bytes.len() % 2 != 0 {
        return Err(IoError::invalid(
            path,
            format!("{} bytes is not a whole number of 16-bit samples", bytes.len()),
        ));
    }
    if (bytes.len() / 2) as u64 != meta.samples {
        return Err(IoError::invalid(
            path,
            format!("holds {} samples, metadata declares {}", bytes.len() / 2, meta.samples),
        ));
    }
    let samples = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok((samples, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_layout_is_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.sig");
        let meta = SignalMeta::new(3, Normalizer::new(0.0, 8192.0).unwrap());
        store_signal(&p, &[1, -2, 0x1234], &meta).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), [0x01, 0x00, 0xfe, 0xff, 0x34, 0x12]);
        assert_eq!(load_signal(&p).unwrap(), (vec![1, -2, 0x1234], meta));
    }

    #[test]
    fn rejects_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.sig");
        let meta = SignalMeta::new(2, Normalizer::new(0.0, 1.0).unwrap());
        store_signal(&p, &[1, 2], &meta).unwrap();
        std::fs::write(&p, [0u8; 5]).unwrap();
        assert!(load_signal(&p).unwrap_err().to_string().contains("not a whole number"));
        std::fs::write(&p, [0u8; 6]).unwrap();
        assert!(load_signal(&p).unwrap_err().to_string().contains("declares 2"));
    }

    #[test]
    fn rejects_wrong_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.sig");
        let mut meta = SignalMeta::new(1, Normalizer::new(0.0, 1.0).unwrap());
        meta.sample_rate_hz = 2000;
        store_signal(&p, &[0], &meta).unwrap();
        assert!(load_signal(&p).is_err());
    }
}
